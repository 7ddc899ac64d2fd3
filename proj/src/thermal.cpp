#include "todalab/thermal.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <cmath>

#include "todalab/error.hpp"

namespace toda {

double digamma(double x) {
  if (!(x > 0.0)) throw InvalidArgument("digamma argument must be positive");
  return boost::math::digamma(x);
}

double stretch_parameter(double beta, double theta) {
  if (!(beta > 0.0) || !(theta > 0.0)) throw InvalidArgument("beta and theta must be positive");
  return std::log(beta) - digamma(theta);
}

ThermalParams ThermalParams::make(double beta, double theta) {
  return {beta, theta, stretch_parameter(beta, theta)};
}

void ThermalParams::require_nonzero_alpha() const {
  if (alpha == 0.0) throw InvalidArgument("stretch parameter alpha is zero");
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                    0x70d4u};
  engine_.seed(seq);
}

double RngStream::normal(double mean, double sd) {
  return boost::random::normal_distribution<double>(mean, sd)(engine_);
}

double RngStream::gamma(double shape, double rate) {
  return boost::random::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
}

double RngStream::uniform(double lo, double hi) {
  return boost::random::uniform_real_distribution<double>(lo, hi)(engine_);
}

std::size_t RngStream::index(std::size_t n) {
  return boost::random::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

double sample_a(const ThermalParams& p, RngStream& rng) {
  double g = rng.gamma(p.theta, p.beta);
  // Zero has probability zero; keep the support strictly positive.
  while (g <= 0.0) g = rng.gamma(p.theta, p.beta);
  return std::sqrt(g);
}

double sample_b(const ThermalParams& p, RngStream& rng) { return rng.normal(0.0, 1.0 / std::sqrt(p.beta)); }

FlaschkaState sample_open(const ThermalParams& p, const DomainSpec& domain, RngStream& rng) {
  if (!domain.is_open()) throw InvalidArgument("sample_open needs an open domain");
  const std::size_t n = domain.size();
  FlaschkaState f{domain, Vec(n, 0.0), Vec(n, 0.0), 0.0};
  for (std::size_t i = 0; i + 1 < n; ++i) f.a[i] = sample_a(p, rng);
  for (std::size_t i = 0; i < n; ++i) f.b[i] = sample_b(p, rng);
  return f;
}

FlaschkaState sample_open(const ThermalParams& p, std::size_t n, RngStream& rng) {
  return sample_open(p, DomainSpec::centered_open(n), rng);
}

FlaschkaState sample_periodic(const ThermalParams& p, std::size_t n, RngStream& rng) {
  FlaschkaState f{DomainSpec::torus(n), Vec(n, 0.0), Vec(n, 0.0), 0.0};
  for (std::size_t i = 0; i < n; ++i) f.a[i] = sample_a(p, rng);
  for (std::size_t i = 0; i < n; ++i) f.b[i] = sample_b(p, rng);
  double upsilon = 0.0;
  for (double x : f.a) upsilon -= 2.0 * std::log(x);
  f.domain = f.domain.with_upsilon(upsilon);
  return f;
}

SpacingStatistics spacing_statistics(const Vec& q, double alpha, const std::vector<std::size_t>& lags) {
  SpacingStatistics s;
  if (q.size() >= 2) s.mean_spacing = (q.back() - q.front()) / static_cast<double>(q.size() - 1);
  double total = 0.0;
  for (std::size_t lag : lags) {
    if (lag == 0) continue;
    for (std::size_t i = 0; i + lag < q.size(); ++i) {
      double d = std::abs(q[i + lag] - q[i] - alpha * static_cast<double>(lag));
      total += d;
      s.max_deviation = std::max(s.max_deviation, d);
      ++s.pairs;
    }
  }
  if (s.pairs > 0) s.mean_deviation = total / static_cast<double>(s.pairs);
  return s;
}

InvarianceReport invariance_test(const ThermalParams& p, std::size_t n, double T, std::size_t replicas,
                                 std::uint64_t seed, const IntegratorConfig& cfg, double b_shift) {
  Vec a0, b0, aT, bT;
  for (std::size_t r = 0; r < replicas; ++r) {
    RngStream rng(seed, r);
    FlaschkaState f = sample_periodic(p, n, rng);
    a0.insert(a0.end(), f.a.begin(), f.a.end());
    b0.insert(b0.end(), f.b.begin(), f.b.end());
    for (double& x : f.b) x += b_shift;
    IntegratorConfig c = cfg;
    c.sample_every = T;
    const FlaschkaState end = T > 0.0 ? evolve(f, c, T).samples.back() : f;
    aT.insert(aT.end(), end.a.begin(), end.a.end());
    bT.insert(bT.end(), end.b.begin(), end.b.end());
  }
  return {stats::ks_two_sample(a0, aT), stats::ks_two_sample(b0, bT)};
}

}  // namespace toda
