#pragma once

#include <cstdint>
#include <random>

#include "todalab/lattice.hpp"
#include "todalab/stats.hpp"

namespace toda {

double digamma(double x);
// alpha = log(beta) - digamma(theta).
double stretch_parameter(double beta, double theta);

struct ThermalParams {
  double beta = 1.0;
  double theta = 1.0;
  double alpha = 0.0;

  static ThermalParams make(double beta, double theta);
  // Rejects alpha == 0, where the stretch assumption fails.
  void require_nonzero_alpha() const;
};

// Reproducible random stream keyed by (seed, stream_id).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  double normal(double mean, double sd);
  // Gamma with the given shape and rate.
  double gamma(double shape, double rate);
  double uniform(double lo, double hi);
  std::size_t index(std::size_t n);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

// a entry: sqrt of a Gamma(theta, rate beta) draw; b entry: N(0, 1/beta).
double sample_a(const ThermalParams& p, RngStream& rng);
double sample_b(const ThermalParams& p, RngStream& rng);

FlaschkaState sample_open(const ThermalParams& p, const DomainSpec& domain, RngStream& rng);
// Open interval of N sites centred on site 0.
FlaschkaState sample_open(const ThermalParams& p, std::size_t n, RngStream& rng);
FlaschkaState sample_periodic(const ThermalParams& p, std::size_t n, RngStream& rng);

struct SpacingStatistics {
  double mean_spacing = 0.0;
  // Mean and maximum of |q_j - q_i - alpha (j - i)| over the tested pairs.
  double mean_deviation = 0.0;
  double max_deviation = 0.0;
  std::size_t pairs = 0;
};

// Tests every pair (i, i + lag) for each lag in `lags`.
SpacingStatistics spacing_statistics(const Vec& q, double alpha, const std::vector<std::size_t>& lags);

struct InvarianceReport {
  stats::KsResult a;
  stats::KsResult b;
};

// Pools thermal torus draws at t = 0 and the same draws evolved to time T and
// compares the a and b marginals. `b_shift` perturbs the evolved side only.
InvarianceReport invariance_test(const ThermalParams& p, std::size_t n, double T, std::size_t replicas,
                                 std::uint64_t seed, const IntegratorConfig& cfg, double b_shift = 0.0);

}  // namespace toda
