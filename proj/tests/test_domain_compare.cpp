#include <doctest.h>

#include <cmath>

#include "todalab/domain_compare.hpp"
#include "todalab/error.hpp"

using namespace toda;

namespace {

IntegratorConfig every(double dt) {
  IntegratorConfig c;
  c.sample_every = dt;
  return c;
}

FlaschkaState uniform_open(std::size_t n) {
  FlaschkaState f;
  f.domain = DomainSpec::open(0, static_cast<long>(n) - 1);
  f.a.assign(n, 1.0);
  f.a.back() = 0.0;
  f.b.assign(n, 0.0);
  return f;
}

}  // namespace

TEST_CASE("identical data has no divergence at t = 0") {
  RngStream rng(5, 0);
  auto f = sample_open(ThermalParams::make(1.0, 1.0), 64, rng);
  auto A = evolve(f, every(0.5), 2.0);
  auto B = evolve(f, every(0.5), 2.0);
  auto m = overlap_divergence(A, B, f.domain.first_site(), f.domain.last_site());
  CHECK(m.G.front() == 0.0);
  CHECK(m.G.back() == 0.0);
  CHECK(m.times.size() == A.size());
}

TEST_CASE("stationary uniform lattices never diverge") {
  auto ring = [](std::size_t n) {
    FlaschkaState f;
    f.domain = DomainSpec::torus(n);
    f.a.assign(n, 1.0);
    f.b.assign(n, 0.0);
    return f;
  };
  auto A = evolve(ring(40), every(0.5), 3.0);
  auto B = evolve(ring(60), every(0.5), 3.0);
  auto m = overlap_divergence(A, B, 0, 39);
  for (double g : m.G) CHECK(g == 0.0);
}

TEST_CASE("G is monotone in time and window, H carries the factor 6") {
  RngStream rng(5, 1);
  auto p = ThermalParams::make(1.0, 1.0);
  auto c = coupled_open_torus(p, 64, rng);
  auto A = evolve(c.open, every(0.25), 4.0);
  auto B = evolve(c.torus, every(0.25), 4.0);
  const long shift = -c.open.domain.first_site();
  const long lo = c.open.domain.first_site(), hi = c.open.domain.last_site();
  auto wide = overlap_divergence(A, B, lo + 4, hi - 4, shift);
  auto narrow = overlap_divergence(A, B, lo + 12, hi - 12, shift);
  for (std::size_t s = 0; s < wide.G.size(); ++s) {
    if (s > 0) {
      CHECK(wide.G[s] >= wide.G[s - 1]);
      CHECK(wide.H[s] >= wide.H[s - 1]);
    }
    CHECK(narrow.G[s] <= wide.G[s]);
    const auto& fa = A.samples[s];
    double amax = 0.0;
    for (long x = lo + 4; x <= hi - 4; ++x) amax = std::max(amax, std::abs(fa.a[c.open.domain.index(x)]));
    CHECK(wide.H[s] >= 6.0 * amax);
  }
}

TEST_CASE("coupled open and periodic chains") {
  RngStream rng(5, 2);
  auto p = ThermalParams::make(1.0, 1.0);
  auto c = coupled_open_torus(p, 32, rng);
  CHECK(c.torus.domain.is_torus());
  CHECK(c.open.domain.is_open());
  for (std::size_t i = 0; i + 1 < 32; ++i) CHECK(c.torus.a[i] == c.open.a[i]);
  for (std::size_t i = 0; i < 32; ++i) CHECK(c.torus.b[i] == c.open.b[i]);
  CHECK(c.open.a.back() == 0.0);
  CHECK(c.torus.a.back() > 0.0);
  double ups = 0.0;
  for (double x : c.torus.a) ups -= 2.0 * std::log(x);
  CHECK(c.torus.domain.upsilon() == doctest::Approx(ups).epsilon(1e-14));

  auto A = evolve(c.open, every(0.5), 2.0);
  auto B = evolve(c.torus, every(0.5), 2.0);
  const long shift = -c.open.domain.first_site();
  auto full = overlap_divergence(A, B, c.open.domain.first_site(), c.open.domain.last_site(), shift);
  CHECK(full.G.front() >= 0.1);  // the closing coupling differs from the start
  auto inner = overlap_divergence(A, B, c.open.domain.first_site(), c.open.domain.last_site() - 1, shift);
  CHECK(inner.G.front() == 0.0);
  CHECK(inner.G.back() >= 1e-3);
}

TEST_CASE("thermal open and periodic chains agree away from the boundary") {
  std::vector<long> K;
  for (long k = 10; k <= 80; ++k) K.push_back(k);
  auto table = open_vs_periodic(ThermalParams::make(1.0, 1.0), 256, 5.0, K, 8, 77, IntegratorConfig{});
  CHECK(table.rows.size() == K.size());
  for (std::size_t i = 1; i < table.rows.size(); ++i) CHECK(table.rows[i].median <= table.rows[i - 1].median);
  CHECK(table.fit_points >= 2);
  CHECK(table.fitted_rate >= 0.2);
}

TEST_CASE("nested open intervals") {
  RngStream rng(5, 3);
  auto p = ThermalParams::make(1.0, 1.0);
  auto outer = sample_open(p, DomainSpec::open(-192, 191), rng);
  FlaschkaState inner;
  inner.domain = DomainSpec::open(-128, 127);
  for (long x = -128; x <= 127; ++x) {
    inner.a.push_back(outer.a[outer.domain.index(x)]);
    inner.b.push_back(outer.b[outer.domain.index(x)]);
  }
  inner.a.back() = 0.0;
  const double T = 5.0;
  const long K = static_cast<long>(std::ceil(T * std::log(256.0)));
  auto A = evolve(inner, every(T), T);
  auto B = evolve(outer, every(T), T);
  auto m = overlap_divergence(A, B, -128 + K, 127 - K);
  CHECK(m.G.front() == 0.0);
  CHECK(m.G.back() <= std::exp(-static_cast<double>(K) / 4.0));
}

TEST_CASE("comparison input errors") {
  auto f = uniform_open(20);
  auto A = evolve(f, every(0.5), 1.0);
  auto B = evolve(f, every(0.25), 1.0);
  CHECK_THROWS_AS(overlap_divergence(A, B, 2, 10), InvalidArgument);
  CHECK_THROWS_AS(overlap_divergence(A, A, 10, 2), InvalidArgument);
  CHECK_THROWS_AS(overlap_divergence(A, A, 0, 25), InvalidArgument);
}
