#include <doctest.h>

#include <cmath>

#include "todalab/error.hpp"
#include "todalab/hydro.hpp"
#include "todalab/localization.hpp"
#include "todalab/stats.hpp"
#include "todalab/thermal.hpp"

using namespace toda;

namespace {

Vec thermal_eigenvalues(std::size_t n, std::uint64_t stream) {
  RngStream rng(41, stream);
  return eigenvalues(build_lax(sample_open(ThermalParams::make(1.0, 1.0), n, rng)));
}

double mass_between(const SpectralDensityEstimate& d, double lo, double hi) {
  double m = 0.0;
  for (std::size_t g = 0; g + 1 < d.grid.size(); ++g) {
    const double x = 0.5 * (d.grid[g] + d.grid[g + 1]);
    if (x >= lo && x < hi) m += 0.5 * (d.density[g] + d.density[g + 1]) * (d.grid[g + 1] - d.grid[g]);
  }
  return m;
}

}  // namespace

TEST_CASE("density estimates") {
  auto one = empirical_density(Vec(16, 0.7), 0.1);
  CHECK(one.integral() == doctest::Approx(1.0).epsilon(1e-6));
  // Unnormalized Gaussian peak 1/(bw sqrt(2 pi)); normalization moves it by the quadrature error only.
  double peak = *std::max_element(one.density.begin(), one.density.end());
  CHECK(peak == doctest::Approx(1.0 / (0.1 * std::sqrt(2.0 * M_PI))).epsilon(1e-3));
  CHECK(one.grid[1] - one.grid[0] <= 0.1 / 8.0 + 1e-15);

  Vec two(20, -5.0);
  for (std::size_t i = 10; i < 20; ++i) two[i] = 5.0;
  auto bi = empirical_density(two, 0.3);
  CHECK(mass_between(bi, -100.0, 0.0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(mass_between(bi, 0.0, 100.0) == doctest::Approx(0.5).epsilon(1e-6));

  CHECK_THROWS_AS(empirical_density(Vec(16, 0.0), 0.0), InvalidArgument);
  CHECK_THROWS_AS(empirical_density(Vec(15, 0.0), 0.1), InvalidArgument);
}

TEST_CASE("thermal density is stable under bandwidth halving") {
  auto ev = thermal_eigenvalues(1024, 0);
  // Silverman's rule of thumb for the wider bandwidth.
  const double bw = 1.06 * std::sqrt(stats::sample_variance(ev)) * std::pow(1024.0, -0.2);
  auto wide = empirical_density(ev, bw);
  auto narrow = empirical_density(ev, bw / 2.0);
  CHECK(density_l1_distance(wide, narrow) <= 0.05);
  CHECK(density_l1_distance(wide, wide) <= 1e-6);
}

TEST_CASE("predicted lyapunov exponents") {
  Vec lam = {1.0, -1.0};
  CHECK(predicted_lyapunov(lam, 0, 1.0) == doctest::Approx(-0.5 - std::log(2.0) / 2.0));
  auto ev = thermal_eigenvalues(64, 1);
  Vec shifted = ev;
  for (double& x : shifted) x += 3.0;
  for (std::size_t k = 0; k < ev.size(); k += 5)
    CHECK(predicted_lyapunov(shifted, k, 0.577) == doctest::Approx(predicted_lyapunov(ev, k, 0.577)).epsilon(1e-12));
}

TEST_CASE("fitted and predicted exponents agree in trend") {
  RngStream rng(41, 2);
  auto p = ThermalParams::make(1.0, 1.0);
  auto L = build_lax(sample_open(p, 1024, rng));
  auto d = eig_tridiag(L);
  auto a = center_bijection(d, default_zeta(1024));
  std::vector<std::size_t> ks;
  for (std::size_t k = 0; k < d.size(); ++k)
    if (a.phi[k] > L.domain.first_site() + 102 && a.phi[k] < L.domain.last_site() - 102) ks.push_back(k);
  auto rows = lyapunov_thouless_check(L, d, a, p, ks, default_decay_collar(1024));
  Vec fit, pred;
  for (const auto& r : rows)
    if (!r.fitted_infinite) {
      fit.push_back(r.fitted);
      pred.push_back(r.predicted);
    }
  CHECK(stats::correlation(fit, pred) >= 0.9);
}

TEST_CASE("velocity solve: small systems") {
  auto one = effective_velocity_solve({0.4}, 1.0);
  CHECK(one.v == Vec{0.4});
  auto two = effective_velocity_solve({1.0, -1.0}, 1.0);
  CHECK(two.v[0] - two.v[1] == doctest::Approx(2.0 / (1.0 + 2.0 * std::log(2.0))).epsilon(1e-14));
  CHECK(two.v[0] + two.v[1] == doctest::Approx(0.0).epsilon(1e-14));
  auto ev = thermal_eigenvalues(64, 3);
  auto dilute = effective_velocity_solve(ev, 1e8);
  for (std::size_t k = 0; k < ev.size(); ++k) CHECK(std::abs(dilute.v[k] - ev[k]) <= 1e-6);
  CHECK_THROWS_AS(effective_velocity_solve({1.0, 1.0}, 1.0), NumericalError);
  CHECK_THROWS_AS(effective_velocity_solve({1.0, 2.0}, 0.0), InvalidArgument);
}

TEST_CASE("velocity solve: exact properties") {
  auto ev = thermal_eigenvalues(512, 4);
  const double alpha = ThermalParams::make(1.0, 1.0).alpha;
  auto s = effective_velocity_solve(ev, alpha);
  double scale = 1.0;
  for (double l : ev) scale = std::max(scale, std::abs(l));
  CHECK(s.max_row_residual <= 1e-8 * scale);
  CHECK(velocity_row_residual(ev, alpha, s.v) <= 1e-8 * scale);
  CHECK(stats::mean(s.v) == doctest::Approx(stats::mean(ev)).epsilon(1e-10));
  Vec shifted = ev;
  for (double& x : shifted) x -= 1.25;
  auto t = effective_velocity_solve(shifted, alpha);
  for (std::size_t k = 0; k < ev.size(); ++k) CHECK(std::abs(t.v[k] - (s.v[k] - 1.25)) <= 1e-8);
  // Negative alpha goes through the mirror image.
  auto m = effective_velocity_solve(ev, -alpha);
  Vec neg = ev;
  for (double& x : neg) x = -x;
  auto r = effective_velocity_solve(neg, alpha);
  for (std::size_t k = 0; k < ev.size(); ++k) CHECK(m.v[k] == -r.v[k]);
  CHECK(velocity_row_residual(ev, -alpha, m.v) <= 1e-8 * scale);
}

TEST_CASE("velocity comparison") {
  VelocityField one{{0.3}, {0.3}, {0.3}, {true}};
  auto c1 = velocity_compare(one);
  CHECK(c1.perfect_sentinel);
  CHECK(c1.correlation == 1.0);
  VelocityField same{{1, 2, 3}, {0.5, 1.0, 1.5}, {0.5, 1.0, 1.5}, {true, true, true}};
  auto c2 = velocity_compare(same);
  CHECK(c2.correlation == doctest::Approx(1.0));
  CHECK(c2.rms_relative_error == 0.0);
  VelocityField noisy{{1, 2, 3, 4}, {0.5, 1.0, 1.5, 2.0}, {3.0, -2.0, 7.0, 0.0}, {true, false, true, true}};
  auto c3 = velocity_compare(noisy);
  CHECK(c3.count == 3);
  CHECK(std::isfinite(c3.correlation));
  CHECK(std::isfinite(c3.rms_relative_error));
}
