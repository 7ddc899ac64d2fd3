#include <doctest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "todalab/error.hpp"
#include "todalab/stats.hpp"
#include "todalab/thermal.hpp"

using namespace toda;

namespace {
// Frozen values of the digamma function (mpmath, 30 digits).
constexpr double kEulerGamma = 0.577215664901532860606512090082;
constexpr double kPsiHalf = -1.96351002602142347944097633299;
constexpr double kPsiTen = 2.25175258906672110764745616389;
}  // namespace

TEST_CASE("digamma against frozen values") {
  CHECK(digamma(1.0) == doctest::Approx(-kEulerGamma).epsilon(1e-14));
  CHECK(digamma(2.0) == doctest::Approx(1.0 - kEulerGamma).epsilon(1e-14));
  CHECK(digamma(0.5) == doctest::Approx(kPsiHalf).epsilon(1e-14));
  CHECK(digamma(10.0) == doctest::Approx(kPsiTen).epsilon(1e-14));
}

TEST_CASE("digamma recurrence") {
  for (double x = 0.1; x <= 10.0; x += 0.137) CHECK(std::abs(digamma(x + 1.0) - digamma(x) - 1.0 / x) <= 1e-12);
}

TEST_CASE("stretch parameter") {
  CHECK(stretch_parameter(1.0, 1.0) == doctest::Approx(kEulerGamma).epsilon(1e-14));
  CHECK(stretch_parameter(std::exp(1.0), 1.0) == doctest::Approx(1.0 + kEulerGamma).epsilon(1e-14));
  CHECK(stretch_parameter(1.0, 2.0) == doctest::Approx(kEulerGamma - 1.0).epsilon(1e-14));
  CHECK_THROWS_AS(ThermalParams::make(-1.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(ThermalParams::make(1.0, 0.0), InvalidArgument);
  ThermalParams p{1.0, 1.0, 0.0};
  CHECK_THROWS_AS(p.require_nonzero_alpha(), InvalidArgument);
  CHECK_NOTHROW(ThermalParams::make(1.0, 1.0).require_nonzero_alpha());
}

TEST_CASE("rng streams are reproducible and distinct") {
  RngStream a(7, 3), b(7, 3), c(7, 4);
  double da = a.normal(0, 1), db = b.normal(0, 1), dc = c.normal(0, 1);
  CHECK(da == db);
  CHECK(da != dc);
  auto p = ThermalParams::make(1.3, 0.8);
  RngStream x(9, 0), y(9, 0);
  auto fx = sample_open(p, 50, x), fy = sample_open(p, 50, y);
  CHECK(fx.a == fy.a);
  CHECK(fx.b == fy.b);
}

TEST_CASE("thermal moments") {
  const double beta = 2.0, theta = 1.5;
  auto p = ThermalParams::make(beta, theta);
  RngStream rng(42, 0);
  const std::size_t n = 100000;
  Vec a2(n), b(n), r(n);
  for (std::size_t i = 0; i < n; ++i) {
    double a = sample_a(p, rng);
    a2[i] = a * a;
    r[i] = -2.0 * std::log(a);
    b[i] = sample_b(p, rng);
  }
  CHECK(std::abs(stats::mean(a2) - theta / beta) <= 3.0 * stats::standard_error(a2));
  CHECK(std::abs(stats::mean(b)) <= 3.0 * stats::standard_error(b));
  CHECK(std::abs(stats::mean(r) - p.alpha) <= 3.0 * stats::standard_error(r));
  // Variance of the sample variance for a Gaussian: 2 sigma^4 / (n - 1).
  const double var_se = std::sqrt(2.0 / (n - 1.0)) / beta;
  CHECK(std::abs(stats::sample_variance(b) - 1.0 / beta) <= 3.0 * var_se);
}

TEST_CASE("gamma sampler matches the Gamma cdf") {
  const double beta = 1.7, theta = 0.6;
  auto p = ThermalParams::make(beta, theta);
  RngStream rng(5, 5);
  const std::size_t n = 100000;
  Vec x(n);
  for (double& v : x) {
    double a = sample_a(p, rng);
    v = a * a;
  }
  std::sort(x.begin(), x.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double F = boost::math::gamma_p(theta, beta * x[i]);
    d = std::max({d, std::abs(F - static_cast<double>(i) / n), std::abs(F - static_cast<double>(i + 1) / n)});
  }
  CHECK(stats::kolmogorov_sf(d * std::sqrt(static_cast<double>(n))) > 0.01);
}

TEST_CASE("samplers") {
  auto p = ThermalParams::make(1.0, 1.0);
  RngStream rng(1, 1);
  auto f = sample_open(p, 9, rng);
  CHECK(f.domain.first_site() == -4);
  CHECK(f.a.back() == 0.0);
  for (std::size_t i = 0; i + 1 < 9; ++i) CHECK(f.a[i] > 0.0);
  auto t = sample_periodic(p, 9, rng);
  CHECK(t.domain.is_torus());
  double ups = 0.0;
  for (double a : t.a) {
    CHECK(a > 0.0);
    ups -= 2.0 * std::log(a);
  }
  CHECK(std::isfinite(t.domain.upsilon()));
  CHECK(t.domain.upsilon() == doctest::Approx(ups).epsilon(1e-14));
}

TEST_CASE("spacing statistics") {
  Vec q(50);
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = 0.7 * static_cast<double>(i);
  auto s = spacing_statistics(q, 0.7, {1, 5, 20});
  CHECK(s.max_deviation == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.mean_deviation == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.pairs == 49 + 45 + 30);
}

TEST_CASE("invariance test") {
  auto p = ThermalParams::make(1.0, 1.0);
  IntegratorConfig cfg;
  auto zero = invariance_test(p, 16, 0.0, 10, 3, cfg);
  CHECK(zero.a.statistic == 0.0);
  CHECK(zero.b.statistic == 0.0);
  auto rep = invariance_test(p, 64, 10.0, 200, 1, cfg);
  CHECK(rep.a.p_value > 0.01);
  CHECK(rep.b.p_value > 0.01);
  auto ctl = invariance_test(p, 64, 10.0, 200, 1, cfg, 1.0);
  CHECK(ctl.b.p_value < 1e-6);
}

TEST_CASE("ks two-sample against a hand-computed case") {
  // D = 1/2 for these samples; p from the Kolmogorov series with the Stephens correction.
  auto r = stats::ks_two_sample({1, 2, 3, 4}, {3.5, 4.5, 5.5, 6.5});
  CHECK(r.statistic == doctest::Approx(0.75));
  CHECK(stats::kolmogorov_sf(0.0) == 1.0);
  // Q_KS(1) = 0.26999967167735456 (closed-form series).
  CHECK(stats::kolmogorov_sf(1.0) == doctest::Approx(0.26999967167735456).epsilon(1e-12));
  CHECK(stats::kolmogorov_sf(10.0) < 1e-80);
}

TEST_CASE("stats helpers") {
  CHECK(stats::median({3, 1, 2}) == 2.0);
  CHECK(stats::median({4, 1, 2, 3}) == 2.5);
  CHECK(stats::iqr({1, 2, 3, 4, 5}) == doctest::Approx(2.0));
  auto f = stats::fit_line({0, 1, 2, 3}, {1, 3, 5, 7});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r2 == doctest::Approx(1.0));
  auto o = stats::fit_through_origin({1, 2, 3}, {2, 4, 6});
  CHECK(o.slope == doctest::Approx(2.0));
  CHECK(o.r2 == doctest::Approx(1.0));
  CHECK(stats::correlation({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
}
