#include "todalab/stats.hpp"

#include <algorithm>
#include <cmath>
// bivariate_statistics.hpp in Boost 1.74 calls unqualified sqrt.
using std::sqrt;
#include <boost/math/statistics/bivariate_statistics.hpp>
#include <boost/math/statistics/linear_regression.hpp>
#include <boost/math/statistics/univariate_statistics.hpp>
#include <cmath>

#include "todalab/error.hpp"

namespace toda::stats {

namespace bs = boost::math::statistics;

double mean(const Vec& v) {
  if (v.empty()) throw InvalidArgument("mean of empty sample");
  return bs::mean(v);
}

double sample_variance(const Vec& v) {
  if (v.size() < 2) throw InvalidArgument("variance needs two samples");
  return bs::sample_variance(v);
}

double standard_error(const Vec& v) {
  return std::sqrt(sample_variance(v) / static_cast<double>(v.size()));
}

double median(Vec v) {
  if (v.empty()) throw InvalidArgument("median of empty sample");
  return bs::median(v);
}

double quantile(Vec v, double p) {
  if (v.empty()) throw InvalidArgument("quantile of empty sample");
  std::sort(v.begin(), v.end());
  double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  double w = pos - static_cast<double>(lo);
  return (1.0 - w) * v[lo] + w * v[hi];
}

double iqr(const Vec& v) { return quantile(v, 0.75) - quantile(v, 0.25); }

double correlation(const Vec& x, const Vec& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("correlation needs paired samples");
  return bs::correlation_coefficient(x, y);
}

LineFit fit_line(const Vec& x, const Vec& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("line fit needs paired samples");
  auto [c0, c1, r2] = bs::simple_ordinary_least_squares_with_R_squared(x, y);
  return {c0, c1, r2};
}

LineFit fit_through_origin(const Vec& x, const Vec& y) {
  if (x.size() != y.size() || x.empty()) throw InvalidArgument("line fit needs paired samples");
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
  }
  if (sxx == 0.0) throw InvalidArgument("line fit needs a nonzero regressor");
  double slope = sxy / sxx;
  double my = mean(y);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ss_res += (y[i] - slope * x[i]) * (y[i] - slope * x[i]);
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  double r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
  return {0.0, slope, r2};
}

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-300) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

KsResult ks_two_sample(Vec x, Vec y) {
  if (x.empty() || y.empty()) throw InvalidArgument("KS test needs nonempty samples");
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n1 = static_cast<double>(x.size());
  const double n2 = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2));
  }
  double en = std::sqrt(n1 * n2 / (n1 + n2));
  double p = d == 0.0 ? 1.0 : kolmogorov_sf((en + 0.12 + 0.11 / en) * d);
  return {d, p, x.size(), y.size()};
}

}  // namespace toda::stats
