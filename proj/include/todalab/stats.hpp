#pragma once

#include <cstddef>
#include <vector>

namespace toda::stats {

using Vec = std::vector<double>;

double mean(const Vec& v);
double sample_variance(const Vec& v);
double standard_error(const Vec& v);
double median(Vec v);
// Linear-interpolated quantile, p in [0, 1].
double quantile(Vec v, double p);
double iqr(const Vec& v);
double correlation(const Vec& x, const Vec& y);

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
};

LineFit fit_line(const Vec& x, const Vec& y);
// y ~ slope * x. r2 is measured against the centred total sum of squares.
LineFit fit_through_origin(const Vec& x, const Vec& y);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
KsResult ks_two_sample(Vec x, Vec y);
// Survival function of the Kolmogorov distribution.
double kolmogorov_sf(double lambda);

}  // namespace toda::stats
