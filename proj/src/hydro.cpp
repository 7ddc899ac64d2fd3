#include "todalab/hydro.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "todalab/error.hpp"
#include "todalab/stats.hpp"

namespace toda {

double SpectralDensityEstimate::integral() const {
  double s = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) s += 0.5 * (grid[i] - grid[i - 1]) * (density[i] + density[i - 1]);
  return s;
}

SpectralDensityEstimate empirical_density(const Vec& eigenvalues, double bandwidth) {
  if (!(bandwidth > 0.0)) throw InvalidArgument("zero bandwidth");
  if (eigenvalues.size() < 16) throw InvalidArgument("density estimate needs at least 16 eigenvalues");
  auto [mn, mx] = std::minmax_element(eigenvalues.begin(), eigenvalues.end());
  const double lo = *mn - 3.0 * bandwidth, hi = *mx + 3.0 * bandwidth;
  const auto cells = static_cast<std::size_t>(std::ceil((hi - lo) / (bandwidth / 8.0)));
  SpectralDensityEstimate est;
  est.bandwidth = bandwidth;
  const double step = (hi - lo) / static_cast<double>(cells);
  const double norm = 1.0 / (static_cast<double>(eigenvalues.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t g = 0; g <= cells; ++g) {
    const double x = lo + step * static_cast<double>(g);
    double s = 0.0;
    for (double l : eigenvalues) {
      const double z = (x - l) / bandwidth;
      if (std::abs(z) < 40.0) s += std::exp(-0.5 * z * z);
    }
    est.grid.push_back(x);
    est.density.push_back(s * norm);
  }
  const double total = est.integral();
  for (double& d : est.density) d /= total;
  return est;
}

double density_l1_distance(const SpectralDensityEstimate& x, const SpectralDensityEstimate& y) {
  // Evaluate both on the finer grid by linear interpolation.
  const SpectralDensityEstimate& fine = x.grid.size() >= y.grid.size() ? x : y;
  const SpectralDensityEstimate& other = &fine == &x ? y : x;
  auto interp = [&](double t) {
    if (t <= other.grid.front() || t >= other.grid.back()) return 0.0;
    auto it = std::upper_bound(other.grid.begin(), other.grid.end(), t);
    std::size_t i = static_cast<std::size_t>(it - other.grid.begin());
    double w = (t - other.grid[i - 1]) / (other.grid[i] - other.grid[i - 1]);
    return (1.0 - w) * other.density[i - 1] + w * other.density[i];
  };
  double s = 0.0;
  for (std::size_t i = 1; i < fine.grid.size(); ++i) {
    double d0 = std::abs(fine.density[i - 1] - interp(fine.grid[i - 1]));
    double d1 = std::abs(fine.density[i] - interp(fine.grid[i]));
    s += 0.5 * (fine.grid[i] - fine.grid[i - 1]) * (d0 + d1);
  }
  return s;
}

double predicted_lyapunov(const Vec& eigenvalues, std::size_t k, double alpha) {
  double s = 0.0;
  for (std::size_t i = 0; i < eigenvalues.size(); ++i)
    if (i != k) s += std::log(std::abs(eigenvalues[k] - eigenvalues[i]));
  return -alpha / 2.0 - s / static_cast<double>(eigenvalues.size());
}

std::vector<LyapunovEntry> lyapunov_thouless_check(const LaxMatrix& L, const SpectralDecomposition& dec,
                                                   const LocalizationAssignment& assignment,
                                                   const ThermalParams& params, const std::vector<std::size_t>& ks,
                                                   std::size_t collar) {
  std::vector<LyapunovEntry> out;
  for (std::size_t k : ks) {
    LyapunovEntry e;
    e.k = k;
    DecayProfile p = decay_profile(L, dec, k, assignment, collar);
    e.fitted_infinite = std::isinf(p.rate);
    e.fitted = -p.rate;
    e.predicted = predicted_lyapunov(dec.eigenvalues, k, params.alpha);
    e.gap = e.fitted_infinite ? 0.0 : e.fitted - e.predicted;
    out.push_back(e);
  }
  return out;
}

namespace {

Eigen::MatrixXd velocity_matrix(const Vec& lam, double alpha) {
  const auto n = static_cast<Eigen::Index>(lam.size());
  const double w = 2.0 / (alpha * static_cast<double>(lam.size()));
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double diag = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == k) continue;
      const double gap = std::abs(lam[static_cast<std::size_t>(k)] - lam[static_cast<std::size_t>(i)]);
      if (gap == 0.0) throw NumericalError("coincident eigenvalues in the velocity system");
      const double l = w * std::log(gap);
      diag += l;
      A(k, i) = -l;
    }
    A(k, k) = diag;
  }
  return A;
}

}  // namespace

double velocity_row_residual(const Vec& eigenvalues, double alpha, const Vec& v) {
  const double sg = alpha > 0.0 ? 1.0 : -1.0;
  Vec lam = eigenvalues, vv = v;
  if (sg < 0.0) {
    for (double& x : lam) x = -x;
    for (double& x : vv) x = -x;
  }
  const Eigen::MatrixXd A = velocity_matrix(lam, std::abs(alpha));
  const Eigen::Map<const Eigen::VectorXd> x(vv.data(), static_cast<Eigen::Index>(vv.size()));
  const Eigen::Map<const Eigen::VectorXd> b(lam.data(), static_cast<Eigen::Index>(lam.size()));
  return (A * x - b).cwiseAbs().maxCoeff();
}

VelocitySolve effective_velocity_solve(const Vec& eigenvalues, double alpha) {
  if (alpha == 0.0) throw InvalidArgument("stretch parameter alpha is zero");
  if (eigenvalues.empty()) throw InvalidArgument("no eigenvalues");
  if (alpha < 0.0) {
    Vec mirrored = eigenvalues;
    for (double& x : mirrored) x = -x;
    VelocitySolve s = effective_velocity_solve(mirrored, -alpha);
    for (double& x : s.v) x = -x;
    return s;
  }
  const auto n = static_cast<Eigen::Index>(eigenvalues.size());
  const Eigen::MatrixXd A = velocity_matrix(eigenvalues, alpha);
  const Eigen::Map<const Eigen::VectorXd> b(eigenvalues.data(), n);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  const double rcond = lu.rcond();
  VelocitySolve out;
  out.condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(out.condition <= 1e12)) {
    throw NumericalError("velocity system ill-conditioned (condition estimate " + std::to_string(out.condition) + ")");
  }
  Eigen::VectorXd x = lu.solve(b);
  for (int it = 0; it < 3; ++it) {
    Eigen::VectorXd r = b - A * x;
    x += lu.solve(r);
  }
  out.v.assign(x.data(), x.data() + n);
  out.max_row_residual = (A * x - b).cwiseAbs().maxCoeff();
  return out;
}

VelocityComparison velocity_compare(const VelocityField& field) {
  VelocityComparison c;
  Vec s, e;
  for (std::size_t k = 0; k < field.solved.size(); ++k) {
    if (!field.bulk.empty() && !field.bulk[k]) continue;
    s.push_back(field.solved[k]);
    e.push_back(field.empirical[k]);
  }
  c.count = s.size();
  if (s.size() < 2) {
    c.perfect_sentinel = true;
    c.correlation = 1.0;
    c.rms_relative_error = s.empty() ? 0.0 : std::abs(e[0] - s[0]) / std::max(std::abs(s[0]), 1e-300);
    return c;
  }
  double diff2 = 0.0, ref2 = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    diff2 += (e[k] - s[k]) * (e[k] - s[k]);
    ref2 += s[k] * s[k];
  }
  c.rms_relative_error = ref2 > 0.0 ? std::sqrt(diff2 / ref2) : std::sqrt(diff2 / static_cast<double>(s.size()));
  const double vs = stats::sample_variance(s), ve = stats::sample_variance(e);
  if (vs == 0.0 || ve == 0.0) {
    c.perfect_sentinel = diff2 == 0.0;
    c.correlation = c.perfect_sentinel ? 1.0 : 0.0;
  } else {
    c.correlation = stats::correlation(s, e);
  }
  return c;
}

}  // namespace toda
