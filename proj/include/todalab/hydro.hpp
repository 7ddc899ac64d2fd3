#pragma once

#include <vector>

#include "todalab/quasiparticle.hpp"
#include "todalab/thermal.hpp"

namespace toda {

struct SpectralDensityEstimate {
  Vec grid;
  Vec density;
  double bandwidth = 0.0;

  // Trapezoid integral of the density over the grid.
  double integral() const;
};

// Gaussian kernel estimate on a uniform grid covering
// [min - 3 bw, max + 3 bw] with spacing at most bw / 8, normalised so that
// its trapezoid integral is 1.
SpectralDensityEstimate empirical_density(const Vec& eigenvalues, double bandwidth);
double density_l1_distance(const SpectralDensityEstimate& x, const SpectralDensityEstimate& y);

struct LyapunovEntry {
  std::size_t k = 0;
  double fitted = 0.0;
  double predicted = 0.0;
  double gap = 0.0;
  bool fitted_infinite = false;
};

// Predicted exponent -alpha/2 - (1/N) sum_{i != k} log|lambda_k - lambda_i|
// against minus the fitted decay rate of u_k.
std::vector<LyapunovEntry> lyapunov_thouless_check(const LaxMatrix& L, const SpectralDecomposition& dec,
                                                   const LocalizationAssignment& assignment,
                                                   const ThermalParams& params, const std::vector<std::size_t>& ks,
                                                   std::size_t collar);
double predicted_lyapunov(const Vec& eigenvalues, std::size_t k, double alpha);

struct VelocitySolve {
  Vec v;
  double condition = 0.0;
  double max_row_residual = 0.0;
};

// Solves v_k (1 + c_k) - (2 / (alpha N)) sum_{i != k} l_ki v_i = lambda_k with
// l_ki = log|lambda_k - lambda_i| and c_k = (2 / (alpha N)) sum_{i != k} l_ki.
// Negative alpha is handled by the reflection lambda -> -lambda.
VelocitySolve effective_velocity_solve(const Vec& eigenvalues, double alpha);
// Largest row residual of the defining system for a given v.
double velocity_row_residual(const Vec& eigenvalues, double alpha, const Vec& v);

struct VelocityField {
  Vec lambda;
  Vec solved;
  Vec empirical;
  std::vector<bool> bulk;
};

struct VelocityComparison {
  double correlation = 1.0;
  double rms_relative_error = 0.0;
  std::size_t count = 0;
  bool perfect_sentinel = false;
};

VelocityComparison velocity_compare(const VelocityField& field);

}  // namespace toda
