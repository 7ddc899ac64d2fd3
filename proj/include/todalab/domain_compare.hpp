#pragma once

#include <cstdint>
#include <vector>

#include "todalab/thermal.hpp"

namespace toda {

struct ComparisonMetrics {
  long lo = 0;
  long hi = 0;
  Vec times;
  // Running sup of max|a - a~| + max|b - b~| over the window.
  Vec G;
  // 6 x running sup of max|a| + max|a~| + max|b| + max|b~| over the window.
  Vec H;
};

// Window [lo, hi] is in the site labels of A; site x of A is site x + b_shift of B.
ComparisonMetrics overlap_divergence(const Trajectory& A, const Trajectory& B, long lo, long hi, long b_shift = 0);

struct CoupledPair {
  FlaschkaState open;
  FlaschkaState torus;
};

// Open interval of N sites and a torus sharing every draw; the torus gets one
// extra a entry closing the loop.
CoupledPair coupled_open_torus(const ThermalParams& p, std::size_t n, RngStream& rng);

struct DecayRow {
  long K = 0;
  double median = 0.0;
  Vec per_replica;
};

struct DecayTable {
  std::vector<DecayRow> rows;
  double fitted_rate = 0.0;
  double fit_r2 = 0.0;
  std::size_t fit_points = 0;
  // Medians below this level are rounding noise and are left out of the fit.
  double fit_floor = 1e-13;
};

DecayTable open_vs_periodic(const ThermalParams& p, std::size_t n, double T, const std::vector<long>& K_grid,
                            std::size_t replicas, std::uint64_t seed, const IntegratorConfig& cfg,
                            std::uint64_t first_replica = 0);

// Fit log(median) = c - rate K over rows with median >= floor.
void fit_decay(DecayTable& table);

}  // namespace toda
