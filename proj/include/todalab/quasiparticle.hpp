#pragma once

#include <vector>

#include "todalab/localization.hpp"

namespace toda {

// Q_j = q at the centre site of eigenvalue j.
Vec quasiparticle_positions(const LocalizationAssignment& assignment, const TodaState& state);

struct QuasiparticleTrack {
  double lambda = 0.0;
  Vec positions;
  std::vector<long> sites;
  bool bulk = false;
};

// Sites excluded at each end: max(ceil(fraction N), ceil(T log N)) when the
// latter stays below N / 4, otherwise ceil(fraction N).
std::size_t bulk_collar(std::size_t n, double T, double fraction = 0.1);
bool in_bulk(const DomainSpec& d, long site, std::size_t collar);

std::vector<QuasiparticleTrack> quasiparticle_tracks(const Trajectory& traj, const CenterTrack& track,
                                                     const Vec& lambdas, std::size_t collar);

struct ChargeCurrentField {
  int m = 0;
  Vec charges;
  Vec currents;
};

// [L^m]_{ii}
double local_charge(const LaxMatrix& L, long i, int m);
// a_{i-1} [L^m]_{i,i-1}; zero at the left end of an open interval.
double local_current(const LaxMatrix& L, long i, int m);
ChargeCurrentField charge_current_field(const LaxMatrix& L, int m);

// max over interior samples of |dk_i/dt - (j_i - j_{i+1})|, with the time
// derivative taken by three-point central differences.
double charge_continuity_residual(const Trajectory& traj, long i, int m);
// max over samples and sites of |db_i/dt - (j_i - j_{i+1})| for m = 1, with
// the derivative from the equations of motion.
double first_charge_symbolic_residual(const Trajectory& traj);

struct WindowSums {
  double charge_sum = 0.0;
  double eig_sum = 0.0;
  double residual = 0.0;
  // residual / sum of |k_i| over the window
  double relative = 0.0;
  std::size_t particles = 0;
  std::size_t quasiparticles = 0;
};

// Window J = [lo, hi] in position space.
WindowSums charge_window_vs_eigsum(const TodaState& state, const LaxMatrix& L, const SpectralDecomposition& dec,
                                   const LocalizationAssignment& assignment, double lo, double hi, int m);

struct FluxBalance {
  double integrated_current = 0.0;
  double left_now = 0.0;
  double left_initial = 0.0;
  double residual = 0.0;
  bool under_resolved = false;
};

// Integral of j_k over the trajectory (trapezoid) plus the change of the
// eigenvalue mass whose centre lies left of site k.
FluxBalance integrated_current_vs_flux(const Trajectory& traj, const CenterTrack& track, const Vec& lambdas,
                                       long k_site, int m);

struct MoserReport {
  // max over samples of |2 log|u_k(N1;t)| - closed form|, per eigenvalue.
  Vec residuals;
  // c(t) per sample, and |q_{N1}(0) - q_{N1}(t) - c(t)|.
  Vec c_t;
  Vec position_residuals;
  double max_residual = 0.0;
};

MoserReport moser_first_entry_check(const Trajectory& traj, const std::vector<SpectralDecomposition>& decs);

struct DecayRelation {
  double log_u = 0.0;
  double sum_log_a = 0.0;
  double sum_log_gaps = 0.0;
  // log_u - sum_log_a + sum_log_gaps
  double residual = 0.0;
};

// Left-edge relation for log|u_k(N1)| and its mirror for log|u_k(N2)|.
DecayRelation eigvec_decay_relation_residual(const LaxMatrix& L, const SpectralDecomposition& dec,
                                             const LocalizationAssignment& assignment, std::size_t k);
DecayRelation eigvec_decay_relation_residual_right(const LaxMatrix& L, const SpectralDecomposition& dec,
                                                   const LocalizationAssignment& assignment, std::size_t k);

struct ScatteringEntry {
  std::size_t k = 0;
  double lambda = 0.0;
  double q0 = 0.0;
  double qt = 0.0;
  double residual = 0.0;
  double normalized = 0.0;
  bool bulk = false;
  bool tie = false;
};

struct ScatteringReport {
  std::vector<ScatteringEntry> entries;
  double t = 0.0;
  double displacement_scale = 0.0;
  std::size_t collar = 0;
  double median_normalized_bulk = 0.0;
  double max_abs_bulk = 0.0;
  std::size_t bulk_count = 0;
};

// sum over i with (Q_i, site_i) < (Q_k, site_k) of log|lambda_k - lambda_i|.
// `tie` is raised when some Q_i lies within 1e-12 of Q_k.
double ordered_log_sum(const Vec& Q, const std::vector<long>& sites, const Vec& lambda, std::size_t k, bool* tie);

double scattering_residual(const Vec& Q0, const std::vector<long>& sites0, const Vec& Qt,
                           const std::vector<long>& sitest, const Vec& lambda, double t, double alpha,
                           std::size_t k, bool* tie = nullptr);

ScatteringReport scattering_report(const Vec& Q0, const std::vector<long>& sites0, const Vec& Qt,
                                   const std::vector<long>& sitest, const Vec& lambda, double t, double alpha,
                                   const DomainSpec& domain, std::size_t collar);

}  // namespace toda
