#pragma once

#include <vector>

#include "todalab/lax.hpp"

namespace toda {

// phi[k] is the centre site of eigenvector k; witness[k] = |u_k(phi[k])|.
struct LocalizationAssignment {
  double zeta = 0.0;
  std::vector<long> phi;
  Vec witness;

  std::size_t size() const { return phi.size(); }
};

double default_zeta(std::size_t n);

// Sites i with |u_j(i)| >= zeta.
std::vector<long> centers(const SpectralDecomposition& dec, std::size_t j, double zeta);

// Perfect matching between eigenvalue indices and sites along edges
// |u_j(i)| >= zeta, improved towards a large sum of log witnesses.
LocalizationAssignment center_bijection(const SpectralDecomposition& dec, double zeta);

struct DecayProfile {
  long center = 0;
  double rate = 0.0;  // +inf when every entry outside the collar is an exact zero
  double residual = 0.0;
  double floor_fraction = 0.0;
  std::size_t points = 0;
};

// ceil((log N)^2 / 2)
std::size_t default_decay_collar(std::size_t n);

// Least-squares fit of log|u_j(i)| = c0 - rate |i - phi_j| over sites outside
// the collar.
DecayProfile decay_profile(const LaxMatrix& L, const SpectralDecomposition& dec, std::size_t j,
                           const LocalizationAssignment& assignment, std::size_t collar);

struct CenterTrack {
  Vec times;
  std::vector<LocalizationAssignment> assignments;
  // max_j |phi_{s+1}(j) - phi_s(j)| for each consecutive pair of samples.
  std::vector<long> step_displacement;
  // max over samples and j of |phi_s(j) - phi_0(j)|.
  long max_displacement = 0;
  // For each eigenvalue, the largest distance between two of its zeta-centres
  // at any sample.
  std::vector<long> center_spread;
  double max_eigen_drift = 0.0;
  double min_gap = 0.0;
};

CenterTrack track_centers(const Trajectory& traj, double zeta);
CenterTrack track_centers(const std::vector<SpectralDecomposition>& decs, const Vec& times, double zeta);

struct TruncationMatch {
  double mu = 0.0;
  double lambda = 0.0;
  double gap = 0.0;
  long center_mu = 0;
  long center_lambda = 0;
  bool ambiguous = false;
};

// Eigenvalues of L with row and column ell removed whose centre lies at
// distance >= dist_min from ell, each paired with the nearest eigenvalue of L.
std::vector<TruncationMatch> truncation_eigen_match(const LaxMatrix& L, long ell, double zeta, long dist_min);

}  // namespace toda
