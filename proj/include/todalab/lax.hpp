#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "todalab/lattice.hpp"

namespace toda {

// Symmetric tridiagonal Lax matrix, plus the corner coupling on a torus.
// offdiag[i] couples storage indices i and i+1 and has length N-1.
struct LaxMatrix {
  DomainSpec domain;
  Vec diag;
  Vec offdiag;
  std::optional<double> corner;

  std::size_t size() const { return diag.size(); }
  // Entry by storage index.
  double entry(std::size_t i, std::size_t j) const;
  // M_{k,k+1} by site; zero past either end of an open interval.
  double coupling(long site) const;
  Eigen::MatrixXd dense() const;
};

LaxMatrix build_lax(const FlaschkaState& f);
// Open tridiagonal matrix on sites first..first+N-1.
LaxMatrix make_tridiagonal(Vec diag, Vec offdiag, long first = 0);

// Eigenvalues descending; column k of `vectors` is the unit eigenvector u_k,
// oriented so that its first nonzero entry is positive.
struct SpectralDecomposition {
  DomainSpec domain = DomainSpec::open(0, 0);
  Vec eigenvalues;
  Eigen::MatrixXd vectors;

  std::size_t size() const { return eigenvalues.size(); }
  double u(std::size_t k, long site) const { return vectors(static_cast<Eigen::Index>(domain.index(site)), static_cast<Eigen::Index>(k)); }
};

SpectralDecomposition eig_tridiag(const LaxMatrix& L);
// Eigenvalues only, descending.
Vec eigenvalues(const LaxMatrix& L);

LaxMatrix principal_submatrix(const LaxMatrix& L, long k, long l);
LaxMatrix zero_out(const LaxMatrix& L, const std::vector<long>& sites);

struct TransferMatrix2 {
  double m[2][2] = {{1.0, 0.0}, {0.0, 1.0}};

  TransferMatrix2 operator*(const TransferMatrix2& o) const;
  std::pair<double, double> apply(double x0, double x1) const;
  double det() const { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }
};

TransferMatrix2 transfer_matrix(const LaxMatrix& L, long k, double E);
// S_j ... S_i for the sites i..j of an open matrix.
TransferMatrix2 transfer_product(const LaxMatrix& L, long i, long j, double E);
// The same product written through eigenvalues of principal submatrices.
TransferMatrix2 transfer_product_spectral(const LaxMatrix& L, long i, long j, double E);

// log|u_k(i)| for every storage index i. Entries too small to be resolved by
// the eigensolver are rebuilt by the three-term recurrence run in log space
// from the end of the block towards the peak. Exact zeros outside the block
// of the eigenvector are -inf. `guarded` reports whether any entry fell below
// the smallest normal double.
Vec eigvec_log_profile(const LaxMatrix& L, const SpectralDecomposition& dec, std::size_t k,
                       bool* guarded = nullptr);

struct ThoulessReport {
  Vec residuals;
  double max_residual = 0.0;
  bool underflow_guarded = false;
};

ThoulessReport thouless_identity_residual(const LaxMatrix& L);
ThoulessReport thouless_identity_residual(const LaxMatrix& L, const SpectralDecomposition& dec);

struct SpectralDiagnostics {
  double min_gap = 0.0;
  double max_abs_entry = 0.0;
  double max_abs_eigenvalue = 0.0;
};

SpectralDiagnostics spectral_diagnostics(const LaxMatrix& L);
SpectralDiagnostics spectral_diagnostics(const LaxMatrix& L, const Vec& eigenvalues);
double min_gap(const Vec& sorted_desc);

}  // namespace toda
