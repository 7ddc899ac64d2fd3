#include "todalab/lax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "todalab/error.hpp"

namespace toda {

namespace {

constexpr double kDirectFloor = 1e-4;

struct Block {
  std::size_t start;
  std::size_t end;  // inclusive
};

std::vector<Block> split_blocks(const LaxMatrix& L) {
  std::vector<Block> blocks;
  const std::size_t n = L.size();
  std::size_t s = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (L.offdiag[i] == 0.0) {
      blocks.push_back({s, i});
      s = i + 1;
    }
  }
  blocks.push_back({s, n - 1});
  return blocks;
}

// Forward recurrence from the block start: returns log|f(i)| and sign f(i) for
// i in [start, stop], with f(start) = 1 and f(start - 1) = 0.
void forward_log(const LaxMatrix& L, double lambda, std::size_t start, std::size_t stop, Vec& logf,
                 std::vector<int>& sign) {
  double prev = 0.0, cur = 1.0, scale = 0.0;
  for (std::size_t i = start; i <= stop; ++i) {
    logf[i] = (cur == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(std::abs(cur))) + scale;
    sign[i] = cur > 0.0 ? 1 : (cur < 0.0 ? -1 : 0);
    if (i == stop) break;
    double left = i > start ? L.offdiag[i - 1] : 0.0;
    double next = ((lambda - L.diag[i]) * cur - left * prev) / L.offdiag[i];
    prev = cur;
    cur = next;
    double m = std::max(std::abs(prev), std::abs(cur));
    if (m > 1e100 || (m < 1e-100 && m > 0.0)) {
      prev /= m;
      cur /= m;
      scale += std::log(m);
    }
  }
}

// Backward recurrence from the block end, g(end) = 1 and g(end + 1) = 0.
void backward_log(const LaxMatrix& L, double lambda, std::size_t stop, std::size_t end, Vec& logg) {
  double prev = 0.0, cur = 1.0, scale = 0.0;
  for (std::size_t i = end;; --i) {
    logg[i] = (cur == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(std::abs(cur))) + scale;
    if (i == stop) break;
    double right = i < end ? L.offdiag[i] : 0.0;
    double next = ((lambda - L.diag[i]) * cur - right * prev) / L.offdiag[i - 1];
    prev = cur;
    cur = next;
    double m = std::max(std::abs(prev), std::abs(cur));
    if (m > 1e100 || (m < 1e-100 && m > 0.0)) {
      prev /= m;
      cur /= m;
      scale += std::log(m);
    }
  }
}

std::size_t argmax_abs(const Eigen::MatrixXd& v, Eigen::Index col, std::size_t lo, std::size_t hi) {
  std::size_t best = lo;
  for (std::size_t i = lo; i <= hi; ++i)
    if (std::abs(v(static_cast<Eigen::Index>(i), col)) > std::abs(v(static_cast<Eigen::Index>(best), col)))
      best = i;
  return best;
}

Block block_of(const std::vector<Block>& blocks, std::size_t i) {
  for (const auto& b : blocks)
    if (i >= b.start && i <= b.end) return b;
  return blocks.back();
}

}  // namespace

double LaxMatrix::entry(std::size_t i, std::size_t j) const {
  const std::size_t n = size();
  double v = 0.0;
  if (i == j) v += diag[i];
  if (i + 1 == j || j + 1 == i) v += offdiag[std::min(i, j)];
  if (corner && ((i == 0 && j == n - 1) || (j == 0 && i == n - 1))) v += *corner * (n == 1 ? 2.0 : 1.0);
  return v;
}

double LaxMatrix::coupling(long site) const {
  if (domain.is_torus()) {
    std::size_t i = domain.index(site);
    return i + 1 < size() ? offdiag[i] : corner.value_or(0.0);
  }
  if (site < domain.first_site() || site >= domain.last_site()) return 0.0;
  return offdiag[domain.index(site)];
}

Eigen::MatrixXd LaxMatrix::dense() const {
  const auto n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) = diag[static_cast<std::size_t>(i)];
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    m(i, i + 1) += offdiag[static_cast<std::size_t>(i)];
    m(i + 1, i) += offdiag[static_cast<std::size_t>(i)];
  }
  if (corner) {
    m(0, n - 1) += *corner;
    m(n - 1, 0) += *corner;
  }
  return m;
}

LaxMatrix build_lax(const FlaschkaState& f) {
  const std::size_t n = f.domain.size();
  LaxMatrix L{f.domain, f.b, Vec(f.a.begin(), f.a.begin() + static_cast<long>(n - 1)), std::nullopt};
  if (f.domain.is_torus()) L.corner = f.a[n - 1];
  return L;
}

LaxMatrix make_tridiagonal(Vec diag, Vec offdiag, long first) {
  if (diag.empty() || offdiag.size() + 1 != diag.size())
    throw InvalidArgument("tridiagonal matrix needs N diagonal and N-1 off-diagonal entries");
  auto n = static_cast<long>(diag.size());
  return {DomainSpec::open(first, first + n - 1), std::move(diag), std::move(offdiag), std::nullopt};
}

SpectralDecomposition eig_tridiag(const LaxMatrix& L) {
  const std::size_t n = L.size();
  SpectralDecomposition dec;
  dec.domain = L.domain;
  Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Vec vals(n);

  if (L.corner) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L.dense());
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver did not converge on the torus matrix");
    raw = es.eigenvectors();
    for (std::size_t i = 0; i < n; ++i) vals[i] = es.eigenvalues()(static_cast<Eigen::Index>(i));
  } else {
    std::size_t col = 0;
    for (const Block& b : split_blocks(L)) {
      const auto m = static_cast<Eigen::Index>(b.end - b.start + 1);
      const auto s0 = static_cast<Eigen::Index>(b.start);
      if (m == 1) {
        vals[col] = L.diag[b.start];
        raw(s0, static_cast<Eigen::Index>(col)) = 1.0;
        ++col;
        continue;
      }
      Eigen::VectorXd d(m), e(m - 1);
      for (Eigen::Index i = 0; i < m; ++i) d(i) = L.diag[b.start + static_cast<std::size_t>(i)];
      for (Eigen::Index i = 0; i + 1 < m; ++i) e(i) = L.offdiag[b.start + static_cast<std::size_t>(i)];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
      es.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
      if (es.info() != Eigen::Success) {
        std::ostringstream os;
        os << "eigensolver did not converge on block [" << L.domain.site(b.start) << ","
           << L.domain.site(b.end) << "]";
        throw NumericalError(os.str());
      }
      for (Eigen::Index k = 0; k < m; ++k) {
        vals[col] = es.eigenvalues()(k);
        raw.block(s0, static_cast<Eigen::Index>(col), m, 1) = es.eigenvectors().col(k);
        ++col;
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return vals[x] > vals[y]; });
  dec.eigenvalues.resize(n);
  dec.vectors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    dec.eigenvalues[k] = vals[order[k]];
    dec.vectors.col(static_cast<Eigen::Index>(k)) = raw.col(static_cast<Eigen::Index>(order[k]));
  }

  // Orientation. On an open matrix the first entry of the block is never zero
  // in exact arithmetic but may be far below rounding, so its sign is read off
  // the recurrence started at the block end.
  const auto blocks = split_blocks(L);
  Vec logf(n);
  std::vector<int> sgn(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    int orient = 1;
    if (!L.corner) {
      std::size_t c = argmax_abs(dec.vectors, col, 0, n - 1);
      Block b = block_of(blocks, c);
      forward_log(L, dec.eigenvalues[k], b.start, c, logf, sgn);
      double uc = dec.vectors(static_cast<Eigen::Index>(c), col);
      orient = (uc > 0.0 ? 1 : -1) * (sgn[c] >= 0 ? 1 : -1);
    } else {
      double tol = 1e-12 * dec.vectors.col(col).cwiseAbs().maxCoeff();
      for (std::size_t i = 0; i < n; ++i) {
        double v = dec.vectors(static_cast<Eigen::Index>(i), col);
        if (std::abs(v) > tol) {
          orient = v > 0.0 ? 1 : -1;
          break;
        }
      }
    }
    if (orient < 0) dec.vectors.col(col) *= -1.0;
  }
  return dec;
}

Vec eigenvalues(const LaxMatrix& L) {
  Vec vals;
  vals.reserve(L.size());
  if (L.corner) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L.dense(), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver did not converge on the torus matrix");
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) vals.push_back(es.eigenvalues()(i));
  } else {
    for (const Block& b : split_blocks(L)) {
      const auto m = static_cast<Eigen::Index>(b.end - b.start + 1);
      if (m == 1) {
        vals.push_back(L.diag[b.start]);
        continue;
      }
      Eigen::VectorXd d(m), e(m - 1);
      for (Eigen::Index i = 0; i < m; ++i) d(i) = L.diag[b.start + static_cast<std::size_t>(i)];
      for (Eigen::Index i = 0; i + 1 < m; ++i) e(i) = L.offdiag[b.start + static_cast<std::size_t>(i)];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
      es.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
      if (es.info() != Eigen::Success) throw NumericalError("eigensolver did not converge");
      for (Eigen::Index i = 0; i < m; ++i) vals.push_back(es.eigenvalues()(i));
    }
  }
  std::sort(vals.begin(), vals.end(), std::greater<>());
  return vals;
}

LaxMatrix principal_submatrix(const LaxMatrix& L, long k, long l) {
  if (k > l) throw InvalidArgument("empty restriction");
  if (!L.domain.contains(k) || !L.domain.contains(l)) throw InvalidArgument("restriction outside the domain");
  const std::size_t i0 = L.domain.index(k), i1 = L.domain.index(l);
  Vec d(L.diag.begin() + static_cast<long>(i0), L.diag.begin() + static_cast<long>(i1) + 1);
  Vec e(L.offdiag.begin() + static_cast<long>(i0), L.offdiag.begin() + static_cast<long>(i1));
  LaxMatrix P = make_tridiagonal(std::move(d), std::move(e), k);
  if (L.domain.is_torus() && i0 == 0 && i1 + 1 == L.size()) P.corner = L.corner, P.domain = L.domain;
  return P;
}

LaxMatrix zero_out(const LaxMatrix& L, const std::vector<long>& sites) {
  LaxMatrix Z = L;
  const std::size_t n = L.size();
  for (long s : sites) {
    std::size_t i = L.domain.index(s);
    Z.diag[i] = 0.0;
    if (i > 0) Z.offdiag[i - 1] = 0.0;
    if (i + 1 < n) Z.offdiag[i] = 0.0;
    if (Z.corner && (i == 0 || i + 1 == n)) Z.corner = 0.0;
  }
  return Z;
}

TransferMatrix2 TransferMatrix2::operator*(const TransferMatrix2& o) const {
  TransferMatrix2 r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r.m[i][j] = m[i][0] * o.m[0][j] + m[i][1] * o.m[1][j];
  return r;
}

std::pair<double, double> TransferMatrix2::apply(double x0, double x1) const {
  return {m[0][0] * x0 + m[0][1] * x1, m[1][0] * x0 + m[1][1] * x1};
}

TransferMatrix2 transfer_matrix(const LaxMatrix& L, long k, double E) {
  const double right = L.coupling(k);
  if (right == 0.0) throw InvalidArgument("transfer matrix undefined");
  const double left = L.coupling(k - 1);
  TransferMatrix2 S;
  S.m[0][0] = 0.0;
  S.m[0][1] = 1.0;
  S.m[1][0] = -left / right;
  S.m[1][1] = (E - L.diag[L.domain.index(k)]) / right;
  return S;
}

TransferMatrix2 transfer_product(const LaxMatrix& L, long i, long j, double E) {
  if (i > j) throw InvalidArgument("empty transfer product");
  TransferMatrix2 P;
  for (long k = i; k <= j; ++k) P = transfer_matrix(L, k, E) * P;
  return P;
}

TransferMatrix2 transfer_product_spectral(const LaxMatrix& L, long i, long j, double E) {
  if (i > j) throw InvalidArgument("empty transfer product");
  auto charpoly = [&](long lo, long hi) {
    if (lo > hi) return 1.0;
    double p = 1.0;
    for (double mu : eigenvalues(principal_submatrix(L, lo, hi))) p *= E - mu;
    return p;
  };
  double inv_short = 1.0;  // prod_{k=i}^{j-1} M_{k,k+1}^{-1}
  for (long k = i; k < j; ++k) {
    double c = L.coupling(k);
    if (c == 0.0) throw InvalidArgument("transfer matrix undefined");
    inv_short /= c;
  }
  const double right = L.coupling(j);
  if (right == 0.0) throw InvalidArgument("transfer matrix undefined");
  const double inv_long = inv_short / right;
  const double left = L.coupling(i - 1);
  TransferMatrix2 S;
  S.m[0][0] = i == j ? 0.0 : -left * inv_short * charpoly(i + 1, j - 1);
  S.m[0][1] = inv_short * charpoly(i, j - 1);
  S.m[1][0] = -left * inv_long * charpoly(i + 1, j);
  S.m[1][1] = inv_long * charpoly(i, j);
  return S;
}

Vec eigvec_log_profile(const LaxMatrix& L, const SpectralDecomposition& dec, std::size_t k, bool* guarded) {
  const std::size_t n = L.size();
  const auto col = static_cast<Eigen::Index>(k);
  const double neg_inf = -std::numeric_limits<double>::infinity();
  Vec out(n, neg_inf);
  bool below = false;
  if (L.corner) {
    for (std::size_t i = 0; i < n; ++i) {
      double v = std::abs(dec.vectors(static_cast<Eigen::Index>(i), col));
      if (v > 0.0) out[i] = std::log(v);
    }
    if (guarded) *guarded = false;
    return out;
  }
  const double lambda = dec.eigenvalues[k];
  const std::size_t c = argmax_abs(dec.vectors, col, 0, n - 1);
  const Block b = block_of(split_blocks(L), c);
  const double log_uc = std::log(std::abs(dec.vectors(static_cast<Eigen::Index>(c), col)));
  Vec logf(n, neg_inf), logg(n, neg_inf);
  std::vector<int> sgn(n, 0);
  forward_log(L, lambda, b.start, c, logf, sgn);
  backward_log(L, lambda, c, b.end, logg);
  for (std::size_t i = b.start; i <= b.end; ++i) {
    double direct = std::abs(dec.vectors(static_cast<Eigen::Index>(i), col));
    if (i == c || direct >= kDirectFloor) {
      out[i] = std::log(direct);
    } else if (i < c) {
      out[i] = log_uc + logf[i] - logf[c];
    } else {
      out[i] = log_uc + logg[i] - logg[c];
    }
    if (out[i] < std::log(std::numeric_limits<double>::min())) below = true;
  }
  if (guarded) *guarded = below;
  return out;
}

ThoulessReport thouless_identity_residual(const LaxMatrix& L) {
  return thouless_identity_residual(L, eig_tridiag(L));
}

ThoulessReport thouless_identity_residual(const LaxMatrix& L, const SpectralDecomposition& dec) {
  if (L.corner) throw InvalidArgument("Thouless identity needs an open matrix");
  const std::size_t n = L.size();
  for (double a : L.offdiag)
    if (a == 0.0) throw InvalidArgument("Thouless identity needs nonzero off-diagonals");
  double sum_log_a = 0.0;
  for (double a : L.offdiag) sum_log_a += std::log(std::abs(a));
  ThoulessReport rep;
  rep.residuals.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    bool g = false;
    Vec prof = eigvec_log_profile(L, dec, k, &g);
    rep.underflow_guarded = rep.underflow_guarded || g;
    double lhs = prof.front() + prof.back();
    double rhs = sum_log_a;
    for (std::size_t j = 0; j < n; ++j)
      if (j != k) rhs -= std::log(std::abs(dec.eigenvalues[k] - dec.eigenvalues[j]));
    rep.residuals[k] = std::abs(lhs - rhs);
    rep.max_residual = std::max(rep.max_residual, rep.residuals[k]);
  }
  return rep;
}

double min_gap(const Vec& sorted_desc) {
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < sorted_desc.size(); ++i) g = std::min(g, sorted_desc[i] - sorted_desc[i + 1]);
  return g;
}

SpectralDiagnostics spectral_diagnostics(const LaxMatrix& L) { return spectral_diagnostics(L, eigenvalues(L)); }

SpectralDiagnostics spectral_diagnostics(const LaxMatrix& L, const Vec& ev) {
  SpectralDiagnostics d;
  d.min_gap = min_gap(ev);
  for (std::size_t i = 0; i < L.size(); ++i)
    for (std::size_t j = (i == 0 ? 0 : i - 1); j < std::min(L.size(), i + 2); ++j)
      d.max_abs_entry = std::max(d.max_abs_entry, std::abs(L.entry(i, j)));
  if (L.corner) d.max_abs_entry = std::max(d.max_abs_entry, std::abs(L.entry(0, L.size() - 1)));
  for (double v : ev) d.max_abs_eigenvalue = std::max(d.max_abs_eigenvalue, std::abs(v));
  return d;
}

}  // namespace toda
