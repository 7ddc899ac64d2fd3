#include "todalab/localization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "todalab/error.hpp"
#include "todalab/stats.hpp"

namespace toda {

namespace {

constexpr std::size_t kUnmatched = std::numeric_limits<std::size_t>::max();

double abs_entry(const SpectralDecomposition& dec, std::size_t i, std::size_t j) {
  return std::abs(dec.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
}

std::size_t argmax_site(const SpectralDecomposition& dec, std::size_t j) {
  Eigen::Index idx = 0;
  dec.vectors.col(static_cast<Eigen::Index>(j)).cwiseAbs().maxCoeff(&idx);
  return static_cast<std::size_t>(idx);
}

long site_distance(const DomainSpec& d, long x, long y) {
  long diff = std::abs(x - y);
  if (d.is_torus()) diff = std::min(diff, static_cast<long>(d.size()) - diff);
  return diff;
}

// Hopcroft-Karp on adjacency lists left -> right. match_l / match_r may hold
// an initial partial matching.
std::size_t hopcroft_karp(const std::vector<std::vector<std::size_t>>& adj, std::size_t n_right,
                          std::vector<std::size_t>& match_l, std::vector<std::size_t>& match_r) {
  const std::size_t n_left = adj.size();
  const std::size_t inf = kUnmatched;
  std::vector<std::size_t> dist(n_left);
  auto bfs = [&]() {
    std::queue<std::size_t> q;
    bool found = false;
    for (std::size_t u = 0; u < n_left; ++u) {
      if (match_l[u] == kUnmatched) {
        dist[u] = 0;
        q.push(u);
      } else {
        dist[u] = inf;
      }
    }
    while (!q.empty()) {
      std::size_t u = q.front();
      q.pop();
      for (std::size_t v : adj[u]) {
        std::size_t w = match_r[v];
        if (w == kUnmatched) {
          found = true;
        } else if (dist[w] == inf) {
          dist[w] = dist[u] + 1;
          q.push(w);
        }
      }
    }
    return found;
  };
  std::vector<std::size_t> it(n_left);
  auto dfs = [&](auto&& self, std::size_t u) -> bool {
    for (; it[u] < adj[u].size(); ++it[u]) {
      std::size_t v = adj[u][it[u]];
      std::size_t w = match_r[v];
      if (w == kUnmatched || (dist[w] == dist[u] + 1 && self(self, w))) {
        match_l[u] = v;
        match_r[v] = u;
        return true;
      }
    }
    dist[u] = inf;
    return false;
  };
  (void)n_right;
  while (bfs()) {
    std::fill(it.begin(), it.end(), 0);
    for (std::size_t u = 0; u < n_left; ++u)
      if (match_l[u] == kUnmatched) dfs(dfs, u);
  }
  return static_cast<std::size_t>(
      std::count_if(match_l.begin(), match_l.end(), [](std::size_t v) { return v != kUnmatched; }));
}

}  // namespace

double default_zeta(std::size_t n) { return 1.0 / (2.0 * static_cast<double>(n)); }

std::vector<long> centers(const SpectralDecomposition& dec, std::size_t j, double zeta) {
  if (!(zeta > 0.0)) throw InvalidArgument("zeta must be positive");
  std::vector<long> out;
  for (std::size_t i = 0; i < dec.size(); ++i)
    if (abs_entry(dec, i, j) >= zeta) out.push_back(dec.domain.site(i));
  return out;
}

LocalizationAssignment center_bijection(const SpectralDecomposition& dec, double zeta) {
  if (!(zeta > 0.0)) throw InvalidArgument("zeta must be positive");
  const std::size_t n = dec.size();
  std::vector<std::vector<std::size_t>> adj(n);
  struct Edge {
    double w;
    std::size_t j, i;
  };
  std::vector<Edge> edges;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      double w = abs_entry(dec, i, j);
      if (w >= zeta) {
        adj[j].push_back(i);
        edges.push_back({w, j, i});
      }
    }
    std::sort(adj[j].begin(), adj[j].end(),
              [&](std::size_t x, std::size_t y) { return abs_entry(dec, x, j) > abs_entry(dec, y, j); });
  }
  std::vector<std::size_t> match_l(n, kUnmatched), match_r(n, kUnmatched);
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) { return x.w > y.w; });
  for (const Edge& e : edges) {
    if (match_l[e.j] == kUnmatched && match_r[e.i] == kUnmatched) {
      match_l[e.j] = e.i;
      match_r[e.i] = e.j;
    }
  }
  std::size_t size = hopcroft_karp(adj, n, match_l, match_r);
  if (size < n) throw NumericalError("no zeta-bijection; max matching size = " + std::to_string(size));

  // Pairwise exchanges that keep both edges admissible and raise the sum of
  // log witnesses.
  for (int pass = 0; pass < 50; ++pass) {
    bool improved = false;
    for (std::size_t j1 = 0; j1 < n; ++j1) {
      for (std::size_t i : adj[j1]) {
        std::size_t j2 = match_r[i];
        if (j2 == j1) break;  // adjacency is sorted, later sites are worse
        std::size_t i1 = match_l[j1];
        double w_cross = abs_entry(dec, i1, j2);
        if (w_cross < zeta) continue;
        double before = std::log(abs_entry(dec, i1, j1)) + std::log(abs_entry(dec, i, j2));
        double after = std::log(abs_entry(dec, i, j1)) + std::log(w_cross);
        if (after > before + 1e-12) {
          match_l[j1] = i;
          match_r[i] = j1;
          match_l[j2] = i1;
          match_r[i1] = j2;
          improved = true;
          break;
        }
      }
    }
    if (!improved) break;
  }

  LocalizationAssignment a;
  a.zeta = zeta;
  a.phi.resize(n);
  a.witness.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    a.phi[j] = dec.domain.site(match_l[j]);
    a.witness[j] = abs_entry(dec, match_l[j], j);
  }
  return a;
}

std::size_t default_decay_collar(std::size_t n) {
  double l = std::log(static_cast<double>(n));
  return static_cast<std::size_t>(std::ceil(l * l / 2.0));
}

DecayProfile decay_profile(const LaxMatrix& L, const SpectralDecomposition& dec, std::size_t j,
                           const LocalizationAssignment& assignment, std::size_t collar) {
  DecayProfile p;
  p.center = assignment.phi.at(j);
  const Vec logs = eigvec_log_profile(L, dec, j);
  const double floor_log = std::log(std::numeric_limits<double>::min());
  Vec x, y;
  std::size_t considered = 0, floored = 0;
  for (std::size_t i = 0; i < dec.size(); ++i) {
    long d = site_distance(dec.domain, dec.domain.site(i), p.center);
    if (d < static_cast<long>(collar)) continue;
    ++considered;
    bool at_floor = !std::isfinite(logs[i]) || (L.corner && logs[i] < floor_log);
    if (at_floor) {
      ++floored;
      continue;
    }
    x.push_back(static_cast<double>(d));
    y.push_back(logs[i]);
  }
  p.points = x.size();
  p.floor_fraction = considered > 0 ? static_cast<double>(floored) / static_cast<double>(considered) : 0.0;
  if (considered > 0 && floored == considered) {
    p.rate = std::numeric_limits<double>::infinity();
    return p;
  }
  if (x.size() < 4) throw NumericalError("profile underdetermined");
  double mx = stats::mean(x);
  double sxx = 0.0;
  for (double v : x) sxx += (v - mx) * (v - mx);
  if (sxx == 0.0) throw NumericalError("profile underdetermined");
  stats::LineFit fit = stats::fit_line(x, y);
  p.rate = std::max(0.0, -fit.slope);
  double ss = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    double r = y[k] - (fit.intercept + fit.slope * x[k]);
    ss += r * r;
  }
  p.residual = std::sqrt(ss / static_cast<double>(x.size()));
  return p;
}

CenterTrack track_centers(const Trajectory& traj, double zeta) {
  std::vector<SpectralDecomposition> decs;
  decs.reserve(traj.size());
  for (const auto& s : traj.samples) decs.push_back(eig_tridiag(build_lax(s)));
  return track_centers(decs, traj.times(), zeta);
}

CenterTrack track_centers(const std::vector<SpectralDecomposition>& decs, const Vec& times, double zeta) {
  if (decs.empty()) throw InvalidArgument("no samples to track");
  CenterTrack tr;
  tr.times = times;
  const std::size_t n = decs.front().size();
  tr.min_gap = min_gap(decs.front().eigenvalues);
  // Eigenvalues are conserved, so sorted order carries identity as long as
  // the drift stays below half the smallest gap.
  for (const auto& d : decs)
    for (std::size_t k = 0; k < n; ++k)
      tr.max_eigen_drift = std::max(tr.max_eigen_drift, std::abs(d.eigenvalues[k] - decs.front().eigenvalues[k]));
  if (n > 1 && tr.max_eigen_drift > 0.0 && !(tr.max_eigen_drift < tr.min_gap / 2.0))
    throw NumericalError("identity tracking unreliable");
  tr.center_spread.assign(n, 0);
  for (const auto& d : decs) {
    tr.assignments.push_back(center_bijection(d, zeta));
    for (std::size_t k = 0; k < n; ++k) {
      auto c = centers(d, k, zeta);
      long spread = 0;
      for (long x : c)
        for (long y : c) spread = std::max(spread, site_distance(d.domain, x, y));
      tr.center_spread[k] = std::max(tr.center_spread[k], spread);
    }
  }
  const auto& phi0 = tr.assignments.front().phi;
  for (std::size_t s = 0; s < tr.assignments.size(); ++s) {
    const auto& phi = tr.assignments[s].phi;
    long step = 0;
    for (std::size_t k = 0; k < n; ++k) {
      tr.max_displacement = std::max(tr.max_displacement, site_distance(decs[s].domain, phi[k], phi0[k]));
      if (s > 0) step = std::max(step, site_distance(decs[s].domain, phi[k], tr.assignments[s - 1].phi[k]));
    }
    if (s > 0) tr.step_displacement.push_back(step);
  }
  return tr;
}

std::vector<TruncationMatch> truncation_eigen_match(const LaxMatrix& L, long ell, double zeta, long dist_min) {
  if (dist_min < 1) throw InvalidArgument("dist_min must be at least 1");
  if (!(zeta > 0.0)) throw InvalidArgument("zeta must be positive");
  const LaxMatrix P = zero_out(L, {ell});
  const SpectralDecomposition dl = eig_tridiag(L);
  const SpectralDecomposition dp = eig_tridiag(P);
  std::vector<TruncationMatch> out;
  const double scale = std::max(1.0, *std::max_element(dl.eigenvalues.begin(), dl.eigenvalues.end(),
                                                       [](double a, double b) { return std::abs(a) < std::abs(b); }));
  for (std::size_t k = 0; k < dp.size(); ++k) {
    long phi = dp.domain.site(argmax_site(dp, k));
    if (site_distance(L.domain, phi, ell) < dist_min) continue;
    if (abs_entry(dp, dp.domain.index(phi), k) < zeta) continue;
    const double mu = dp.eigenvalues[k];
    std::size_t best = 0;
    double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
    for (std::size_t m = 0; m < dl.size(); ++m) {
      double d = std::abs(dl.eigenvalues[m] - mu);
      if (d < d1) {
        d2 = d1;
        d1 = d;
        best = m;
      } else if (d < d2) {
        d2 = d;
      }
    }
    TruncationMatch tm;
    tm.mu = mu;
    tm.lambda = dl.eigenvalues[best];
    tm.gap = d1;
    tm.center_mu = phi;
    tm.center_lambda = dl.domain.site(argmax_site(dl, best));
    tm.ambiguous = d2 - d1 <= 1e-12 * scale;
    out.push_back(tm);
  }
  return out;
}

}  // namespace toda
