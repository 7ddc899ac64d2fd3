#include "todalab/quasiparticle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "todalab/error.hpp"
#include "todalab/stats.hpp"

namespace toda {

namespace {

// Column i of L^m, computed on the band of storage indices within m of i.
Vec power_column(const LaxMatrix& L, std::size_t i, int m) {
  const std::size_t n = L.size();
  const bool torus = L.corner.has_value();
  Vec v(n, 0.0), w(n, 0.0);
  v[i] = 1.0;
  auto neighbours = [&](std::size_t x, std::size_t out[3]) {
    std::size_t cnt = 0;
    auto add = [&](std::size_t y) {
      for (std::size_t c = 0; c < cnt; ++c)
        if (out[c] == y) return;
      out[cnt++] = y;
    };
    add(x);
    if (x > 0) add(x - 1);
    else if (torus) add(n - 1);
    if (x + 1 < n) add(x + 1);
    else if (torus) add(0);
    return cnt;
  };
  const long band_limit = static_cast<long>(n);
  for (int step = 0; step < m; ++step) {
    const long r = std::min<long>(step + 1, band_limit);
    std::fill(w.begin(), w.end(), 0.0);
    auto visit = [&](std::size_t x) {
      std::size_t nb[3];
      std::size_t cnt = neighbours(x, nb);
      double s = 0.0;
      for (std::size_t c = 0; c < cnt; ++c) s += L.entry(x, nb[c]) * v[nb[c]];
      w[x] = s;
    };
    if (torus && 2 * r + 1 >= static_cast<long>(n)) {
      for (std::size_t x = 0; x < n; ++x) visit(x);
    } else {
      for (long d = -r; d <= r; ++d) {
        long x = static_cast<long>(i) + d;
        if (torus) x = ((x % static_cast<long>(n)) + static_cast<long>(n)) % static_cast<long>(n);
        else if (x < 0 || x >= static_cast<long>(n)) continue;
        visit(static_cast<std::size_t>(x));
      }
    }
    v.swap(w);
  }
  return v;
}

double derivative3(double tm, double t0, double tp, double fm, double f0, double fp) {
  const double h1 = t0 - tm, h2 = tp - t0;
  return (h1 * h1 * fp - h2 * h2 * fm - (h1 * h1 - h2 * h2) * f0) / (h1 * h2 * (h1 + h2));
}

}  // namespace

Vec quasiparticle_positions(const LocalizationAssignment& assignment, const TodaState& state) {
  Vec Q(assignment.size());
  for (std::size_t j = 0; j < assignment.size(); ++j) Q[j] = state.q[state.domain.index(assignment.phi[j])];
  return Q;
}

std::size_t bulk_collar(std::size_t n, double T, double fraction) {
  const double nn = static_cast<double>(n);
  auto frac = static_cast<std::size_t>(std::ceil(fraction * nn));
  auto tl = static_cast<std::size_t>(std::ceil(T * std::log(nn)));
  if (static_cast<double>(tl) < 0.25 * nn) return std::max(frac, tl);
  return frac;
}

bool in_bulk(const DomainSpec& d, long site, std::size_t collar) {
  const auto c = static_cast<long>(collar);
  return site - d.first_site() >= c && d.last_site() - site >= c;
}

std::vector<QuasiparticleTrack> quasiparticle_tracks(const Trajectory& traj, const CenterTrack& track,
                                                     const Vec& lambdas, std::size_t collar) {
  const std::size_t n = lambdas.size();
  std::vector<QuasiparticleTrack> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    out[k].lambda = lambdas[k];
    out[k].bulk = in_bulk(traj.domain(), track.assignments.front().phi[k], collar);
  }
  for (std::size_t s = 0; s < traj.size(); ++s) {
    const TodaState st = traj.state_at(s);
    const Vec Q = quasiparticle_positions(track.assignments[s], st);
    for (std::size_t k = 0; k < n; ++k) {
      out[k].positions.push_back(Q[k]);
      out[k].sites.push_back(track.assignments[s].phi[k]);
    }
  }
  return out;
}

double local_charge(const LaxMatrix& L, long i, int m) {
  if (m < 0) throw InvalidArgument("charge order must be nonnegative");
  const std::size_t idx = L.domain.index(i);
  return power_column(L, idx, m)[idx];
}

double local_current(const LaxMatrix& L, long i, int m) {
  if (m < 0) throw InvalidArgument("charge order must be nonnegative");
  if (L.domain.is_open() && (i <= L.domain.first_site() || i > L.domain.last_site())) return 0.0;
  const double a_left = L.coupling(i - 1);
  if (a_left == 0.0 || m == 0) return 0.0;
  const std::size_t idx = L.domain.index(i);
  return a_left * power_column(L, idx, m)[L.domain.index(i - 1)];
}

ChargeCurrentField charge_current_field(const LaxMatrix& L, int m) {
  ChargeCurrentField f;
  f.m = m;
  for (std::size_t x = 0; x < L.size(); ++x) {
    long site = L.domain.site(x);
    f.charges.push_back(local_charge(L, site, m));
    f.currents.push_back(local_current(L, site, m));
  }
  return f;
}

double charge_continuity_residual(const Trajectory& traj, long i, int m) {
  if (traj.size() < 3) throw InvalidArgument("continuity check needs at least 3 samples");
  Vec k(traj.size()), flux(traj.size()), t = traj.times();
  for (std::size_t s = 0; s < traj.size(); ++s) {
    const LaxMatrix L = build_lax(traj.samples[s]);
    k[s] = local_charge(L, i, m);
    flux[s] = local_current(L, i, m) - local_current(L, i + 1, m);
  }
  double worst = 0.0;
  for (std::size_t s = 1; s + 1 < traj.size(); ++s) {
    double dk = derivative3(t[s - 1], t[s], t[s + 1], k[s - 1], k[s], k[s + 1]);
    worst = std::max(worst, std::abs(dk - flux[s]));
  }
  return worst;
}

double first_charge_symbolic_residual(const Trajectory& traj) {
  double worst = 0.0;
  for (const auto& f : traj.samples) {
    const LaxMatrix L = build_lax(f);
    const auto db = toda_rhs(f).second;
    for (std::size_t x = 0; x < L.size(); ++x) {
      long site = L.domain.site(x);
      worst = std::max(worst, std::abs(db[x] - (local_current(L, site, 1) - local_current(L, site + 1, 1))));
    }
  }
  return worst;
}

WindowSums charge_window_vs_eigsum(const TodaState& state, const LaxMatrix& L, const SpectralDecomposition& dec,
                                   const LocalizationAssignment& assignment, double lo, double hi, int m) {
  WindowSums w;
  double mass = 0.0;
  for (std::size_t x = 0; x < L.size(); ++x) {
    if (state.q[x] < lo || state.q[x] > hi) continue;
    double kx = local_charge(L, L.domain.site(x), m);
    w.charge_sum += kx;
    mass += std::abs(kx);
    ++w.particles;
  }
  if (w.particles == 0) throw InvalidArgument("empty window");
  for (std::size_t j = 0; j < dec.size(); ++j) {
    double Q = state.q[state.domain.index(assignment.phi[j])];
    if (Q < lo || Q > hi) continue;
    w.eig_sum += std::pow(dec.eigenvalues[j], m);
    ++w.quasiparticles;
  }
  w.residual = std::abs(w.charge_sum - w.eig_sum);
  w.relative = mass > 0.0 ? w.residual / mass : (w.residual == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  return w;
}

FluxBalance integrated_current_vs_flux(const Trajectory& traj, const CenterTrack& track, const Vec& lambdas,
                                       long k_site, int m) {
  FluxBalance fb;
  const Vec t = traj.times();
  Vec j(traj.size());
  for (std::size_t s = 0; s < traj.size(); ++s) j[s] = local_current(build_lax(traj.samples[s]), k_site, m);
  double fine = 0.0, coarse = 0.0;
  for (std::size_t s = 1; s < t.size(); ++s) fine += 0.5 * (t[s] - t[s - 1]) * (j[s] + j[s - 1]);
  for (std::size_t s = 2; s < t.size(); s += 2) coarse += 0.5 * (t[s] - t[s - 2]) * (j[s] + j[s - 2]);
  fb.integrated_current = fine;
  if (t.size() >= 5 && t.size() % 2 == 1) {
    double scale = 0.0;
    for (double x : j) scale = std::max(scale, std::abs(x));
    fb.under_resolved = std::abs(fine - coarse) > 1e-2 * std::max(std::abs(fine), scale * (t.back() - t.front()));
  }
  const auto& phi0 = track.assignments.front().phi;
  const auto& phit = track.assignments.back().phi;
  for (std::size_t q = 0; q < lambdas.size(); ++q) {
    double w = std::pow(lambdas[q], m);
    if (phi0[q] < k_site) fb.left_initial += w;
    if (phit[q] < k_site) fb.left_now += w;
  }
  fb.residual = fb.integrated_current + fb.left_now - fb.left_initial;
  return fb;
}

MoserReport moser_first_entry_check(const Trajectory& traj, const std::vector<SpectralDecomposition>& decs) {
  if (!traj.domain().is_open()) throw InvalidArgument("first-entry evolution needs an open domain");
  if (decs.size() != traj.size()) throw InvalidArgument("one decomposition per sample is required");
  const std::size_t n = decs.front().size();
  const Vec& lam = decs.front().eigenvalues;
  const double gap = min_gap(lam);
  for (const auto& d : decs)
    for (std::size_t k = 0; k < n; ++k)
      if (n > 1 && !(std::abs(d.eigenvalues[k] - lam[k]) < gap / 2.0))
        throw NumericalError("identity tracking unreliable");

  auto first_logs = [&](std::size_t s) {
    const LaxMatrix L = build_lax(traj.samples[s]);
    Vec out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = 2.0 * eigvec_log_profile(L, decs[s], k).front();
    return out;
  };
  const Vec log0 = first_logs(0);
  const double t0 = traj.samples.front().t;
  MoserReport rep;
  rep.residuals.assign(n, 0.0);
  for (std::size_t s = 0; s < traj.size(); ++s) {
    const double t = traj.samples[s].t - t0;
    Vec expo(n);
    for (std::size_t k = 0; k < n; ++k) expo[k] = -lam[k] * t + log0[k];
    const double mx = *std::max_element(expo.begin(), expo.end());
    double acc = 0.0;
    for (double e : expo) acc += std::exp(e - mx);
    const double c = mx + std::log(acc);
    rep.c_t.push_back(c);
    rep.position_residuals.push_back(std::abs(traj.q_first.front() - traj.q_first[s] - c));
    const Vec logt = s == 0 ? log0 : first_logs(s);
    for (std::size_t k = 0; k < n; ++k) {
      double r = std::abs(logt[k] - (expo[k] - c));
      rep.residuals[k] = std::max(rep.residuals[k], r);
    }
  }
  for (double r : rep.residuals) rep.max_residual = std::max(rep.max_residual, r);
  return rep;
}

namespace {

DecayRelation decay_relation(const LaxMatrix& L, const SpectralDecomposition& dec,
                             const LocalizationAssignment& assignment, std::size_t k, bool left) {
  if (L.corner) throw InvalidArgument("decay relation needs an open matrix");
  DecayRelation r;
  const Vec prof = eigvec_log_profile(L, dec, k);
  r.log_u = left ? prof.front() : prof.back();
  const long c = assignment.phi[k];
  const long lo = left ? L.domain.first_site() : c;
  const long hi = left ? c - 1 : L.domain.last_site() - 1;
  for (long j = lo; j <= hi; ++j) r.sum_log_a += std::log(std::abs(L.coupling(j)));
  for (std::size_t i = 0; i < dec.size(); ++i) {
    if (i == k) continue;
    bool side = left ? assignment.phi[i] < c : assignment.phi[i] > c;
    if (side) r.sum_log_gaps += std::log(std::abs(dec.eigenvalues[i] - dec.eigenvalues[k]));
  }
  r.residual = r.log_u - r.sum_log_a + r.sum_log_gaps;
  return r;
}

}  // namespace

DecayRelation eigvec_decay_relation_residual(const LaxMatrix& L, const SpectralDecomposition& dec,
                                             const LocalizationAssignment& assignment, std::size_t k) {
  return decay_relation(L, dec, assignment, k, true);
}

DecayRelation eigvec_decay_relation_residual_right(const LaxMatrix& L, const SpectralDecomposition& dec,
                                                   const LocalizationAssignment& assignment, std::size_t k) {
  return decay_relation(L, dec, assignment, k, false);
}

double ordered_log_sum(const Vec& Q, const std::vector<long>& sites, const Vec& lambda, std::size_t k, bool* tie) {
  double s = 0.0;
  for (std::size_t i = 0; i < Q.size(); ++i) {
    if (i == k) continue;
    if (tie && std::abs(Q[i] - Q[k]) <= 1e-12 * std::max(1.0, std::abs(Q[k]))) *tie = true;
    bool before = Q[i] < Q[k] || (Q[i] == Q[k] && sites[i] < sites[k]);
    if (before) s += std::log(std::abs(lambda[k] - lambda[i]));
  }
  return s;
}

double scattering_residual(const Vec& Q0, const std::vector<long>& sites0, const Vec& Qt,
                           const std::vector<long>& sitest, const Vec& lambda, double t, double alpha,
                           std::size_t k, bool* tie) {
  if (alpha == 0.0) throw InvalidArgument("stretch parameter alpha is zero");
  const double sg = alpha > 0.0 ? 1.0 : -1.0;
  const double st = ordered_log_sum(Qt, sitest, lambda, k, tie);
  const double s0 = ordered_log_sum(Q0, sites0, lambda, k, tie);
  return lambda[k] * t - Qt[k] + Q0[k] - 2.0 * sg * st + 2.0 * sg * s0;
}

ScatteringReport scattering_report(const Vec& Q0, const std::vector<long>& sites0, const Vec& Qt,
                                   const std::vector<long>& sitest, const Vec& lambda, double t, double alpha,
                                   const DomainSpec& domain, std::size_t collar) {
  ScatteringReport rep;
  rep.t = t;
  rep.collar = collar;
  const std::size_t n = lambda.size();
  Vec disp;
  for (std::size_t k = 0; k < n; ++k)
    if (in_bulk(domain, sites0[k], collar)) disp.push_back(std::abs(Qt[k] - Q0[k]));
  rep.displacement_scale = disp.size() >= 2 ? stats::iqr(disp) : 0.0;
  Vec normalized;
  for (std::size_t k = 0; k < n; ++k) {
    ScatteringEntry e;
    e.k = k;
    e.lambda = lambda[k];
    e.q0 = Q0[k];
    e.qt = Qt[k];
    e.residual = scattering_residual(Q0, sites0, Qt, sitest, lambda, t, alpha, k, &e.tie);
    e.bulk = in_bulk(domain, sites0[k], collar);
    const double scale = std::max(std::abs(lambda[k]) * t, rep.displacement_scale);
    e.normalized = scale > 0.0 ? std::abs(e.residual) / scale : (e.residual == 0.0 ? 0.0 : std::abs(e.residual));
    if (e.bulk) {
      normalized.push_back(e.normalized);
      rep.max_abs_bulk = std::max(rep.max_abs_bulk, std::abs(e.residual));
    }
    rep.entries.push_back(e);
  }
  rep.bulk_count = normalized.size();
  rep.median_normalized_bulk = normalized.empty() ? 0.0 : stats::median(normalized);
  return rep;
}

}  // namespace toda
