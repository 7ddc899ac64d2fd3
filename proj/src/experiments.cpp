#include "todalab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "todalab/domain_compare.hpp"
#include "todalab/error.hpp"
#include "todalab/hydro.hpp"
#include "todalab/quasiparticle.hpp"
#include "todalab/stats.hpp"
#include "todalab/thermal.hpp"

namespace toda {

namespace {

constexpr std::uint64_t kAuxStream = 1ull << 40;

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T v{};
  is >> v;
  if (is.fail() || !is.eof()) throw InvalidArgument("bad value for " + key + ": " + text);
  return v;
}

std::vector<long> parse_long_list(const std::string& key, const std::string& text) {
  std::vector<long> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) out.push_back(parse_number<long>(key, item));
  if (out.empty()) throw InvalidArgument("empty list for " + key);
  return out;
}

struct Recorder {
  std::string experiment;
  ReplicaOutput out;
  void add(double t, const std::string& key, Cell v) { out.rows.push_back({experiment, out.replica, t, key, std::move(v)}); }
};

Recorder recorder(const ExperimentConfig& cfg, std::size_t r) {
  Recorder rec;
  rec.experiment = cfg.experiment;
  rec.out.replica = cfg.first_replica + r;
  return rec;
}

double row_value(const ResultRow& row) {
  if (const double* d = std::get_if<double>(&row.value)) return *d;
  return std::numeric_limits<double>::quiet_NaN();
}

// Values of `key` across replicas, in replica order.
Vec collect(const ExperimentOutput& out, const std::string& key) {
  Vec v;
  for (const auto& rep : out.replicas)
    for (const auto& row : rep.rows)
      if (row.key == key) {
        double x = row_value(row);
        if (std::isfinite(x)) v.push_back(x);
      }
  return v;
}

Vec collect_prefix(const ExperimentOutput& out, const std::string& prefix) {
  Vec v;
  for (const auto& rep : out.replicas)
    for (const auto& row : rep.rows)
      if (row.key.rfind(prefix, 0) == 0) {
        double x = row_value(row);
        if (std::isfinite(x)) v.push_back(x);
      }
  return v;
}

double max_of(const Vec& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }
double min_of(const Vec& v) { return v.empty() ? 0.0 : *std::min_element(v.begin(), v.end()); }

json finite_or_sentinel(double v) {
  if (std::isfinite(v)) return v;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return "undefined";
}

json criterion(bool pass, json details) {
  details["pass"] = pass;
  return details;
}

double max_abs_diff(const Vec& x, const Vec& y) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

Trajectory subsample(const Trajectory& traj, std::size_t stride) {
  Trajectory t;
  for (std::size_t s = 0; s < traj.size(); s += stride) {
    t.samples.push_back(traj.samples[s]);
    t.q_first.push_back(traj.q_first[s]);
    t.conserved_drift.push_back(traj.conserved_drift[s]);
  }
  return t;
}

std::vector<SpectralDecomposition> decompose_all(const Trajectory& traj) {
  std::vector<SpectralDecomposition> decs;
  decs.reserve(traj.size());
  for (const auto& s : traj.samples) decs.push_back(eig_tridiag(build_lax(s)));
  return decs;
}

// ---------------------------------------------------------------- sample

ExperimentOutput run_sample(const ExperimentConfig& cfg) {
  const ThermalParams p = ThermalParams::make(cfg.beta, cfg.theta);
  ExperimentOutput out;
  out.replicas = parallel_replicas(cfg.replicas, [&](std::size_t r) {
    Recorder rec = recorder(cfg, r);
    RngStream rng(cfg.seed, rec.out.replica);
    const FlaschkaState f = sample_open(p, cfg.N, rng);
    Vec a2, b, spacing;
    for (std::size_t i = 0; i + 1 < cfg.N; ++i) {
      a2.push_back(f.a[i] * f.a[i]);
      spacing.push_back(-2.0 * std::log(f.a[i]));
    }
    b = f.b;
    if (!a2.empty()) {
      rec.add(0.0, "mean_a2", stats::mean(a2));
      rec.add(0.0, "mean_r", stats::mean(spacing));
    }
    rec.add(0.0, "mean_b", stats::mean(b));
    if (b.size() >= 2) rec.add(0.0, "var_b", stats::sample_variance(b));
    const TodaState s = state_from_flaschka(f);
    for (std::size_t lag : {1ul, 10ul, 100ul, 1000ul}) {
      if (lag >= cfg.N) break;
      SpacingStatistics st = spacing_statistics(s.q, p.alpha, {lag});
      rec.add(0.0, "spacing_mean_deviation_lag_" + std::to_string(lag), st.mean_deviation);
      rec.add(0.0, "spacing_max_deviation_lag_" + std::to_string(lag), st.max_deviation);
    }
    return rec.out;
  });
  Vec r = collect(out, "mean_r");
  out.summary["alpha"] = p.alpha;
  out.summary["mean_r"] = r.empty() ? json("undefined") : json(stats::mean(r));
  return out;
}

// ---------------------------------------------------------------- evolve

ExperimentOutput run_evolve(const ExperimentConfig& cfg) {
  const ThermalParams p = ThermalParams::make(cfg.beta, cfg.theta);
  const IntegratorConfig ic = cfg.integrator();
  ExperimentOutput out;
  out.replicas = parallel_replicas(cfg.replicas, [&](std::size_t r) {
    Recorder rec = recorder(cfg, r);
    RngStream rng(cfg.seed, rec.out.replica);
    const FlaschkaState f0 = sample_open(p, cfg.N, rng);
    const Trajectory traj = evolve(f0, ic, cfg.T);
    const auto decs = decompose_all(traj);
    const Vec& lam0 = decs.front().eigenvalues;
    double entry_lo = std::numeric_limits<double>::infinity(), entry_hi = 0.0;
    for (std::size_t s = 0; s < traj.size(); ++s) {
      const double t = traj.samples[s].t;
      const auto& d = traj.conserved_drift[s];
      rec.add(t, "drift_hamiltonian", d.hamiltonian);
      rec.add(t, "drift_trace1", d.trace1);
      rec.add(t, "drift_trace2", d.trace2);
      rec.add(t, "eigenvalue_drift", max_abs_diff(decs[s].eigenvalues, lam0));
      double A = 0.0, B = 0.0;
      for (double x : traj.samples[s].a) A = std::max(A, std::abs(x));
      for (double x : traj.samples[s].b) B = std::max(B, std::abs(x));
      entry_lo = std::min(entry_lo, A + B);
      entry_hi = std::max(entry_hi, A + B);
    }
    const double drift = max_abs_diff(decs.back().eigenvalues, lam0);
    rec.add(cfg.T, "final_eigenvalue_drift", drift);
    rec.add(cfg.T, "entry_bound_ratio", entry_hi / entry_lo);

    IntegratorConfig half = ic;
    half.step = ic.step / 2.0;
    half.sample_every = cfg.T > 0.0 ? cfg.T : 0.0;
    const Trajectory fine = evolve(f0, half, cfg.T);
    const double drift_half = max_abs_diff(eigenvalues(build_lax(fine.samples.back())), lam0);
    rec.add(cfg.T, "final_eigenvalue_drift_half_step", drift_half);
    rec.add(cfg.T, "halving_improvement", drift_half > 0.0 ? drift / drift_half : std::numeric_limits<double>::infinity());

    const MoserReport moser = moser_first_entry_check(traj, decs);
    const LocalizationAssignment a0 = center_bijection(decs.front(), cfg.zeta_for(cfg.N));
    const std::size_t collar = cfg.collar_for(cfg.N, cfg.T);
    double bulk_max = 0.0;
    for (std::size_t k = 0; k < moser.residuals.size(); ++k)
      if (in_bulk(f0.domain, a0.phi[k], collar)) bulk_max = std::max(bulk_max, moser.residuals[k]);
    rec.add(cfg.T, "moser_max_residual", moser.max_residual);
    rec.add(cfg.T, "moser_bulk_max_residual", bulk_max);
    rec.add(0.0, "c_t0", moser.c_t.front());
    for (std::size_t s = 0; s < traj.size(); ++s) {
      rec.add(traj.samples[s].t, "c_t", moser.c_t[s]);
      rec.add(traj.samples[s].t, "first_position_residual", moser.position_residuals[s]);
    }
    return rec.out;
  });
  const Vec drift = collect(out, "final_eigenvalue_drift");
  const Vec improve = collect(out, "halving_improvement");
  const Vec moser = collect(out, "moser_bulk_max_residual");
  Vec c0 = collect(out, "c_t0");
  for (double& x : c0) x = std::abs(x);
  out.summary["max_eigenvalue_drift"] = max_of(drift);
  out.summary["min_halving_improvement"] = finite_or_sentinel(min_of(improve));
  out.summary["max_moser_bulk_residual"] = max_of(moser);
  out.summary["max_abs_c_t0"] = max_of(c0);
  out.summary["max_entry_bound_ratio"] = max_of(collect(out, "entry_bound_ratio"));
  out.summary["acceptance"]["AC1"] = criterion(max_of(drift) <= 1e-7 && min_of(improve) >= 8.0,
                                               {{"max_drift", max_of(drift)}, {"min_improvement", finite_or_sentinel(min_of(improve))}});
  out.summary["acceptance"]["AC2"] = criterion(max_of(moser) <= 1e-6 && max_of(c0) <= 1e-12,
                                               {{"max_bulk_residual", max_of(moser)}, {"max_abs_c0", max_of(c0)}});
  return out;
}

// ---------------------------------------------------------------- spectrum

ExperimentOutput run_spectrum(const ExperimentConfig& cfg) {
  const ThermalParams p = ThermalParams::make(cfg.beta, cfg.theta);
  ExperimentOutput out;
  out.replicas = parallel_replicas(cfg.replicas, [&](std::size_t r) {
    Recorder rec = recorder(cfg, r);
    RngStream rng(cfg.seed, rec.out.replica);
    const LaxMatrix L = build_lax(sample_open(p, cfg.N, rng));
    const Vec ev = eigenvalues(L);
    const SpectralDiagnostics d = spectral_diagnostics(L, ev);
    rec.add(0.0, "min_gap", finite_or_sentinel(d.min_gap).is_number() ? Cell(d.min_gap) : Cell(std::string("inf")));
    rec.add(0.0, "max_abs_entry", d.max_abs_entry);
    rec.add(0.0, "max_abs_eigenvalue", d.max_abs_eigenvalue);
    if (r == 0) {
      const SpectralDecomposition dec = eig_tridiag(L);
      const auto n = static_cast<Eigen::Index>(L.size());
      const Eigen::MatrixXd M = L.dense();
      double orth = (dec.vectors.transpose() * dec.vectors - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
      double eres = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        double lam = dec.eigenvalues[static_cast<std::size_t>(k)];
        double res = (M * dec.vectors.col(k) - lam * dec.vectors.col(k)).cwiseAbs().maxCoeff();
        eres = std::max(eres, res / std::max(1.0, std::abs(lam)));
      }
      rec.add(0.0, "orthogonality_residual", orth);
      rec.add(0.0, "eigen_residual", eres);
    }
    return rec.out;
  });
  const Vec gaps = collect(out, "min_gap");
  Vec deltas, probs;
  const double lo = std::log10(cfg.delta_min), hi = std::log10(cfg.delta_max);
  const int points = std::max(2, static_cast<int>(std::round((hi - lo) * 4.0)) + 1);
  for (int i = 0; i < points; ++i) {
    const double delta = std::pow(10.0, lo + (hi - lo) * i / (points - 1));
    const double count = static_cast<double>(std::count_if(gaps.begin(), gaps.end(), [&](double g) { return g < delta; }));
    deltas.push_back(delta);
    probs.push_back(gaps.empty() ? 0.0 : count / static_cast<double>(cfg.replicas));
  }
  const stats::LineFit fit = stats::fit_through_origin(deltas, probs);
  json table = json::array();
  for (std::size_t i = 0; i < deltas.size(); ++i) table.push_back({{"delta", deltas[i]}, {"probability", probs[i]}});
  out.summary["gap_probability"] = table;
  out.summary["gap_fit_slope"] = fit.slope;
  out.summary["gap_fit_r2"] = fit.r2;
  out.summary["median_min_gap"] = gaps.empty() ? json("inf") : json(stats::median(gaps));
  out.summary["acceptance"]["AC12"] = criterion(fit.r2 >= 0.95, {{"r2", fit.r2}, {"slope", fit.slope}});
  return out;
}

// ---------------------------------------------------------------- thouless

ExperimentOutput run_thouless(const ExperimentConfig& cfg) {
  const ThermalParams p = ThermalParams::make(cfg.beta, cfg.theta);
  if (cfg.N < 2) throw InvalidArgument("thouless experiment needs N >= 2");
  ExperimentOutput out;
  out.replicas = parallel_replicas(cfg.replicas, [&](std::size_t r) {
    Recorder rec = recorder(cfg, r);
    RngStream rng(cfg.seed, rec.out.replica);
    const std::size_t n = 2 + rng.index(cfg.N - 1);
    const LaxMatrix L = build_lax(sample_open(p, n, rng));
    const SpectralDecomposition dec = eig_tridiag(L);
    const ThoulessReport th = thouless_identity_residual(L, dec);
    rec.add(0.0, "size", static_cast<double>(n));
    rec.add(0.0, "thouless_max_residual", th.max_residual);
    rec.add(0.0, "underflow_guarded", th.underflow_guarded ? Cell(std::string("underflow_guarded")) : Cell(0.0));

    // Transfer matrices over a random window [i, j] with j below the last site.
    const long first = L.domain.first_site();
    const long last = L.domain.last_site();
    long i = first + static_cast<long>(rng.index(static_cast<std::size_t>(last - first)));
    long j = i + static_cast<long>(rng.index(static_cast<std::size_t>(last - i)));
    const double E = rng.uniform(dec.eigenvalues.back() - 1.0, dec.eigenvalues.front() + 1.0);
    const TransferMatrix2 direct = transfer_product(L, i, j, E);
    const TransferMatrix2 closed = transfer_product_spectral(L, i, j, E);
    double rel = 0.0;
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) {
        const double u = direct.m[x][y], v = closed.m[x][y];
        const double scale = std::max(std::abs(u), std::abs(v));
        if (scale > 0.0) rel = std::max(rel, std::abs(u - v) / scale);
      }
    rec.add(0.0, "transfer_closed_form_relative", rel);

    const std::size_t k = rng.index(n);
    const double mu = dec.eigenvalues[k];
    const TransferMatrix2 S = transfer_product(L, i, j, mu);
    const double w0 = i > first ? dec.u(k, i - 1) : 0.0;
    const auto [x0, x1] = S.apply(w0, dec.u(k, i));
    const double err = std::hypot(x0 - dec.u(k, j), x1 - dec.u(k, j + 1));
    // Rounding scale: largest entry over the partial products.
    double norm = 0.0;
    TransferMatrix2 partial;
    for (long s = i; s <= j; ++s) {
      partial = transfer_matrix(L, s, mu) * partial;
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) norm = std::max(norm, std::abs(partial.m[x][y]));
    }
    rec.add(0.0, "propagation_residual", err);
    // Eigenvector entries carry absolute error near eps, amplified along the product.
    rec.add(0.0, "propagation_residual_scaled", err / std::max(1.0, norm));
    return rec.out;
  });
  const Vec th = collect(out, "thouless_max_residual");
  const Vec rel = collect(out, "transfer_closed_form_relative");
  const Vec prop = collect(out, "propagation_residual_scaled");
  out.summary["max_thouless_residual"] = max_of(th);
  out.summary["max_transfer_relative"] = max_of(rel);
  out.summary["max_propagation_residual_scaled"] = max_of(prop);
  out.summary["max_propagation_residual"] = max_of(collect(out, "propagation_residual"));
  out.summary["acceptance"]["AC3"] = criterion(max_of(th) <= 1e-9, {{"max_residual", max_of(th)}});
  out.summary["acceptance"]["AC4"] = criterion(max_of(rel) <= 1e-8 && max_of(prop) <= 1e-9,
                                               {{"max_relative", max_of(rel)}, {"max_propagation", max_of(prop)}});
  return out;
}

// ---------------------------------------------------------------- centers

ExperimentOutput run_centers(const ExperimentConfig& cfg) {
  const ThermalParams p = ThermalParams::make(cfg.beta, cfg.theta);
  const double zeta = cfg.zeta_for(cfg.N);
  ExperimentOutput out;
  out.replicas = parallel_replicas(cfg.replicas, [&](std::size_t r) {
    Recorder rec = recorder(cfg, r);
    RngStream rng(cfg.seed, rec.out.replica);
    const LaxMatrix L = build_lax(sample_open(p, cfg.N, rng));
    const SpectralDecomposition dec = eig_tridiag(L);
    Vec sizes;
    for (std::size_t j = 0; j < dec.size(); ++j) sizes.push_back(static_cast<double>(centers(dec, j, zeta).size()));
    rec.add(0.0, "median_center_set_size", stats::median(sizes));
    LocalizationAssignment a;
    try {
      a = center_bijection(dec, zeta);
      rec.add(0.0, "perfect_matching", 1.0);
    } catch (const NumericalError& e) {
      rec.add(0.0, "perfect_matching", 0.0);
      return rec.out;
    }
    rec.add(0.0, "min_witness", min_of(a.witness));
    // Row sums of U^2 over a block of sites equal the block size.
    const std::size_t half = dec.size() / 2;
    double mass = dec.vectors.topRows(static_cast<Eigen::Index>(half)).squaredNorm();
    rec.add(0.0, "unitarity_residual", std::abs(mass - static_cast<double>(half)));

    const std::size_t collar = cfg.collar_sites >= 0 ? static_cast<std::size_t>(cfg.collar_sites) : default_decay_collar(cfg.N);
    const std::size_t bulk = bulk_collar(cfg.N, 0.0, cfg.collar_fraction);
    Vec rates;
    std::size_t infinite = 0;
    std::vector<std::size_t> bulk_ks;
    for (std::size_t j = 0; j < dec.size(); ++j) {
      if (!in_bulk(L.domain, a.phi[j], bulk)) continue;
      bulk_ks.push_back(j);
      try {
        DecayProfile dp = decay_profile(L, dec, j, a, collar);
        if (std::isfinite(dp.rate))
          rates.push_back(dp.rate);
        else
          ++infinite;
      } catch (const NumericalError&) {
      }
    }
    if (!rates.empty())
      rec.add(0.0, "median_decay_rate", stats::median(rates));
    else if (infinite > 0)
      rec.add(0.0, "median_decay_rate", std::string("inf_rate"));
    rec.add(0.0, "infinite_decay_rates", static_cast<double>(infinite));
    if (!bulk_ks.empty()) {
      const auto ly = lyapunov_thouless_check(L, dec, a, p, bulk_ks, collar);
      Vec fitted, predicted;
      std::size_t positive = 0;
      for (const auto& e : ly) {
        if (e.predicted > 0.0) ++positive;
        if (e.fitted_infinite) continue;
        fitted.push_back(e.fitted);
        predicted.push_back(e.predicted);
      }
      rec.add(0.0, "lyapunov_positive_predictions", static_cast<double>(positive));
      if (fitted.size() >= 3) rec.add(0.0, "lyapunov_correlation", stats::correlation(fitted, predicted));
    }
    const long mid = L.domain.first_site() + static_cast<long>(cfg.N / 2);
    const auto matches = truncation_eigen_match(L, mid, zeta, 30);
    double worst = 0.0;
    for (const auto& m : matches) worst = std::max(worst, m.gap);
    rec.add(0.0, "truncation_max_gap", worst);
    rec.add(0.0, "truncation_matches", static_cast<double>(matches.size()));
    return rec.out;
  });
  const Vec perfect = collect(out, "perfect_matching");
  const double count = std::accumulate(perfect.begin(), perfect.end(), 0.0);
  out.summary["zeta"] = zeta;
  out.summary["perfect_matchings"] = count;
  out.summary["replicas"] = cfg.replicas;
  const Vec rates = collect(out, "median_decay_rate");
  if (!rates.empty()) out.summary["median_decay_rate"] = stats::median(rates);
  out.summary["max_truncation_gap"] = max_of(collect(out, "truncation_max_gap"));
  out.summary["acceptance"]["AC5"] =
      criterion(count == static_cast<double>(cfg.replicas), {{"perfect", count}, {"replicas", cfg.replicas}});
  return out;
}

// ---------------------------------------------------------------- charges

ExperimentOutput run_charges(const ExperimentConfig& cfg) {
  const ThermalParams p = ThermalParams::make(cfg.beta, cfg.theta);
  const IntegratorConfig ic = cfg.integrator();
  const double width = cfg.window_width > 0.0 ? cfg.window_width : cfg.T;
  ExperimentOutput out;
  out.replicas = parallel_replicas(cfg.replicas, [&](std::size_t r) {
    Recorder rec = recorder(cfg, r);
    RngStream rng(cfg.seed, rec.out.replica);
    const FlaschkaState f0 = sample_open(p, cfg.N, rng);

    // Continuity under refinement of the sampling interval.
    IntegratorConfig fine = ic;
    fine.sample_every = 0.0025;
    const Trajectory tc = evolve(f0, fine, 1.0);
    rec.add(1.0, "first_charge_symbolic_residual", first_charge_symbolic_residual(tc));
    std::vector<long> sites;
    for (int q = 1; q <= 5; ++q) sites.push_back(f0.domain.first_site() + static_cast<long>(cfg.N * q / 6));
    for (int m = 1; m <= 3; ++m) {
      Vec logdt, logres;
      for (std::size_t stride : {1ul, 2ul, 4ul, 8ul}) {
        const Trajectory sub = subsample(tc, stride);
        double res = 0.0;
        for (long i : sites) res = std::max(res, charge_continuity_residual(sub, i, m));
        const double dt = sub.samples[1].t - sub.samples[0].t;
        rec.add(dt, "continuity_residual_m" + std::to_string(m), res);
        logdt.push_back(std::log(dt));
        logres.push_back(std::log(res));
      }
      rec.add(1.0, "continuity_slope_m" + std::to_string(m), stats::fit_line(logdt, logres).slope);
    }

    // Window sums at time T.
    IntegratorConfig ends = ic;
    ends.sample_every = cfg.T > 0.0 ? cfg.T : 0.0;
    const Trajectory traj = evolve(f0, ends, cfg.T);
    const std::size_t last = traj.size() - 1;
    const TodaState st = traj.state_at(last);
    const LaxMatrix L = build_lax(traj.samples[last]);
    const SpectralDecomposition dec = eig_tridiag(L);
    const LocalizationAssignment a = center_bijection(dec, cfg.zeta_for(cfg.N));
    for (int m = 0; m <= 4; ++m) {
      double total = 0.0, eig = 0.0;
      for (std::size_t x = 0; x < L.size(); ++x) total += local_charge(L, L.domain.site(x), m);
      for (double l : dec.eigenvalues) eig += std::pow(l, m);
      rec.add(cfg.T, "trace_identity_residual_m" + std::to_string(m), std::abs(total - eig));
    }
    const std::size_t collar = cfg.collar_for(cfg.N, cfg.T);
    const double qlo = st.q[collar], qhi = st.q[cfg.N - 1 - collar];
    Vec relatives;
    for (int m = 0; m <= 2; ++m) {
      Vec rel_m;
      for (double lo = qlo; lo + width <= qhi; lo += width) {
        try {
          const WindowSums w = charge_window_vs_eigsum(st, L, dec, a, lo, lo + width, m);
          rel_m.push_back(w.relative);
        } catch (const InvalidArgument&) {
        }
      }
      for (std::size_t w = 0; w < rel_m.size(); ++w)
        rec.add(cfg.T, "window_relative_m" + std::to_string(m) + "_w" + std::to_string(w), rel_m[w]);
      relatives.insert(relatives.end(), rel_m.begin(), rel_m.end());
    }
    rec.add(cfg.T, "windows", static_cast<double>(relatives.size()));

    // Flux balance across the middle bond needs a resolved trajectory.
    const long cut = f0.domain.first_site() + static_cast<long>(cfg.N / 2);
    IntegratorConfig dense = ic;
    dense.sample_every = std::max(ic.step, cfg.T / 200.0);
    const Trajectory tf = evolve(f0, dense, cfg.T);
    std::vector<SpectralDecomposition> two{eig_tridiag(build_lax(tf.samples.front())), eig_tridiag(build_lax(tf.samples.back()))};
    const CenterTrack tt = track_centers(two, {tf.samples.front().t, tf.samples.back().t}, cfg.zeta_for(cfg.N));
    for (int m = 1; m <= 2; ++m) {
      const FluxBalance fb = integrated_current_vs_flux(tf, tt, two.front().eigenvalues, cut, m);
      rec.add(cfg.T, "flux_residual_m" + std::to_string(m), fb.residual);
      rec.add(cfg.T, "flux_integrated_current_m" + std::to_string(m), fb.integrated_current);
      rec.add(cfg.T, "flux_under_resolved_m" + std::to_string(m), fb.under_resolved ? 1.0 : 0.0);
    }
    return rec.out;
  });
  double min_slope = std::numeric_limits<double>::infinity();
  for (int m = 1; m <= 3; ++m) {
    const Vec s = collect(out, "continuity_slope_m" + std::to_string(m));
    out.summary["min_continuity_slope_m" + std::to_string(m)] = min_of(s);
    min_slope = std::min(min_slope, min_of(s));
  }
  const double symbolic = max_of(collect(out, "first_charge_symbolic_residual"));
  double trace = 0.0;
  for (int m = 0; m <= 4; ++m) trace = std::max(trace, max_of(collect(out, "trace_identity_residual_m" + std::to_string(m))));
  // Windows pooled over replicas, one median per m; the criterion takes the worst m.
  double median = 0.0;
  std::size_t windows = 0;
  for (int m = 0; m <= 2; ++m) {
    const Vec v = collect_prefix(out, "window_relative_m" + std::to_string(m) + "_w");
    windows += v.size();
    const double med_m = v.empty() ? std::numeric_limits<double>::infinity() : stats::median(v);
    out.summary["median_window_relative_residual_m" + std::to_string(m)] = finite_or_sentinel(med_m);
    median = std::max(median, med_m);
  }
  out.summary["first_charge_symbolic_residual"] = symbolic;
  out.summary["max_trace_identity_residual"] = trace;
  out.summary["window_width"] = width;
  out.summary["windows"] = windows;
  out.summary["median_window_relative_residual"] = finite_or_sentinel(median);
  out.summary["acceptance"]["AC6"] = criterion(min_slope >= 1.9 && symbolic == 0.0,
                                               {{"min_slope", min_slope}, {"symbolic_residual", symbolic}});
  out.summary["acceptance"]["AC7"] = criterion(trace <= 1e-8 && median <= 0.02,
                                               {{"trace_residual", trace}, {"median_relative", finite_or_sentinel(median)}});
  return out;
}

// ---------------------------------------------------------------- scattering / velocity

struct EndpointData {
  FlaschkaState f0;
  Trajectory traj;
  SpectralDecomposition dec0, decT;
  LocalizationAssignment a0, aT;
  Vec Q0, QT;
};

EndpointData endpoints(const ExperimentConfig& cfg, const ThermalParams& p, RngStream& rng) {
  EndpointData d;
  d.f0 = sample_open(p, cfg.N, rng);
  IntegratorConfig ic = cfg.integrator();
  ic.sample_every = cfg.T > 0.0 ? cfg.T : 0.0;
  d.traj = evolve(d.f0, ic, cfg.T);
  d.dec0 = eig_tridiag(build_lax(d.traj.samples.front()));
  d.decT = eig_tridiag(build_lax(d.traj.samples.back()));
  const double zeta = cfg.zeta_for(cfg.N);
  CenterTrack tr = track_centers(std::vector<SpectralDecomposition>{d.dec0, d.decT}, d.traj.times(), zeta);
  d.a0 = tr.assignments.front();
  d.aT = tr.assignments.back();
  d.Q0 = quasiparticle_positions(d.a0, d.traj.state_at(0));
  d.QT = quasiparticle_positions(d.aT, d.traj.state_at(d.traj.size() - 1));
  return d;
}

ExperimentOutput run_scattering(const ExperimentConfig& cfg) {
  const ThermalParams p = ThermalParams::make(cfg.beta, cfg.theta);
  p.require_nonzero_alpha();
  const std::size_t collar = cfg.collar_for(cfg.N, cfg.T);
  ExperimentOutput out;
  out.replicas = parallel_replicas(cfg.replicas, [&](std::size_t r) {
    Recorder rec = recorder(cfg, r);
    RngStream rng(cfg.seed, rec.out.replica);
    const EndpointData d = endpoints(cfg, p, rng);
    const Vec& lam = d.dec0.eigenvalues;
    const ScatteringReport zero =
        scattering_report(d.Q0, d.a0.phi, d.Q0, d.a0.phi, lam, 0.0, p.alpha, d.f0.domain, collar);
    double zero_max = 0.0;
    for (const auto& e : zero.entries) zero_max = std::max(zero_max, std::abs(e.residual));
    const ScatteringReport rep =
        scattering_report(d.Q0, d.a0.phi, d.QT, d.aT.phi, lam, cfg.T, p.alpha, d.f0.domain, collar);
    rec.add(0.0, "max_abs_residual_t0", zero_max);
    rec.add(cfg.T, "median_normalized_residual", rep.median_normalized_bulk);
    rec.add(cfg.T, "max_abs_bulk_residual", rep.max_abs_bulk);
    rec.add(cfg.T, "displacement_scale", rep.displacement_scale);
    rec.add(cfg.T, "bulk_count", static_cast<double>(rep.bulk_count));
    rec.add(cfg.T, "collar", static_cast<double>(collar));
    std::size_t ties = 0;
    for (const auto& e : rep.entries) ties += e.tie ? 1 : 0;
    rec.add(cfg.T, "ties", static_cast<double>(ties));

    DetailTable table{"scattering_report.csv", {"k", "lambda", "Q0", "QT", "residual", "normalized_residual", "bulk_flag"}, {}};
    for (const auto& e : rep.entries) {
      table.rows.push_back({static_cast<double>(e.k), e.lambda, e.q0, e.qt, e.residual, e.normalized, e.bulk ? 1.0 : 0.0});
      if (e.bulk) rec.add(cfg.T, "normalized_residual_k" + std::to_string(e.k), e.normalized);
    }
    rec.out.tables.push_back(std::move(table));

    // Eigenvector decay relation at t = 0 on the bulk.
    const LaxMatrix L0 = build_lax(d.traj.samples.front());
    Vec decay;
    for (std::size_t k = 0; k < lam.size(); ++k)
      if (in_bulk(d.f0.domain, d.a0.phi[k], collar))
        decay.push_back(std::abs(eigvec_decay_relation_residual(L0, d.dec0, d.a0, k).residual));
    if (!decay.empty()) rec.add(0.0, "median_decay_relation_residual", stats::median(decay));
    return rec.out;
  });
  const Vec pooled = collect_prefix(out, "normalized_residual_k");
  const double median = pooled.empty() ? std::numeric_limits<double>::infinity() : stats::median(pooled);
  const double zero = max_of(collect(out, "max_abs_residual_t0"));
  out.summary["median_normalized_residual"] = finite_or_sentinel(median);
  out.summary["max_abs_residual_t0"] = zero;
  out.summary["collar"] = collar;
  out.summary["bulk_entries"] = pooled.size();
  const Vec decay = collect(out, "median_decay_relation_residual");
  if (!decay.empty()) out.summary["median_decay_relation_residual"] = stats::median(decay);
  out.summary["acceptance"]["AC8"] =
      criterion(zero == 0.0 && median <= 0.05, {{"max_abs_residual_t0", zero}, {"median_normalized", finite_or_sentinel(median)}});
  return out;
}

ExperimentOutput run_velocity(const ExperimentConfig& cfg) {
  const ThermalParams p = ThermalParams::make(cfg.beta, cfg.theta);
  p.require_nonzero_alpha();
  const std::size_t collar = cfg.collar_for(cfg.N, cfg.T);
  ExperimentOutput out;
  out.replicas = parallel_replicas(cfg.replicas, [&](std::size_t r) {
    Recorder rec = recorder(cfg, r);
    RngStream rng(cfg.seed, rec.out.replica);
    const EndpointData d = endpoints(cfg, p, rng);
    const Vec& lam = d.dec0.eigenvalues;
    const VelocitySolve vs = effective_velocity_solve(lam, p.alpha);
    double scale = 1.0;
    for (double l : lam) scale = std::max(scale, std::abs(l));
    const double row = velocity_row_residual(lam, p.alpha, vs.v);
    const double momentum = std::abs(stats::mean(vs.v) - stats::mean(lam));
    Vec shifted = lam;
    const double c = 0.375;
    for (double& x : shifted) x += c;
    const VelocitySolve vc = effective_velocity_solve(shifted, p.alpha);
    double affine = 0.0;
    for (std::size_t k = 0; k < lam.size(); ++k) affine = std::max(affine, std::abs(vc.v[k] - vs.v[k] - c));
    rec.add(0.0, "row_residual_scaled", row / scale);
    rec.add(0.0, "momentum_residual", momentum);
    rec.add(0.0, "affine_residual", affine);
    rec.add(0.0, "condition_estimate", vs.condition);

    VelocityField field;
    field.lambda = lam;
    field.solved = vs.v;
    DetailTable table{"velocity.csv", {"k", "lambda", "v_solved", "v_empirical", "bulk_flag"}, {}};
    for (std::size_t k = 0; k < lam.size(); ++k) {
      const double emp = cfg.T > 0.0 ? (d.QT[k] - d.Q0[k]) / cfg.T : 0.0;
      const bool bulk = in_bulk(d.f0.domain, d.a0.phi[k], collar);
      field.empirical.push_back(emp);
      field.bulk.push_back(bulk);
      table.rows.push_back({static_cast<double>(k), lam[k], vs.v[k], emp, bulk ? 1.0 : 0.0});
    }
    rec.out.tables.push_back(std::move(table));
    const VelocityComparison cmp = velocity_compare(field);
    rec.add(cfg.T, "correlation", cmp.correlation);
    rec.add(cfg.T, "rms_relative_error", cmp.rms_relative_error);
    rec.add(cfg.T, "bulk_count", static_cast<double>(cmp.count));
    return rec.out;
  });
  const double row = max_of(collect(out, "row_residual_scaled"));
  const double mom = max_of(collect(out, "momentum_residual"));
  const double aff = max_of(collect(out, "affine_residual"));
  const double corr = min_of(collect(out, "correlation"));
  out.summary["max_row_residual_scaled"] = row;
  out.summary["max_momentum_residual"] = mom;
  out.summary["max_affine_residual"] = aff;
  out.summary["min_correlation"] = corr;
  out.summary["max_rms_relative_error"] = max_of(collect(out, "rms_relative_error"));
  out.summary["collar"] = collar;
  out.summary["acceptance"]["AC10"] = criterion(row <= 1e-8 && mom <= 1e-8 && aff <= 1e-8 && corr >= 0.99,
                                                {{"row_residual", row}, {"momentum_residual", mom}, {"affine_residual", aff}, {"correlation", corr}});
  return out;
}

// ---------------------------------------------------------------- compare-domains

ExperimentOutput run_compare_domains(const ExperimentConfig& cfg) {
  const ThermalParams p = ThermalParams::make(cfg.beta, cfg.theta);
  const IntegratorConfig ic = cfg.integrator();
  for (long K : cfg.K_grid)
    if (K < 0 || 2 * K >= static_cast<long>(cfg.N)) throw InvalidArgument("K_grid entry leaves an empty window");
  ExperimentOutput out;
  out.replicas = parallel_replicas(cfg.replicas, [&](std::size_t r) {
    Recorder rec = recorder(cfg, r);
    DecayTable t = open_vs_periodic(p, cfg.N, cfg.T, cfg.K_grid, 1, cfg.seed, ic, rec.out.replica);
    for (const auto& row : t.rows) rec.add(cfg.T, "sup_difference_K" + std::to_string(row.K), row.per_replica.front());
    return rec.out;
  });
  DecayTable table;
  json rows = json::array();
  for (long K : cfg.K_grid) {
    DecayRow row{K, 0.0, collect(out, "sup_difference_K" + std::to_string(K))};
    row.median = stats::median(row.per_replica);
    rows.push_back({{"K", K}, {"median", row.median}});
    table.rows.push_back(std::move(row));
  }
  fit_decay(table);
  out.summary["decay_table"] = rows;
  out.summary["fitted_rate"] = table.fitted_rate;
  out.summary["fit_r2"] = table.fit_r2;
  out.summary["fit_points"] = table.fit_points;
  out.summary["fit_floor"] = table.fit_floor;
  out.summary["reference_rate"] = 0.2;
  out.summary["acceptance"]["AC9"] = criterion(table.fit_points >= 2 && table.fitted_rate >= 0.2,
                                               {{"fitted_rate", table.fitted_rate}, {"fit_points", table.fit_points}});
  return out;
}

// ---------------------------------------------------------------- invariance

ExperimentOutput run_invariance(const ExperimentConfig& cfg) {
  const ThermalParams p = ThermalParams::make(cfg.beta, cfg.theta);
  IntegratorConfig ic = cfg.integrator();
  ic.sample_every = cfg.T > 0.0 ? cfg.T : 0.0;
  ExperimentOutput out;
  std::vector<Vec> a0(cfg.replicas), b0(cfg.replicas), aT(cfg.replicas), bT(cfg.replicas), bS(cfg.replicas);
  out.replicas = parallel_replicas(cfg.replicas, [&](std::size_t r) {
    Recorder rec = recorder(cfg, r);
    RngStream rng(cfg.seed, rec.out.replica);
    FlaschkaState f = sample_periodic(p, cfg.N, rng);
    const FlaschkaState end = cfg.T > 0.0 ? evolve(f, ic, cfg.T).samples.back() : f;
    a0[r] = f.a;
    b0[r] = f.b;
    aT[r] = end.a;
    bT[r] = end.b;
    FlaschkaState shifted = f;
    for (double& x : shifted.b) x += 1.0;
    bS[r] = cfg.T > 0.0 ? evolve(shifted, ic, cfg.T).samples.back().b : shifted.b;
    const auto inv0 = torus_invariants(f);
    const auto invT = torus_invariants(end);
    rec.add(cfg.T, "invariant_log_drift", invT.first - inv0.first);
    rec.add(cfg.T, "invariant_quadratic_drift", invT.second - inv0.second);
    return rec.out;
  });
  auto pool = [](const std::vector<Vec>& parts) {
    Vec v;
    for (const auto& x : parts) v.insert(v.end(), x.begin(), x.end());
    return v;
  };
  const stats::KsResult ka = stats::ks_two_sample(pool(a0), pool(aT));
  const stats::KsResult kb = stats::ks_two_sample(pool(b0), pool(bT));
  const stats::KsResult ks = stats::ks_two_sample(pool(b0), pool(bS));

  // Spacing mean from independent draws on an auxiliary stream.
  RngStream aux(cfg.seed, kAuxStream + cfg.first_replica);
  Vec r(cfg.draws);
  for (double& x : r) x = -2.0 * std::log(sample_a(p, aux));
  const double mean_r = stats::mean(r), se = stats::standard_error(r);
  out.summary["alpha"] = p.alpha;
  out.summary["mean_r"] = mean_r;
  out.summary["mean_r_standard_error"] = se;
  out.summary["ks_a"] = {{"statistic", ka.statistic}, {"p_value", ka.p_value}};
  out.summary["ks_b"] = {{"statistic", kb.statistic}, {"p_value", kb.p_value}};
  out.summary["control_shifted_b"] = {{"statistic", ks.statistic}, {"p_value", ks.p_value}};
  out.summary["max_invariant_drift"] = std::max(max_of(collect(out, "invariant_log_drift")), max_of(collect(out, "invariant_quadratic_drift")));
  const bool pass = std::abs(mean_r - p.alpha) <= 3.0 * se && ka.p_value > 0.01 && kb.p_value > 0.01;
  out.summary["acceptance"]["AC11"] = criterion(pass, {{"mean_r", mean_r}, {"alpha", p.alpha}, {"standard_error", se},
                                                       {"p_a", ka.p_value}, {"p_b", kb.p_value}});
  return out;
}

void write_csv_cell(std::ostream& os, const Cell& c) {
  if (const double* d = std::get_if<double>(&c))
    os << format_double(*d);
  else
    os << std::get<std::string>(c);
}

}  // namespace

std::vector<long> default_K_grid() {
  std::vector<long> g(71);
  std::iota(g.begin(), g.end(), 10L);
  return g;
}

IntegratorConfig ExperimentConfig::integrator() const {
  IntegratorConfig ic;
  ic.step = step;
  ic.scheme = scheme == "rk45" ? Scheme::RK45Adaptive : Scheme::RK4Fixed;
  ic.rel_tol = rel_tol;
  ic.abs_tol = abs_tol;
  ic.sample_every = sample_every;
  return ic;
}

double ExperimentConfig::zeta_for(std::size_t n) const { return zeta > 0.0 ? zeta : default_zeta(n); }

std::size_t ExperimentConfig::collar_for(std::size_t n, double horizon) const {
  if (collar_sites >= 0) return static_cast<std::size_t>(collar_sites);
  return bulk_collar(n, horizon, collar_fraction);
}

json ExperimentConfig::to_json() const {
  return {{"experiment", experiment}, {"beta", beta}, {"theta", theta}, {"N", N}, {"T", T}, {"step", step},
          {"scheme", scheme}, {"rel_tol", rel_tol}, {"abs_tol", abs_tol}, {"sample_every", sample_every},
          {"zeta", zeta}, {"collar_fraction", collar_fraction}, {"collar_sites", collar_sites},
          {"replicas", replicas}, {"first_replica", first_replica}, {"seed", seed}, {"output_dir", output_dir},
          {"draws", draws}, {"K_grid", K_grid}, {"window_width", window_width}, {"delta_min", delta_min},
          {"delta_max", delta_max}};
}

void ExperimentConfig::validate() const {
  const auto names = experiment_names();
  if (std::find(names.begin(), names.end(), experiment) == names.end())
    throw InvalidArgument("unknown experiment: " + experiment);
  if (!(beta > 0.0) || !(theta > 0.0)) throw InvalidArgument("beta and theta must be positive");
  if (N == 0) throw InvalidArgument("N must be positive");
  if (!(T >= 0.0)) throw InvalidArgument("T must be nonnegative");
  if (replicas == 0) throw InvalidArgument("replicas must be positive");
  if (scheme != "rk4" && scheme != "rk45") throw InvalidArgument("scheme must be rk4 or rk45");
  if (zeta < 0.0 || zeta > 1.0) throw InvalidArgument("zeta must lie in (0, 1] or be 0 for (2N)^-1");
  if (!(collar_fraction >= 0.0 && collar_fraction < 0.5)) throw InvalidArgument("collar_fraction must lie in [0, 0.5)");
  if (!(delta_min > 0.0 && delta_max > delta_min)) throw InvalidArgument("need 0 < delta_min < delta_max");
  if (draws < 2) throw InvalidArgument("draws must be at least 2");
  integrator().validate();
  if (experiment == "scattering" || experiment == "velocity") ThermalParams::make(beta, theta).require_nonzero_alpha();
}

std::vector<std::string> config_keys() {
  return {"experiment", "beta", "theta", "N", "T", "step", "scheme", "rel_tol", "abs_tol", "sample_every", "zeta",
          "collar_fraction", "collar_sites", "replicas", "first_replica", "seed", "output_dir", "draws", "K_grid",
          "window_width", "delta_min", "delta_max"};
}

void apply_override(ExperimentConfig& c, const std::string& key, const std::string& v) {
  if (key == "experiment") c.experiment = v;
  else if (key == "beta") c.beta = parse_number<double>(key, v);
  else if (key == "theta") c.theta = parse_number<double>(key, v);
  else if (key == "N") c.N = parse_number<std::size_t>(key, v);
  else if (key == "T") c.T = parse_number<double>(key, v);
  else if (key == "step") c.step = parse_number<double>(key, v);
  else if (key == "scheme") c.scheme = v;
  else if (key == "rel_tol") c.rel_tol = parse_number<double>(key, v);
  else if (key == "abs_tol") c.abs_tol = parse_number<double>(key, v);
  else if (key == "sample_every") c.sample_every = parse_number<double>(key, v);
  else if (key == "zeta") c.zeta = parse_number<double>(key, v);
  else if (key == "collar_fraction") c.collar_fraction = parse_number<double>(key, v);
  else if (key == "collar_sites") c.collar_sites = parse_number<long>(key, v);
  else if (key == "replicas") c.replicas = parse_number<std::size_t>(key, v);
  else if (key == "first_replica") c.first_replica = parse_number<std::uint64_t>(key, v);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "output_dir") c.output_dir = v;
  else if (key == "draws") c.draws = parse_number<std::size_t>(key, v);
  else if (key == "K_grid") c.K_grid = parse_long_list(key, v);
  else if (key == "window_width") c.window_width = parse_number<double>(key, v);
  else if (key == "delta_min") c.delta_min = parse_number<double>(key, v);
  else if (key == "delta_max") c.delta_max = parse_number<double>(key, v);
  else throw InvalidArgument("unknown configuration key: " + key);
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig base) {
  if (!j.is_object()) throw InvalidArgument("configuration must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "K_grid") {
      if (!value.is_array()) throw InvalidArgument("K_grid must be an array");
      base.K_grid.clear();
      for (const auto& x : value) base.K_grid.push_back(x.get<long>());
      continue;
    }
    std::string text;
    if (value.is_string()) text = value.get<std::string>();
    else if (value.is_number_integer()) text = std::to_string(value.get<long long>());
    else if (value.is_number_unsigned()) text = std::to_string(value.get<unsigned long long>());
    else if (value.is_number()) {
      std::ostringstream os;
      os.precision(17);
      os << value.get<double>();
      text = os.str();
    } else {
      throw InvalidArgument("unsupported value for " + key);
    }
    apply_override(base, key, text);
  }
  return base;
}

std::vector<std::string> experiment_names() {
  return {"sample", "evolve", "spectrum", "centers", "charges", "scattering", "thouless", "velocity",
          "compare-domains", "invariance"};
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::string& e = cfg.experiment;
  ExperimentOutput out;
  if (e == "sample") out = run_sample(cfg);
  else if (e == "evolve") out = run_evolve(cfg);
  else if (e == "spectrum") out = run_spectrum(cfg);
  else if (e == "centers") out = run_centers(cfg);
  else if (e == "charges") out = run_charges(cfg);
  else if (e == "scattering") out = run_scattering(cfg);
  else if (e == "thouless") out = run_thouless(cfg);
  else if (e == "velocity") out = run_velocity(cfg);
  else if (e == "compare-domains") out = run_compare_domains(cfg);
  else out = run_invariance(cfg);
  out.summary["experiment"] = e;
  out.summary["replicas"] = cfg.replicas;
  out.summary["seed"] = cfg.seed;
  if (!out.summary.contains("acceptance")) out.summary["acceptance"] = json::object();
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "undefined";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = cfg.to_json().dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentOutput& out) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "results.csv");
    os << "experiment,replica,time,key,value\n";
    for (const auto& rep : out.replicas)
      for (const auto& row : rep.rows) {
        os << row.experiment << ',' << row.replica << ',' << format_double(row.time) << ',' << row.key << ',';
        write_csv_cell(os, row.value);
        os << '\n';
      }
  }
  for (const auto& rep : out.replicas) {
    if (rep.tables.empty()) continue;
    const fs::path sub = dir / ("replica_" + std::to_string(rep.replica));
    fs::create_directories(sub);
    for (const auto& t : rep.tables) {
      std::ofstream os(sub / t.filename);
      for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
      os << '\n';
      for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
          if (c) os << ',';
          write_csv_cell(os, row[c]);
        }
        os << '\n';
      }
    }
  }
  {
    std::ofstream os(dir / "summary.json");
    os << out.summary.dump(2) << '\n';
  }
  {
    json m = {{"config", cfg.to_json()}, {"config_hash", config_hash(cfg)}, {"seed", cfg.seed},
              {"stream_ids", {cfg.first_replica, cfg.first_replica + cfg.replicas - 1}}};
    std::ofstream os(dir / "manifest.json");
    os << m.dump(2) << '\n';
  }
}

std::size_t worker_count() {
  std::size_t n = 0;
  if (const char* env = std::getenv("TODA_LAB_THREADS")) n = static_cast<std::size_t>(std::strtoul(env, nullptr, 10));
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

std::vector<ReplicaOutput> parallel_replicas(std::size_t count, const std::function<ReplicaOutput(std::size_t)>& fn) {
  std::vector<ReplicaOutput> results(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t r = next++; r < count; r = next++) {
      try {
        results[r] = fn(r);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(worker_count(), count);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace toda
