#include "todalab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "todalab/error.hpp"

namespace toda {

namespace {

bool all_finite(const Vec& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// y = (a[0..n), b[0..n), q_first); dy has the same layout.
void rhs_kernel(bool torus, std::size_t n, const double* y, double* dy) {
  const double* a = y;
  const double* b = y + n;
  double* da = dy;
  double* db = dy + n;
  for (std::size_t j = 0; j + 1 < n; ++j) da[j] = 0.5 * a[j] * (b[j] - b[j + 1]);
  da[n - 1] = torus ? 0.5 * a[n - 1] * (b[n - 1] - b[0]) : 0.0;
  double left = torus ? a[n - 1] : 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    db[j] = left * left - a[j] * a[j];
    left = a[j];
  }
  dy[2 * n] = b[0];
}

struct System {
  bool torus;
  std::size_t n;
  void operator()(const Vec& y, Vec& dy) const { rhs_kernel(torus, n, y.data(), dy.data()); }
};

void check_state(const Vec& y, double t) {
  if (!all_finite(y)) {
    std::ostringstream os;
    os << "non-finite state at t=" << t;
    throw NumericalError(os.str());
  }
}

void rk4_step(const System& sys, Vec& y, double h, Vec& k1, Vec& k2, Vec& k3, Vec& k4, Vec& tmp) {
  const std::size_t m = y.size();
  sys(y, k1);
  for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
  sys(tmp, k2);
  for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
  sys(tmp, k3);
  for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + h * k3[i];
  sys(tmp, k4);
  for (std::size_t i = 0; i < m; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

// Dormand-Prince 5(4) integration from t0 to t1, carrying the step size across calls.
void dopri_advance(const System& sys, Vec& y, double t0, double t1, double& h,
                   const IntegratorConfig& cfg) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  (void)c2, (void)c3, (void)c4, (void)c5;
  const std::size_t m = y.size();
  Vec k1(m), k2(m), k3(m), k4(m), k5(m), k6(m), k7(m), tmp(m), y5(m);
  double t = t0;
  while (t < t1) {
    double step = std::min(h, t1 - t);
    bool last = step >= t1 - t;
    sys(y, k1);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + step * a21 * k1[i];
    sys(tmp, k2);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + step * (a31 * k1[i] + a32 * k2[i]);
    sys(tmp, k3);
    for (std::size_t i = 0; i < m; ++i)
      tmp[i] = y[i] + step * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    sys(tmp, k4);
    for (std::size_t i = 0; i < m; ++i)
      tmp[i] = y[i] + step * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    sys(tmp, k5);
    for (std::size_t i = 0; i < m; ++i)
      tmp[i] = y[i] + step * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    sys(tmp, k6);
    for (std::size_t i = 0; i < m; ++i)
      y5[i] = y[i] + step * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    sys(y5, k7);
    double err = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double e = step * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(y5[i]));
      err = std::max(err, std::abs(e) / sc);
    }
    if (!std::isfinite(err)) err = 1e10;
    if (err <= 1.0) {
      y.swap(y5);
      t = last ? t1 : t + step;
      check_state(y, t);
    }
    double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    double next = step * factor;
    if (err <= 1.0) {
      // Keep the carried step from collapsing because of a short final step.
      h = last ? std::max(h, next) : next;
    } else {
      h = next;
      if (h < cfg.min_step) {
        std::ostringstream os;
        os << "stiffness failure at t=" << t << " (step " << h << " below minimum " << cfg.min_step
           << ")";
        throw NumericalError(os.str());
      }
    }
  }
}

DriftRecord invariants_of(const FlaschkaState& f) {
  return {f.t, hamiltonian(f), trace_l(f), trace_l2(f)};
}

}  // namespace

void FlaschkaState::validate() const {
  if (a.size() != domain.size() || b.size() != domain.size())
    throw InvalidArgument("Flaschka vectors do not match the domain size");
  if (!all_finite(a) || !all_finite(b)) throw InvalidArgument("non-finite Flaschka state");
  for (double x : a)
    if (x < 0.0) throw InvalidArgument("negative a entry");
  if (domain.is_open() && a.back() != 0.0)
    throw InvalidArgument("open domain requires the last a entry to be 0");
}

void IntegratorConfig::validate() const {
  if (!(step > 0.0)) throw InvalidArgument("integrator step must be positive");
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw InvalidArgument("tolerances must be positive");
  if (sample_every < 0.0) throw InvalidArgument("sample_every must be nonnegative");
}

Vec Trajectory::times() const {
  Vec t;
  t.reserve(samples.size());
  for (const auto& s : samples) t.push_back(s.t);
  return t;
}

TodaState Trajectory::state_at(std::size_t s) const {
  return state_from_flaschka(samples.at(s), q_first.at(s));
}

double Trajectory::max_drift() const {
  double m = 0.0;
  for (const auto& d : conserved_drift)
    m = std::max({m, std::abs(d.hamiltonian), std::abs(d.trace1), std::abs(d.trace2)});
  return m;
}

FlaschkaState flaschka_from_state(const TodaState& s) {
  const std::size_t n = s.domain.size();
  if (s.p.size() != n || s.q.size() != n) throw InvalidArgument("state vectors do not match the domain size");
  FlaschkaState f{s.domain, Vec(n, 0.0), s.p, s.t};
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double r = s.q[i + 1] - s.q[i];
    if (!std::isfinite(r)) throw InvalidArgument("non-finite spacing");
    f.a[i] = std::exp(-0.5 * r);
  }
  if (s.domain.is_torus()) {
    double r = s.q[0] + s.domain.upsilon() - s.q[n - 1];
    if (!std::isfinite(r)) throw InvalidArgument("non-finite spacing");
    f.a[n - 1] = std::exp(-0.5 * r);
  }
  return f;
}

double anchored_first_position(const FlaschkaState& f) {
  if (f.domain.is_torus() || !f.domain.contains(0)) return 0.0;
  double q = 0.0;
  for (std::size_t i = 0; i < f.domain.index(0); ++i) {
    if (f.a[i] <= 0.0) throw InvalidArgument("degenerate spacing (infinite gap)");
    q += 2.0 * std::log(f.a[i]);
  }
  return q;
}

TodaState state_from_flaschka(const FlaschkaState& f) {
  if (f.domain.is_open() && !f.domain.contains(0))
    throw InvalidArgument("anchor site 0 is outside the open domain");
  TodaState s = state_from_flaschka(f, anchored_first_position(f));
  const double q0 = s.q[f.domain.index(0)];
  for (double& x : s.q) x -= q0;
  return s;
}

TodaState state_from_flaschka(const FlaschkaState& f, double q_first) {
  const std::size_t n = f.domain.size();
  TodaState s{f.domain, f.b, Vec(n, 0.0), f.t};
  s.q[0] = q_first;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (f.a[i] <= 0.0) throw InvalidArgument("degenerate spacing (infinite gap)");
    s.q[i + 1] = s.q[i] - 2.0 * std::log(f.a[i]);
  }
  if (f.domain.is_torus()) {
    if (f.a[n - 1] <= 0.0) throw InvalidArgument("degenerate spacing (infinite gap)");
    double upsilon = 0.0;
    for (double x : f.a) upsilon -= 2.0 * std::log(x);
    s.domain = f.domain.with_upsilon(upsilon);
  }
  return s;
}

std::pair<Vec, Vec> toda_rhs(const FlaschkaState& f) {
  const std::size_t n = f.domain.size();
  if (!all_finite(f.a) || !all_finite(f.b)) throw InvalidArgument("non-finite Flaschka state");
  Vec y(2 * n + 1), dy(2 * n + 1);
  std::copy(f.a.begin(), f.a.end(), y.begin());
  std::copy(f.b.begin(), f.b.end(), y.begin() + n);
  rhs_kernel(f.domain.is_torus(), n, y.data(), dy.data());
  return {Vec(dy.begin(), dy.begin() + n), Vec(dy.begin() + n, dy.begin() + 2 * n)};
}

double hamiltonian(const TodaState& s) {
  const std::size_t n = s.domain.size();
  double h = 0.0;
  for (std::size_t i = 0; i < n; ++i) h += 0.5 * s.p[i] * s.p[i];
  for (std::size_t i = 0; i + 1 < n; ++i) h += std::exp(s.q[i] - s.q[i + 1]);
  if (s.domain.is_torus()) h += std::exp(s.q[n - 1] - s.q[0] - s.domain.upsilon());
  return h;
}

double hamiltonian(const FlaschkaState& f) { return 0.5 * trace_l2(f); }

double trace_l(const FlaschkaState& f) {
  double s = 0.0;
  for (double x : f.b) s += x;
  return s;
}

double trace_l2(const FlaschkaState& f) {
  double s = 0.0;
  for (double x : f.b) s += x * x;
  for (double x : f.a) s += 2.0 * x * x;
  return s;
}

std::pair<double, double> torus_invariants(const FlaschkaState& f) {
  if (!f.domain.is_torus()) throw InvalidArgument("torus invariants need a torus domain");
  double logs = 0.0;
  for (double x : f.a) {
    if (x <= 0.0) throw NumericalError("log of zero");
    logs += std::log(x);
  }
  return {logs, trace_l2(f)};
}

Trajectory evolve(const FlaschkaState& f0, const IntegratorConfig& cfg, double T,
                  std::optional<double> q_first0) {
  cfg.validate();
  f0.validate();
  if (!(T >= 0.0)) throw InvalidArgument("T must be nonnegative");
  const std::size_t n = f0.domain.size();
  const System sys{f0.domain.is_torus(), n};

  double dt = cfg.sample_every > 0.0 ? cfg.sample_every : T / 100.0;
  dt = std::max(dt, cfg.step);
  std::vector<double> grid{0.0};
  if (T > 0.0) {
    auto m = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
    for (std::size_t s = 1; s < m; ++s) grid.push_back(static_cast<double>(s) * dt);
    grid.push_back(T);
  }

  Vec y(2 * n + 1);
  std::copy(f0.a.begin(), f0.a.end(), y.begin());
  std::copy(f0.b.begin(), f0.b.end(), y.begin() + n);
  y[2 * n] = q_first0 ? *q_first0 : anchored_first_position(f0);

  Trajectory traj;
  traj.samples.reserve(grid.size());
  const DriftRecord ref = invariants_of(f0);
  auto record = [&](double t) {
    FlaschkaState f{f0.domain, Vec(y.begin(), y.begin() + n), Vec(y.begin() + n, y.begin() + 2 * n),
                    f0.t + t};
    DriftRecord d = invariants_of(f);
    traj.conserved_drift.push_back(
        {f.t, d.hamiltonian - ref.hamiltonian, d.trace1 - ref.trace1, d.trace2 - ref.trace2});
    traj.samples.push_back(std::move(f));
    traj.q_first.push_back(y[2 * n]);
  };
  record(0.0);

  Vec k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size()), tmp(y.size());
  double h_adapt = cfg.step;
  for (std::size_t s = 1; s < grid.size(); ++s) {
    double span = grid[s] - grid[s - 1];
    if (cfg.scheme == Scheme::RK4Fixed) {
      auto sub = static_cast<std::size_t>(std::ceil(span / cfg.step - 1e-9));
      sub = std::max<std::size_t>(sub, 1);
      double h = span / static_cast<double>(sub);
      for (std::size_t k = 0; k < sub; ++k) rk4_step(sys, y, h, k1, k2, k3, k4, tmp);
      check_state(y, grid[s]);
    } else {
      dopri_advance(sys, y, grid[s - 1], grid[s], h_adapt, cfg);
    }
    record(grid[s]);
  }
  return traj;
}

}  // namespace toda
