#include "todalab/domain_compare.hpp"

#include <algorithm>
#include <cmath>

#include "todalab/error.hpp"
#include "todalab/stats.hpp"

namespace toda {

ComparisonMetrics overlap_divergence(const Trajectory& A, const Trajectory& B, long lo, long hi, long b_shift) {
  if (A.size() != B.size()) throw InvalidArgument("mismatched sampling");
  for (std::size_t s = 0; s < A.size(); ++s)
    if (std::abs(A.samples[s].t - B.samples[s].t) > 1e-12 * std::max(1.0, std::abs(A.samples[s].t)))
      throw InvalidArgument("mismatched sampling");
  if (lo > hi) throw InvalidArgument("empty window");
  const DomainSpec& da = A.domain();
  const DomainSpec& db = B.domain();
  for (long x : {lo, hi}) {
    if (!da.contains(x)) throw InvalidArgument("window outside the first domain");
    if (db.is_open() && !db.contains(x + b_shift)) throw InvalidArgument("window outside the second domain");
  }
  ComparisonMetrics m;
  m.lo = lo;
  m.hi = hi;
  double g = 0.0, h = 0.0;
  for (std::size_t s = 0; s < A.size(); ++s) {
    const auto& fa = A.samples[s];
    const auto& fb = B.samples[s];
    double da_max = 0.0, db_max = 0.0, a1 = 0.0, a2 = 0.0, b1 = 0.0, b2 = 0.0;
    for (long x = lo; x <= hi; ++x) {
      const std::size_t ia = da.index(x), ib = db.index(x + b_shift);
      da_max = std::max(da_max, std::abs(fa.a[ia] - fb.a[ib]));
      db_max = std::max(db_max, std::abs(fa.b[ia] - fb.b[ib]));
      a1 = std::max(a1, std::abs(fa.a[ia]));
      a2 = std::max(a2, std::abs(fb.a[ib]));
      b1 = std::max(b1, std::abs(fa.b[ia]));
      b2 = std::max(b2, std::abs(fb.b[ib]));
    }
    g = std::max(g, da_max + db_max);
    h = std::max(h, 6.0 * (a1 + a2 + b1 + b2));
    m.times.push_back(fa.t);
    m.G.push_back(g);
    m.H.push_back(h);
  }
  return m;
}

CoupledPair coupled_open_torus(const ThermalParams& p, std::size_t n, RngStream& rng) {
  CoupledPair c;
  c.open = sample_open(p, n, rng);
  c.torus = c.open;
  c.torus.domain = DomainSpec::torus(n);
  c.torus.a[n - 1] = sample_a(p, rng);
  double upsilon = 0.0;
  for (double x : c.torus.a) upsilon -= 2.0 * std::log(x);
  c.torus.domain = c.torus.domain.with_upsilon(upsilon);
  return c;
}

void fit_decay(DecayTable& table) {
  Vec k, y;
  for (const auto& r : table.rows) {
    if (r.median >= table.fit_floor) {
      k.push_back(static_cast<double>(r.K));
      y.push_back(std::log(r.median));
    }
  }
  table.fit_points = k.size();
  if (k.size() < 2) {
    table.fitted_rate = 0.0;
    table.fit_r2 = 0.0;
    return;
  }
  stats::LineFit f = stats::fit_line(k, y);
  table.fitted_rate = -f.slope;
  table.fit_r2 = f.r2;
}

DecayTable open_vs_periodic(const ThermalParams& p, std::size_t n, double T, const std::vector<long>& K_grid,
                            std::size_t replicas, std::uint64_t seed, const IntegratorConfig& cfg,
                            std::uint64_t first_replica) {
  DecayTable table;
  for (long K : K_grid) table.rows.push_back({K, 0.0, {}});
  for (std::size_t r = 0; r < replicas; ++r) {
    RngStream rng(seed, first_replica + r);
    CoupledPair c = coupled_open_torus(p, n, rng);
    const Trajectory A = evolve(c.open, cfg, T);
    const Trajectory B = evolve(c.torus, cfg, T);
    const DomainSpec& d = c.open.domain;
    for (auto& row : table.rows) {
      const long lo = d.first_site() + row.K, hi = d.last_site() - row.K;
      if (lo > hi) throw InvalidArgument("collar K leaves an empty window");
      ComparisonMetrics m = overlap_divergence(A, B, lo, hi, -d.first_site());
      row.per_replica.push_back(m.G.back());
    }
  }
  for (auto& row : table.rows) row.median = stats::median(row.per_replica);
  fit_decay(table);
  return table;
}

}  // namespace toda
