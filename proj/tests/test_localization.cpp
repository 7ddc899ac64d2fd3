#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "todalab/error.hpp"
#include "todalab/localization.hpp"
#include "todalab/thermal.hpp"

using namespace toda;

namespace {

SpectralDecomposition thermal_dec(std::size_t n, std::uint64_t stream, LaxMatrix* out = nullptr) {
  RngStream rng(29, stream);
  auto L = build_lax(sample_open(ThermalParams::make(1.0, 1.0), n, rng));
  if (out) *out = L;
  return eig_tridiag(L);
}

}  // namespace

TEST_CASE("centers of basis and uniform vectors") {
  auto L = make_tridiagonal({2.0, -1.0, 5.0, 0.5}, {0.0, 0.0, 0.0});
  auto d = eig_tridiag(L);
  // eigenvalue 5 sits at storage index 2
  CHECK(centers(d, 0, 0.5) == std::vector<long>{2});

  FlaschkaState u{DomainSpec::torus(4), {1.0, 1.0, 1.0, 1.0}, {0.0, 0.0, 0.0, 0.0}, 0.0};
  auto du = eig_tridiag(build_lax(u));
  CHECK(du.eigenvalues[0] == doctest::Approx(2.0));
  CHECK(centers(du, 0, 0.5 - 1e-12).size() == 4);
  CHECK(centers(du, 0, 0.5 + 1e-9).empty());
  CHECK_THROWS_AS(centers(du, 0, 0.0), InvalidArgument);
}

TEST_CASE("bijection for a diagonal matrix sorts the eigenvalues") {
  auto L = make_tridiagonal({2.0, -1.0, 5.0, 0.5}, {0.0, 0.0, 0.0}, 10);
  auto a = center_bijection(eig_tridiag(L), 0.5);
  CHECK(a.phi == std::vector<long>{12, 10, 13, 11});
  for (double w : a.witness) CHECK(w == 1.0);
}

TEST_CASE("bijection failure reports the matching size") {
  // Two eigenvectors share their only admissible site.
  SpectralDecomposition d;
  d.domain = DomainSpec::open(0, 1);
  d.eigenvalues = {1.0, -1.0};
  d.vectors.resize(2, 2);
  d.vectors << 1.0, 1.0, 0.0, 0.0;
  try {
    center_bijection(d, 0.5);
    CHECK(false);
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("max matching size = 1") != std::string::npos);
  }
}

TEST_CASE("thermal bijections are perfect and valid") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto d = thermal_dec(256, s);
    const double zeta = default_zeta(256);
    auto a = center_bijection(d, zeta);
    std::vector<long> sorted = a.phi;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
    for (std::size_t k = 0; k < d.size(); ++k) {
      CHECK(std::abs(d.u(k, a.phi[k])) >= zeta);
      CHECK(a.witness[k] == std::abs(d.u(k, a.phi[k])));
    }
    // Unitarity accounting over a block of sites.
    std::vector<long> block(40);
    std::iota(block.begin(), block.end(), d.domain.first_site() + 100);
    double mass = 0.0;
    for (long i : block)
      for (std::size_t k = 0; k < d.size(); ++k) mass += d.u(k, i) * d.u(k, i);
    CHECK(mass == doctest::Approx(40.0).epsilon(1e-10));
  }
}

TEST_CASE("center sets are small compared with N") {
  auto d = thermal_dec(256, 7);
  std::vector<double> sizes;
  for (std::size_t k = 0; k < d.size(); ++k) sizes.push_back(static_cast<double>(centers(d, k, default_zeta(256)).size()));
  std::nth_element(sizes.begin(), sizes.begin() + 128, sizes.end());
  CHECK(sizes[128] < 256.0 / 4.0);
}

TEST_CASE("decay profile edge cases") {
  auto L = make_tridiagonal({2.0, -1.0, 5.0, 0.5, 1.5, -3.0, 0.1, 4.0}, Vec(7, 0.0));
  auto d = eig_tridiag(L);
  auto a = center_bijection(d, 0.5);
  auto p = decay_profile(L, d, 0, a, 1);
  CHECK(p.floor_fraction == 1.0);
  CHECK(std::isinf(p.rate));

  FlaschkaState u{DomainSpec::torus(8), Vec(8, 1.0), Vec(8, 0.0), 0.0};
  auto Lu = build_lax(u);
  auto du = eig_tridiag(Lu);
  LocalizationAssignment au;
  au.zeta = 0.1;
  au.phi.assign(8, 0);
  au.witness.assign(8, 1.0);
  auto pu = decay_profile(Lu, du, 0, au, 1);
  CHECK(pu.rate == doctest::Approx(0.0).epsilon(1e-10));
  CHECK_THROWS_AS(decay_profile(Lu, du, 0, au, 4), NumericalError);
}

TEST_CASE("thermal decay rates are positive") {
  LaxMatrix L;
  auto d = thermal_dec(512, 3, &L);
  auto a = center_bijection(d, default_zeta(512));
  std::vector<double> rates;
  for (std::size_t k = 0; k < d.size(); k += 8) {
    auto p = decay_profile(L, d, k, a, default_decay_collar(512));
    if (std::isfinite(p.rate)) rates.push_back(p.rate);
  }
  std::sort(rates.begin(), rates.end());
  CHECK(rates[rates.size() / 2] > 0.0);
}

TEST_CASE("tracking: stationary state and time reversal") {
  FlaschkaState u{DomainSpec::torus(6), Vec(6, 1.0), Vec(6, 0.0), 0.0};
  IntegratorConfig cfg;
  cfg.sample_every = 0.5;
  auto tr = evolve(u, cfg, 2.0);
  auto track = track_centers(tr, 0.1);
  for (const auto& a : track.assignments) CHECK(a.phi == track.assignments.front().phi);
  CHECK(track.max_displacement == 0);

  RngStream rng(2, 2);
  auto f = sample_open(ThermalParams::make(1.0, 1.0), 64, rng);
  cfg.sample_every = 1.0;
  auto t2 = evolve(f, cfg, 4.0);
  std::vector<SpectralDecomposition> decs;
  for (const auto& s : t2.samples) decs.push_back(eig_tridiag(build_lax(s)));
  auto fwd = track_centers(decs, t2.times(), default_zeta(64));
  std::reverse(decs.begin(), decs.end());
  Vec times = t2.times();
  std::reverse(times.begin(), times.end());
  auto bwd = track_centers(decs, times, default_zeta(64));
  for (std::size_t s = 0; s < fwd.assignments.size(); ++s)
    CHECK(fwd.assignments[s].phi == bwd.assignments[fwd.assignments.size() - 1 - s].phi);
  const double l = std::log(64.0);
  CHECK(static_cast<double>(fwd.max_displacement) <= 4.0 * l * l);
}

TEST_CASE("tracking refuses drift beyond half the gap") {
  auto d0 = eig_tridiag(make_tridiagonal({0.0, 1.0}, {0.1}));
  auto d1 = eig_tridiag(make_tridiagonal({0.0, 2.0}, {0.1}));
  CHECK_THROWS_AS(track_centers({d0, d1}, {0.0, 1.0}, 0.25), NumericalError);
}

TEST_CASE("truncation matching") {
  // Already decoupled at ell: the spectra agree away from the removed site.
  Vec diag = {1.0, -0.5, 0.3, 2.0, -1.2, 0.8, -2.2, 0.4};
  Vec off = {0.6, 0.7, 0.0, 0.0, 0.9, 0.5, 0.4};
  auto L = make_tridiagonal(diag, off);
  auto m = truncation_eigen_match(L, 3, 0.25, 1);
  CHECK(!m.empty());
  for (const auto& x : m) CHECK(x.gap == 0.0);

  LaxMatrix T;
  thermal_dec(256, 11, &T);
  auto mt = truncation_eigen_match(T, T.domain.first_site() + 128, default_zeta(256), 30);
  CHECK(!mt.empty());
  for (const auto& x : mt) CHECK(x.gap <= 1e-6);
}
