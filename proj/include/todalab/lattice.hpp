#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "todalab/domain.hpp"

namespace toda {

using Vec = std::vector<double>;

struct TodaState {
  DomainSpec domain;
  Vec p;
  Vec q;
  double t = 0.0;
};

// Flaschka coordinates a_i = exp((q_i - q_{i+1}) / 2), b_i = p_i. On an open
// interval the last a entry is identically zero.
struct FlaschkaState {
  DomainSpec domain;
  Vec a;
  Vec b;
  double t = 0.0;

  void validate() const;
};

enum class Scheme { RK4Fixed, RK45Adaptive };

struct IntegratorConfig {
  double step = 1e-3;
  Scheme scheme = Scheme::RK4Fixed;
  double rel_tol = 1e-11;
  double abs_tol = 1e-13;
  // 0 selects T / 100.
  double sample_every = 0.0;
  double min_step = 1e-12;

  void validate() const;
};

struct DriftRecord {
  double t = 0.0;
  double hamiltonian = 0.0;
  double trace1 = 0.0;
  double trace2 = 0.0;
};

struct Trajectory {
  std::vector<FlaschkaState> samples;
  // q at the first site of the domain, integrated along with (a, b).
  Vec q_first;
  // Deviation of H, Tr L and Tr L^2 from their initial values.
  std::vector<DriftRecord> conserved_drift;

  std::size_t size() const { return samples.size(); }
  const DomainSpec& domain() const { return samples.front().domain; }
  Vec times() const;
  // Positions at sample s, using the integrated first-site position.
  TodaState state_at(std::size_t s) const;
  double max_drift() const;
};

FlaschkaState flaschka_from_state(const TodaState& s);
// Positions anchored at q_0 = 0 (site 0 must lie in an open domain; on a torus
// the anchor is site 0 of the fundamental domain). The torus period is set to
// -2 sum log a_i.
TodaState state_from_flaschka(const FlaschkaState& f);
// Positions with a prescribed value at the first site.
TodaState state_from_flaschka(const FlaschkaState& f, double q_first);
// q at the first site implied by the q_0 = 0 anchor, or 0 when site 0 is absent.
double anchored_first_position(const FlaschkaState& f);

std::pair<Vec, Vec> toda_rhs(const FlaschkaState& f);

double hamiltonian(const TodaState& s);
double hamiltonian(const FlaschkaState& f);
double trace_l(const FlaschkaState& f);
double trace_l2(const FlaschkaState& f);
std::pair<double, double> torus_invariants(const FlaschkaState& f);

Trajectory evolve(const FlaschkaState& f0, const IntegratorConfig& cfg, double T,
                  std::optional<double> q_first0 = std::nullopt);

}  // namespace toda
