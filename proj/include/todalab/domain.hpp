#pragma once

#include <cstddef>
#include <string>

namespace toda {

enum class DomainKind { OpenInterval, Torus };

// Lattice geometry. Sites of an open interval are the integers n1..n2; sites
// of a torus are 0..n-1 with positions extended by q_{i+n} = q_i + upsilon.
class DomainSpec {
 public:
  // Empty open interval.
  DomainSpec() : DomainSpec(DomainKind::OpenInterval, 0, 0, 0.0) {}

  static DomainSpec open(long n1, long n2);
  static DomainSpec torus(std::size_t n, double upsilon = 0.0);
  // Open interval of n sites, placed so that site 0 sits in the middle.
  static DomainSpec centered_open(std::size_t n);

  DomainKind kind() const { return kind_; }
  bool is_open() const { return kind_ == DomainKind::OpenInterval; }
  bool is_torus() const { return kind_ == DomainKind::Torus; }

  std::size_t size() const { return n_; }
  long first_site() const { return first_; }
  long last_site() const { return first_ + static_cast<long>(n_) - 1; }
  double upsilon() const { return upsilon_; }
  DomainSpec with_upsilon(double upsilon) const;

  bool contains(long site) const { return site >= first_site() && site <= last_site(); }
  // Storage index of a site. Torus sites are reduced mod n; open sites must be
  // inside the interval.
  std::size_t index(long site) const;
  long site(std::size_t index) const { return first_ + static_cast<long>(index); }

  bool operator==(const DomainSpec& other) const;
  std::string describe() const;

 private:
  DomainSpec(DomainKind kind, long first, std::size_t n, double upsilon)
      : kind_(kind), first_(first), n_(n), upsilon_(upsilon) {}

  DomainKind kind_;
  long first_;
  std::size_t n_;
  double upsilon_;
};

}  // namespace toda
