#include "todalab/domain.hpp"

#include <sstream>

#include "todalab/error.hpp"

namespace toda {

DomainSpec DomainSpec::open(long n1, long n2) {
  if (n1 > n2) throw InvalidArgument("open domain requires n1 <= n2");
  return DomainSpec(DomainKind::OpenInterval, n1, static_cast<std::size_t>(n2 - n1 + 1), 0.0);
}

DomainSpec DomainSpec::torus(std::size_t n, double upsilon) {
  if (n == 0) throw InvalidArgument("torus domain requires n >= 1");
  return DomainSpec(DomainKind::Torus, 0, n, upsilon);
}

DomainSpec DomainSpec::centered_open(std::size_t n) {
  if (n == 0) throw InvalidArgument("open domain requires n >= 1");
  long n1 = -static_cast<long>(n / 2);
  return open(n1, n1 + static_cast<long>(n) - 1);
}

DomainSpec DomainSpec::with_upsilon(double upsilon) const {
  DomainSpec d = *this;
  d.upsilon_ = upsilon;
  return d;
}

std::size_t DomainSpec::index(long site) const {
  if (is_torus()) {
    long n = static_cast<long>(n_);
    long r = (site - first_) % n;
    if (r < 0) r += n;
    return static_cast<std::size_t>(r);
  }
  if (!contains(site)) throw InvalidArgument("site " + std::to_string(site) + " outside domain");
  return static_cast<std::size_t>(site - first_);
}

bool DomainSpec::operator==(const DomainSpec& other) const {
  return kind_ == other.kind_ && first_ == other.first_ && n_ == other.n_;
}

std::string DomainSpec::describe() const {
  std::ostringstream os;
  if (is_open())
    os << "open[" << first_site() << "," << last_site() << "]";
  else
    os << "torus(" << n_ << ", upsilon=" << upsilon_ << ")";
  return os.str();
}

}  // namespace toda
