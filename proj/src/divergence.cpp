#include "wgf/divergence.hpp"

#include "wgf/core.hpp"

#include <cmath>
#include <string>

namespace wgf {

namespace {

void require_positive(double r) {
  if (!(r > 0.0)) throw DomainError("divergence functions require r > 0, got " + std::to_string(r));
}

void require_in_domain(DivergenceId id, double d) {
  if (!conj_domain(id).contains(d)) {
    throw DomainError("conjugate of " + std::string(to_string(id)) + " undefined at d = " +
                      std::to_string(d));
  }
}

}  // namespace

double f_of(DivergenceId id, double r) {
  require_positive(r);
  switch (id) {
    case DivergenceId::ForwardKL: return r * std::log(r);
    case DivergenceId::BackwardKL: return -std::log(r);
    case DivergenceId::PearsonChi2: return 0.5 * (r - 1.0) * (r - 1.0);
    case DivergenceId::NeymanChi2: return 0.5 / r - 0.5;
    case DivergenceId::Cubic: return r * r * r / 6.0 - r / 2.0 + 1.0 / 3.0;
  }
  return 0.0;
}

double f_prime(DivergenceId id, double r) {
  require_positive(r);
  switch (id) {
    case DivergenceId::ForwardKL: return std::log(r) + 1.0;
    case DivergenceId::BackwardKL: return -1.0 / r;
    case DivergenceId::PearsonChi2: return r - 1.0;
    case DivergenceId::NeymanChi2: return -0.5 / (r * r);
    case DivergenceId::Cubic: return 0.5 * r * r - 0.5;
  }
  return 0.0;
}

double h_of(DivergenceId id, double r) {
  require_positive(r);
  switch (id) {
    case DivergenceId::ForwardKL: return r;
    case DivergenceId::BackwardKL: return std::log(r);
    case DivergenceId::PearsonChi2: return 0.5 * r * r - 0.5;
    case DivergenceId::NeymanChi2: return -1.0 / r;
    case DivergenceId::Cubic:
      // r f'(r) - f(r) for the cubic; not used as a field, kept for completeness.
      return r * r * r / 3.0 - 1.0 / 3.0;
  }
  return 0.0;
}

DivergenceId mirror_of(DivergenceId id) {
  switch (id) {
    case DivergenceId::ForwardKL: return DivergenceId::PearsonChi2;
    case DivergenceId::BackwardKL: return DivergenceId::ForwardKL;
    case DivergenceId::NeymanChi2: return DivergenceId::BackwardKL;
    case DivergenceId::PearsonChi2: return DivergenceId::Cubic;
    case DivergenceId::Cubic: break;
  }
  throw UsageError("the cubic divergence has no registered mirror");
}

Interval conj_domain(DivergenceId id) {
  switch (id) {
    case DivergenceId::BackwardKL:
    case DivergenceId::NeymanChi2: return Interval{-std::numeric_limits<double>::infinity(), 0.0, true};
    default: return Interval{};
  }
}

ConjugateValue conjugate_all(DivergenceId id, double d) {
  switch (id) {
    case DivergenceId::ForwardKL: {
      const double e = std::exp(d - 1.0);
      return {e, e, e};
    }
    case DivergenceId::BackwardKL: return {-1.0 - std::log(-d), -1.0 / d, 1.0 / (d * d)};
    case DivergenceId::PearsonChi2: return {0.5 * d * d + d, d + 1.0, 1.0};
    case DivergenceId::NeymanChi2: {
      const double s = std::sqrt(-2.0 * d);
      return {0.5 - s, 1.0 / s, 1.0 / (s * s * s)};
    }
    case DivergenceId::Cubic: {
      if (d <= -0.5) return {-1.0 / 3.0, 0.0, 0.0};
      const double s = std::sqrt(2.0 * d + 1.0);
      return {s * s * s / 3.0 - 1.0 / 3.0, s, 1.0 / s};
    }
  }
  return {0.0, 0.0, 0.0};
}

double conjugate(DivergenceId id, double d) {
  require_in_domain(id, d);
  return conjugate_all(id, d).value;
}

double conjugate_prime(DivergenceId id, double d) {
  require_in_domain(id, d);
  return conjugate_all(id, d).prime;
}

double conjugate_second(DivergenceId id, double d) {
  require_in_domain(id, d);
  return conjugate_all(id, d).second;
}

DivergenceSpec spec_of(DivergenceId id) {
  const DivergenceId mirror = mirror_of(id);
  return DivergenceSpec{id, mirror, conj_domain(mirror)};
}

bool is_field_divergence(DivergenceId id) { return id != DivergenceId::Cubic; }

DivergenceId field_for_mirror(DivergenceId target) {
  switch (target) {
    case DivergenceId::PearsonChi2: return DivergenceId::ForwardKL;
    case DivergenceId::ForwardKL: return DivergenceId::BackwardKL;
    case DivergenceId::BackwardKL: return DivergenceId::NeymanChi2;
    case DivergenceId::Cubic: return DivergenceId::PearsonChi2;
    case DivergenceId::NeymanChi2: break;
  }
  throw UsageError("neyman is not the mirror of any registered divergence; cannot estimate it");
}

DivergenceId parse_divergence(std::string_view name) {
  if (name == "fkl") return DivergenceId::ForwardKL;
  if (name == "bkl") return DivergenceId::BackwardKL;
  if (name == "pearson") return DivergenceId::PearsonChi2;
  if (name == "neyman") return DivergenceId::NeymanChi2;
  if (name == "cubic") return DivergenceId::Cubic;
  throw UsageError("unknown divergence '" + std::string(name) +
                   "' (expected fkl, bkl, pearson or neyman)");
}

std::string_view to_string(DivergenceId id) {
  switch (id) {
    case DivergenceId::ForwardKL: return "fkl";
    case DivergenceId::BackwardKL: return "bkl";
    case DivergenceId::PearsonChi2: return "pearson";
    case DivergenceId::NeymanChi2: return "neyman";
    case DivergenceId::Cubic: return "cubic";
  }
  return "?";
}

}  // namespace wgf
