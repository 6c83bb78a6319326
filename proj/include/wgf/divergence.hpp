#pragma once

#include <limits>
#include <string>
#include <string_view>

namespace wgf {

// The four field divergences plus the cubic divergence that only appears as
// the mirror of Pearson's chi-square. Every f is normalized so that f(1) = 0.
//
//   ForwardKL    KL[p,q]        f(r) = r log r              h(r) = r
//   BackwardKL   KL[q,p]        f(r) = -log r               h(r) = log r
//   PearsonChi2  chi2_p[p,q]    f(r) = (r-1)^2 / 2          h(r) = r^2/2 - 1/2
//   NeymanChi2   chi2_n[p,q]    f(r) = 1/(2r) - 1/2         h(r) = -1/r
//   Cubic        (mirror only)  f(r) = r^3/6 - r/2 + 1/3
enum class DivergenceId { ForwardKL, BackwardKL, PearsonChi2, NeymanChi2, Cubic };

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool hi_open = true;

  [[nodiscard]] bool contains(double d) const { return d > lo && (hi_open ? d < hi : d <= hi); }
};

[[nodiscard]] double f_of(DivergenceId id, double r);
[[nodiscard]] double f_prime(DivergenceId id, double r);

// Velocity generator: the particle ODE for D_f moves along grad (h o r).
// Throws DomainError for r <= 0.
[[nodiscard]] double h_of(DivergenceId id, double r);

// D_psi is the mirror of D_phi when psi' equals r phi' - phi up to a constant.
// Only the direction used by estimation is stored.
[[nodiscard]] DivergenceId mirror_of(DivergenceId id);

// Convex conjugate of f for `id` used in its role as a mirror:
// psi_con(d) = sup_{r > 0} { r d - psi(r) }. Throws DomainError outside
// conj_domain(id). PearsonChi2 uses the quadratic form d^2/2 + d on the whole
// line, which agrees with the r > 0 supremum for d > -1.
[[nodiscard]] Interval conj_domain(DivergenceId id);
[[nodiscard]] double conjugate(DivergenceId id, double d);
[[nodiscard]] double conjugate_prime(DivergenceId id, double d);
[[nodiscard]] double conjugate_second(DivergenceId id, double d);

// The conjugate, first and second derivative in one call, with no domain
// check. Callers must ensure conj_domain(id).contains(d).
struct ConjugateValue {
  double value;
  double prime;
  double second;
};
[[nodiscard]] ConjugateValue conjugate_all(DivergenceId id, double d);

// Snapshot of one registered divergence, bundling the scalar functions above.
struct DivergenceSpec {
  DivergenceId id;
  DivergenceId mirror_id;
  Interval mirror_domain;

  [[nodiscard]] double f(double r) const { return f_of(id, r); }
  [[nodiscard]] double h(double r) const { return h_of(id, r); }
  [[nodiscard]] double psi(double r) const { return f_of(mirror_id, r); }
  [[nodiscard]] double psi_prime(double r) const { return f_prime(mirror_id, r); }
  [[nodiscard]] double psi_con(double d) const { return conjugate(mirror_id, d); }
  [[nodiscard]] double psi_con_prime(double d) const { return conjugate_prime(mirror_id, d); }
  [[nodiscard]] double psi_con_second(double d) const { return conjugate_second(mirror_id, d); }
};

[[nodiscard]] DivergenceSpec spec_of(DivergenceId id);

// True for the four ids that generate a velocity field (everything but Cubic).
[[nodiscard]] bool is_field_divergence(DivergenceId id);

// Field divergence whose mirror is `target`, i.e. the estimator whose
// variational objective bounds D_target. Throws UsageError for NeymanChi2,
// which is not the mirror of any registered divergence.
[[nodiscard]] DivergenceId field_for_mirror(DivergenceId target);

// CLI names: fkl, bkl, pearson, neyman (and cubic for the mirror).
[[nodiscard]] DivergenceId parse_divergence(std::string_view name);
[[nodiscard]] std::string_view to_string(DivergenceId id);

}  // namespace wgf
