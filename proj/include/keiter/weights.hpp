#pragma once

// Weight factors beta^epsilon multiplying the fibre integrals.
//
// beta is either the constant 1 (the plain construction) or the normalized
// Fubini-Study magnitude of a homogeneous polynomial Q,
//   beta(z) = |Q(z)|^2 / (|z|^(2 deg Q) * norm_constant),
// scale invariant, smooth, vanishing exactly on X cut by Q = 0. The
// normalization constant is the sup of the unnormalized magnitude over a
// sample set, so beta <= 1 holds on that sample by construction and is
// enforced by clamping elsewhere.

#include <cmath>
#include <string>

#include "keiter/common.hpp"
#include "keiter/polynomial.hpp"
#include "keiter/sampling.hpp"
#include "keiter/variety.hpp"

namespace kei {

enum class WeightKind { constant_one, polynomial_zero };

struct WeightSpec {
  WeightKind kind = WeightKind::constant_one;
  HomPoly Q;                   // unused for constant_one
  double epsilon = 1.0;        // exponent in (0, 1]
  double norm_constant = 1.0;  // sup of |Q|^2 / |z|^(2q) over the normalization sample
};

inline WeightSpec make_weight_one() { return WeightSpec{}; }

inline WeightSpec make_weight_zero(const HomPoly& Q, double epsilon) {
  if (!(epsilon > 0.0) || epsilon > 1.0) fail_validation("weight exponent must lie in (0, 1]");
  if (Q.terms().empty()) fail_validation("weight polynomial is identically zero");
  WeightSpec w;
  w.kind = WeightKind::polynomial_zero;
  w.Q = Q;
  w.epsilon = epsilon;
  return w;
}

inline WeightSpec make_weight_zero(const std::string& text, int nvars, double epsilon) {
  return make_weight_zero(parse_polynomial(text, nvars), epsilon);
}

// |Q(z)|^2 / |z|^(2 deg Q), before normalization.
inline double raw_weight(const WeightSpec& w, const VecC& z) {
  if (w.kind == WeightKind::constant_one) return 1.0;
  if (w.Q.nvars() != static_cast<int>(z.size())) fail_validation("weight polynomial variable count does not match the variety");
  double q2 = std::norm(w.Q.eval(z));
  return q2 / std::pow(z.squaredNorm(), static_cast<double>(w.Q.degree()));
}

// Sets norm_constant to the sample sup of the raw magnitude.
inline void normalize_weight_sup(WeightSpec& w, const SampleSet& S) {
  if (w.kind == WeightKind::constant_one) return;
  if (S.points.empty()) fail_validation("weight normalization over an empty sample set");
  double sup = 0.0;
  for (const auto& p : S.points) sup = std::max(sup, raw_weight(w, p.z));
  if (sup == 0.0) fail_validation("weight polynomial vanishes on the entire sample");
  w.norm_constant = sup;
}

// The base factor beta itself, clamped to [0, 1]. Epsilon-independent, so all
// chains of an epsilon study agree on which points count as "far from Q = 0".
inline double eval_weight_base(const WeightSpec& w, const VarietyPoint& p) {
  if (w.kind == WeightKind::constant_one) return 1.0;
  double b = raw_weight(w, p.z) / w.norm_constant;
  if (b >= 1.0) return 1.0;
  return b <= 0.0 ? 0.0 : b;
}

// beta^epsilon at a point, clamped to [0, 1]. The constant weight returns the
// literal 1.0 so weighted code paths reproduce unweighted results bit for bit.
inline double eval_weight(const WeightSpec& w, const VarietyPoint& p) {
  if (w.kind == WeightKind::constant_one) return 1.0;
  double b = raw_weight(w, p.z) / w.norm_constant;
  if (b >= 1.0) return 1.0;
  if (b <= 0.0) return 0.0;
  return w.epsilon == 1.0 ? b : std::pow(b, w.epsilon);
}

}  // namespace kei
