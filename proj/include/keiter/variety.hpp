#pragma once

// Smooth projective hypersurfaces X = {F = 0} in P^N with ample canonical
// bundle (d >= N+2), their pluricanonical monomial bases, and pointwise frame
// data for evaluating sections.
//
// Conventions (used throughout the library):
//  * Points are stored with canonical homogeneous coordinates: divide by the
//    max-modulus coordinate (lowest index on ties), so z[chart_affine] == 1.
//  * In the affine chart z_a = 1 the Poincare residue form is
//        Omega_res = eta_j / (dF/dz_j),   eta_j = (-1)^{pos(j)} * wedge of the
//    remaining affine differentials in increasing index order (pos(j) = rank of
//    j among the affine indices). Omega_res is independent of j on X.
//  * A degree-k monomial M (k = m(d-N-1)) represents the pluricanonical
//    section M * Omega_res^{(x) m}; section_values() returns the coefficients
//    M(z_norm) in that frame, evaluate_basis() the coefficients in the bare
//    frame eta_j^{(x) m}, i.e. (-1)^{m pos(j)} M / (dF/dz_j)^m.
//  * residue_fs_density() returns |Omega_res|^2 measured against omega_FS^n
//    restricted to X (the measure sampled by sample_fs; total mass d). It does
//    not depend on the residue index.

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "keiter/common.hpp"
#include "keiter/polynomial.hpp"

namespace kei {

inline constexpr double kOnVarietyTol = 1e-9;     // relative to coefficient scale
inline constexpr double kSingularFloor = 1e-7;    // scaled gradient below this = singular
inline constexpr double kResidueFloor = 1e-6;     // min |F_j| relative to gradient norm

struct Hypersurface {
  HomPoly F;
  std::vector<HomPoly> partials;
  std::string content_hash;

  int nvars() const { return F.nvars(); }      // N + 1
  int ambient() const { return F.nvars() - 1; }  // N
  int dim() const { return F.nvars() - 2; }      // n = N - 1
  int degree() const { return F.degree(); }      // d
  int canonical_twist() const { return F.degree() - F.nvars(); }  // d - N - 1
};

inline std::string hypersurface_hash(const HomPoly& F) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  int nv = F.nvars();
  h = fnv1a64(&nv, sizeof nv, h);
  for (const auto& t : F.terms()) {
    for (int e : t.e) h = fnv1a64(&e, sizeof e, h);
    double re = t.c.real(), im = t.c.imag();
    h = fnv1a64(&re, sizeof re, h);
    h = fnv1a64(&im, sizeof im, h);
  }
  return hash_hex(h);
}

inline Hypersurface make_hypersurface(HomPoly F) {
  int N = F.nvars() - 1;
  if (N < 2) fail_validation("ambient projective space must be at least P^2");
  if (F.degree() < N + 2)
    fail_validation("canonical bundle is not ample: need degree >= ambient + 2 (got degree " +
                    std::to_string(F.degree()) + " in P^" + std::to_string(N) + ")");
  Hypersurface X;
  X.partials.reserve(static_cast<std::size_t>(F.nvars()));
  for (int v = 0; v < F.nvars(); ++v) X.partials.push_back(F.partial(v));
  X.content_hash = hypersurface_hash(F);
  X.F = std::move(F);
  return X;
}

inline Hypersurface parse_hypersurface(const std::string& text, std::optional<int> nvars_override = std::nullopt) {
  return make_hypersurface(parse_polynomial(text, nvars_override));
}

// F(A z): the hypersurface pulled back through the linear change z -> A z.
inline Hypersurface transform_coordinates(const Hypersurface& X, const MatC& A) {
  return make_hypersurface(X.F.compose_linear(A));
}

struct VarietyPoint {
  VecC z;            // canonical homogeneous coordinates, z[chart_affine] == 1
  int chart_affine = -1;
  int chart_residue = -1;
};

namespace detail {

inline int argmax_modulus(const VecC& z) {
  int best = 0;
  double bm = std::abs(z[0]);
  for (int i = 1; i < z.size(); ++i) {
    double m = std::abs(z[i]);
    if (m > bm) { bm = m; best = i; }
  }
  return best;
}

}  // namespace detail

inline VecC gradient_at(const Hypersurface& X, const VecC& z) {
  VecC g(X.nvars());
  for (int v = 0; v < X.nvars(); ++v) g[v] = X.partials[static_cast<std::size_t>(v)].eval(z);
  return g;
}

inline double partial_coef_scale(const Hypersurface& X) {
  double s = 0.0;
  for (const auto& p : X.partials) s = std::max(s, p.coef_scale());
  return s;
}

// Canonicalises raw homogeneous coordinates and picks the residue chart.
// Throws: validation if the point is off the variety, numerical if the
// gradient vanishes (singular point) or no residue coordinate is usable.
inline VarietyPoint chart_select(const Hypersurface& X, const VecC& raw) {
  if (raw.size() != X.nvars()) fail_validation("point has wrong number of homogeneous coordinates");
  int a = detail::argmax_modulus(raw);
  if (std::abs(raw[a]) == 0.0) fail_validation("zero vector is not a projective point");
  VarietyPoint p;
  p.z = raw / raw[a];
  p.z[a] = cplx(1.0, 0.0);
  p.chart_affine = a;

  double fscale = X.F.coef_scale();
  if (std::abs(X.F.eval(p.z)) > kOnVarietyTol * fscale)
    fail_validation("point is not on the hypersurface (|F| above tolerance)");

  VecC g = gradient_at(X, p.z);
  double gnorm = g.norm();
  if (gnorm < kSingularFloor * partial_coef_scale(X))
    fail_numerical("gradient of F vanishes at the point (singular point of X)");

  int j = -1;
  double bm = -1.0;
  for (int v = 0; v < X.nvars(); ++v) {
    if (v == a) continue;
    double m = std::abs(g[v]);
    if (m > bm) { bm = m; j = v; }
  }
  if (bm < kResidueFloor * gnorm)
    fail_numerical("no usable residue coordinate at the point (all non-affine partials too small)");
  p.chart_residue = j;
  return p;
}

// One-dimensional Newton polish along the residue coordinate; keeps the
// canonical normalisation intact.
inline void newton_polish(const Hypersurface& X, VarietyPoint& p, int max_iter = 8) {
  int j = p.chart_residue;
  double fscale = X.F.coef_scale();
  for (int it = 0; it < max_iter; ++it) {
    cplx f = X.F.eval(p.z);
    if (std::abs(f) <= 1e-14 * fscale) return;
    cplx fj = X.partials[static_cast<std::size_t>(j)].eval(p.z);
    if (std::abs(fj) == 0.0) return;
    p.z[j] -= f / fj;
  }
}

// Standard constructor from raw coordinates: canonicalise, polish, re-select
// (the polish can move the max-modulus coordinate across a tie boundary).
inline VarietyPoint make_point(const Hypersurface& X, const VecC& raw, bool polish = true) {
  VarietyPoint p = chart_select(X, raw);
  if (polish) {
    newton_polish(X, p);
    p = chart_select(X, p.z);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Smoothness probe: random lines, lenient root extraction, counts points where
// chart selection fails (vanishing gradient / unusable residue chart).

struct SmoothnessReport {
  double min_scaled_gradient = 0.0;
  int failures = 0;
  int trials = 0;
};

namespace detail {

// Roots of a dense univariate complex polynomial via the companion matrix.
inline std::vector<cplx> poly_roots(const std::vector<cplx>& coef) {
  int deg = static_cast<int>(coef.size()) - 1;
  while (deg > 0 && std::abs(coef[static_cast<std::size_t>(deg)]) == 0.0) --deg;
  if (deg < 1) return {};
  MatC C = MatC::Zero(deg, deg);
  cplx lead = coef[static_cast<std::size_t>(deg)];
  for (int i = 0; i < deg; ++i) C(i, deg - 1) = -coef[static_cast<std::size_t>(i)] / lead;
  for (int i = 1; i < deg; ++i) C(i, i - 1) = cplx(1.0, 0.0);
  Eigen::ComplexEigenSolver<MatC> es(C, /*computeEigenvectors=*/false);
  std::vector<cplx> roots(static_cast<std::size_t>(deg));
  for (int i = 0; i < deg; ++i) roots[static_cast<std::size_t>(i)] = es.eigenvalues()[i];
  return roots;
}

// Coefficients of t -> F(p + t q).
inline std::vector<cplx> line_restriction(const Hypersurface& X, const VecC& p, const VecC& q) {
  int d = X.degree();
  std::vector<cplx> coef(static_cast<std::size_t>(d + 1), cplx(0.0, 0.0));
  // Sample at d+1 nodes and solve the Vandermonde system? Direct expansion is
  // simpler and exact enough: evaluate on roots of unity and invert by DFT.
  std::vector<cplx> vals(static_cast<std::size_t>(d + 1));
  const double two_pi = 6.283185307179586476925286766559;
  for (int k = 0; k <= d; ++k) {
    double th = two_pi * static_cast<double>(k) / static_cast<double>(d + 1);
    cplx t(std::cos(th), std::sin(th));
    vals[static_cast<std::size_t>(k)] = X.F.eval(p + t * q);
  }
  for (int j = 0; j <= d; ++j) {
    cplx acc(0.0, 0.0);
    for (int k = 0; k <= d; ++k) {
      double th = -two_pi * static_cast<double>(j) * static_cast<double>(k) / static_cast<double>(d + 1);
      acc += vals[static_cast<std::size_t>(k)] * cplx(std::cos(th), std::sin(th));
    }
    coef[static_cast<std::size_t>(j)] = acc / static_cast<double>(d + 1);
  }
  return coef;
}

}  // namespace detail

inline SmoothnessReport smoothness_probe(const Hypersurface& X, int trials, std::uint64_t seed) {
  if (trials < 1) fail_validation("smoothness probe needs at least one trial");
  SmoothnessReport rep;
  rep.min_scaled_gradient = std::numeric_limits<double>::infinity();
  double pscale = partial_coef_scale(X);
  std::uint64_t line_idx = 0;
  while (rep.trials < trials) {
    Rng rng(seed, line_idx++);
    VecC p(X.nvars()), q(X.nvars());
    for (int v = 0; v < X.nvars(); ++v) { p[v] = rng.cgaussian(); q[v] = rng.cgaussian(); }
    auto coef = detail::line_restriction(X, p, q);
    double cscale = 0.0;
    for (auto& c : coef) cscale = std::max(cscale, std::abs(c));
    if (cscale == 0.0 || std::abs(coef.back()) < 1e-12 * cscale) continue;  // line through a bad configuration
    for (cplx t : detail::poly_roots(coef)) {
      if (rep.trials >= trials) break;
      ++rep.trials;
      try {
        VarietyPoint pt = make_point(X, p + t * q);
        double scaled = gradient_at(X, pt.z).norm() / pscale;
        rep.min_scaled_gradient = std::min(rep.min_scaled_gradient, scaled);
      } catch (const Error&) {
        ++rep.failures;
      }
    }
  }
  if (!std::isfinite(rep.min_scaled_gradient)) rep.min_scaled_gradient = 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Pluricanonical monomial basis: all monomials of degree m(d-N-1) not divisible
// by the graded-lex pivot monomial of F (the standard-monomial basis of the
// degree-k piece of the coordinate ring).

struct CanonicalBasis {
  int m = 0;
  int k = 0;  // homogeneous degree m * (d - N - 1)
  std::vector<Expo> exps;
};

inline long long section_space_dim(const Hypersurface& X, int m) {
  int N = X.ambient();
  int k = m * X.canonical_twist();
  return binomial_ll(k + N, N) - binomial_ll(k - X.degree() + N, N);
}

inline CanonicalBasis canonical_power_basis(const Hypersurface& X, int m) {
  if (m < 1) fail_validation("pluricanonical power must be >= 1");
  const Term& pivot = X.F.pivot();
  double cmax = 0.0;
  for (const auto& t : X.F.terms()) cmax = std::max(cmax, std::abs(t.c));
  if (std::abs(pivot.c) < 1e-12 * cmax)
    fail_validation("pivot monomial of F has (near-)zero coefficient; apply a generic linear coordinate change first");
  CanonicalBasis b;
  b.m = m;
  b.k = m * X.canonical_twist();
  for (auto& e : monomials_of_degree(X.nvars(), b.k))
    if (!expo_divides(pivot.e, e)) b.exps.push_back(std::move(e));
  if (static_cast<long long>(b.exps.size()) != section_space_dim(X, m))
    fail_numerical("basis enumeration disagrees with the dimension formula");
  return b;
}

// ---------------------------------------------------------------------------
// Pointwise evaluation.

namespace detail {

struct PowTable {
  std::vector<cplx> p;
  int stride = 0;

  PowTable(const VecC& z, int maxdeg) {
    stride = maxdeg + 1;
    p.assign(static_cast<std::size_t>(z.size()) * static_cast<std::size_t>(stride), cplx(1.0, 0.0));
    for (int v = 0; v < z.size(); ++v)
      for (int k = 1; k <= maxdeg; ++k)
        p[static_cast<std::size_t>(v * stride + k)] = p[static_cast<std::size_t>(v * stride + k - 1)] * z[v];
  }

  cplx mono(const Expo& e) const {
    cplx r(1.0, 0.0);
    for (std::size_t v = 0; v < e.size(); ++v) r *= p[v * static_cast<std::size_t>(stride) + static_cast<std::size_t>(e[v])];
    return r;
  }
};

// Rank of chart_residue among the affine indices (ascending), fixing the sign
// of the bare wedge frame eta_j.
inline int residue_position(const VarietyPoint& p) {
  int pos = 0;
  for (int v = 0; v < p.chart_residue; ++v)
    if (v != p.chart_affine) ++pos;
  return pos;
}

}  // namespace detail

// Coefficients in the global residue trivialisation Omega_res^{(x) m}: just the
// monomial values at the canonical coordinates. This is what the iteration uses.
inline VecC section_values([[maybe_unused]] const Hypersurface& X, const CanonicalBasis& basis, const VarietyPoint& p) {
  detail::PowTable pw(p.z, basis.k);
  VecC v(static_cast<Eigen::Index>(basis.exps.size()));
  for (std::size_t i = 0; i < basis.exps.size(); ++i) v[static_cast<Eigen::Index>(i)] = pw.mono(basis.exps[i]);
  return v;
}

// Coefficients in the bare residue-chart frame eta_j^{(x) m} for an explicit j.
inline VecC evaluate_basis_in_chart(const Hypersurface& X, const CanonicalBasis& basis, const VarietyPoint& p, int j) {
  if (j == p.chart_affine || j < 0 || j >= X.nvars()) fail_validation("invalid residue chart index");
  cplx fj = X.partials[static_cast<std::size_t>(j)].eval(p.z);
  if (std::abs(fj) == 0.0) fail_numerical("residue denominator dF/dz_j vanishes at the point");
  VarietyPoint q = p;
  q.chart_residue = j;
  double sgn = (basis.m * detail::residue_position(q)) % 2 == 0 ? 1.0 : -1.0;
  cplx fjm(1.0, 0.0);
  for (int t = 0; t < basis.m; ++t) fjm *= fj;
  return (sgn / fjm) * section_values(X, basis, p);
}

inline VecC evaluate_basis(const Hypersurface& X, const CanonicalBasis& basis, const VarietyPoint& p) {
  return evaluate_basis_in_chart(X, basis, p, p.chart_residue);
}

// ---------------------------------------------------------------------------
// |Omega_res|^2 against omega_FS^n|_X.
//
// In the affine chart the FS metric is g_{ab} = delta_ab/s - conj(w_a) w_b/s^2
// with s = ||z||^2; restricting to the tangent vectors t_k = e_k - (f_k/f_j) e_j
// (k over the affine indices except j) gives the pullback Gram matrix G and
//   omega_FS^n|_X = n! det(G) * (i/2pi)^n wedge of the free coordinates,
// so |eta_j|^2 / omega_FS^n = 1/(n! det G) and dividing by |f_j|^2 makes the
// result independent of the residue index.
// det of the FS metric pulled back to T_p X in the local coordinates
// (w_k)_{k != a, j}, where w_j is eliminated through the implicit function.
inline double fs_pullback_det(const Hypersurface& X, const VecC& z, int a, int j) {
  int n = X.dim();
  cplx fj = X.partials[static_cast<std::size_t>(j)].eval(z);
  if (std::abs(fj) == 0.0) fail_numerical("residue denominator dF/dz_j vanishes at the point");

  std::vector<int> freev;
  for (int v = 0; v < X.nvars(); ++v)
    if (v != a && v != j) freev.push_back(v);

  // t_k has entry 1 at freev[k] and -(f_k/f_j) at j (all other entries 0).
  std::vector<cplx> tj(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    tj[static_cast<std::size_t>(k)] = -X.partials[static_cast<std::size_t>(freev[static_cast<std::size_t>(k)])].eval(z) / fj;

  double s = z.squaredNorm();
  MatC G(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      cplx dot = (r == c ? cplx(1.0, 0.0) : cplx(0.0, 0.0)) + tj[static_cast<std::size_t>(r)] * std::conj(tj[static_cast<std::size_t>(c)]);
      cplx cr = std::conj(z[freev[static_cast<std::size_t>(r)]]) + std::conj(z[j]) * tj[static_cast<std::size_t>(r)];
      cplx cc = std::conj(z[freev[static_cast<std::size_t>(c)]]) + std::conj(z[j]) * tj[static_cast<std::size_t>(c)];
      G(r, c) = dot / s - cr * std::conj(cc) / (s * s);
    }
  }
  double detG = 0.0;
  if (n == 1) detG = G(0, 0).real();
  else if (n == 2) detG = (G(0, 0) * G(1, 1) - G(0, 1) * G(1, 0)).real();
  else detG = G.determinant().real();
  if (!(detG > 0.0)) fail_numerical("degenerate Fubini-Study pullback at the point");
  return detG;
}

inline double residue_fs_density_in_chart(const Hypersurface& X, const VarietyPoint& p, int j) {
  if (j == p.chart_affine || j < 0 || j >= X.nvars()) fail_validation("invalid residue chart index");
  int n = X.dim();
  cplx fj = X.partials[static_cast<std::size_t>(j)].eval(p.z);
  if (std::abs(fj) == 0.0) fail_numerical("residue denominator dF/dz_j vanishes at the point");
  double detG = fs_pullback_det(X, p.z, p.chart_affine, j);
  double nfact = 1.0;
  for (int t = 2; t <= n; ++t) nfact *= static_cast<double>(t);
  return 1.0 / (nfact * detG * std::norm(fj));
}

inline double residue_fs_density(const Hypersurface& X, const VarietyPoint& p) {
  return residue_fs_density_in_chart(X, p, p.chart_residue);
}

}  // namespace kei
