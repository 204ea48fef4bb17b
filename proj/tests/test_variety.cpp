#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "keiter/sampling.hpp"
#include "keiter/variety.hpp"

using namespace kei;

namespace {
const Hypersurface& quartic() {
  static Hypersurface X = parse_hypersurface("x^4 + y^4 + z^4");
  return X;
}
const SampleSet& probes() {
  static SampleSet S = sample_fs(quartic(), 40, 2025);
  return S;
}
}  // namespace

TEST_CASE("hypersurface descriptors") {
  const Hypersurface& X = quartic();
  CHECK(X.nvars() == 3);
  CHECK(X.ambient() == 2);
  CHECK(X.dim() == 1);
  CHECK(X.degree() == 4);
  CHECK(X.canonical_twist() == 1);
  CHECK(X.content_hash.size() == 16);
  CHECK(X.content_hash == parse_hypersurface("x^4 + y^4 + z^4").content_hash);
  CHECK(X.content_hash != parse_hypersurface("x^5 + y^5 + z^5").content_hash);
}

TEST_CASE("canonical bundle must be ample") {
  // degree d needs d >= N + 2 so that K = O(d - N - 1) is positive
  CHECK_THROWS_AS(parse_hypersurface("x^2 + y^2 + z^2"), Error);
  CHECK_THROWS_AS(parse_hypersurface("x^3 + y^3 + z^3"), Error);  // elliptic curve, K trivial
  CHECK_NOTHROW(parse_hypersurface("x^4 + y^4 + z^4"));
}

TEST_CASE("smoothness probe finds no near-singular points on the Fermat quartic") {
  SmoothnessReport r = smoothness_probe(quartic(), 200, 31337);
  CHECK(r.failures == 0);
  CHECK(r.min_scaled_gradient > 1e-2);
}

TEST_CASE("section space dimensions follow (2m-1)(g-1) with dim g at level one") {
  const Hypersurface& X = quartic();                       // genus 3
  Hypersurface Y = parse_hypersurface("x^5 + y^5 + z^5");  // genus 6
  CHECK(section_space_dim(X, 1) == 3);
  CHECK(section_space_dim(Y, 1) == 6);
  for (int m = 2; m <= 12; ++m) {
    CHECK(section_space_dim(X, m) == (2LL * m - 1) * 2);
    CHECK(section_space_dim(Y, m) == (2LL * m - 1) * 5);
    CHECK(static_cast<long long>(canonical_power_basis(X, m).exps.size()) == (2LL * m - 1) * 2);
    CHECK(static_cast<long long>(canonical_power_basis(Y, m).exps.size()) == (2LL * m - 1) * 5);
  }
}

TEST_CASE("power basis excludes multiples of the pivot monomial") {
  const Hypersurface& X = quartic();
  CanonicalBasis b = canonical_power_basis(X, 6);
  Expo pivot = X.F.pivot().e;
  for (const auto& e : b.exps) {
    CHECK(expo_degree(e) == b.k);
    CHECK(!expo_divides(pivot, e));
  }
  CHECK(b.m == 6);
  CHECK(b.k == 6 * X.canonical_twist());
}

TEST_CASE("chart selection canonicalises and validates") {
  const Hypersurface& X = quartic();
  VecC raw(3);
  raw << cplx(0.3, 0.1), cplx(1.0, 0.0), cplx(0.2, -0.4);
  // not on X
  CHECK_THROWS_AS(chart_select(X, raw), Error);
  // wrong arity
  VecC bad(2);
  bad << cplx(1.0, 0.0), cplx(0.0, 0.0);
  CHECK_THROWS_AS(chart_select(X, bad), Error);

  for (const auto& p : probes().points) {
    CHECK(p.z[p.chart_affine] == cplx(1.0, 0.0));
    for (Eigen::Index v = 0; v < 3; ++v) CHECK(std::abs(p.z[v]) <= 1.0 + 1e-12);
    CHECK(p.chart_residue != p.chart_affine);
    CHECK(std::abs(X.F.eval(p.z)) <= 1e-12 * X.F.coef_scale());
  }
}

TEST_CASE("newton polish drives the defect to rounding level") {
  const Hypersurface& X = quartic();
  VarietyPoint p = probes().points[0];
  p.z[p.chart_residue] += cplx(1e-6, -2e-6);  // perturb off the curve
  newton_polish(X, p);
  CHECK(std::abs(X.F.eval(p.z)) <= 1e-13 * X.F.coef_scale());
}

TEST_CASE("line restriction produces exactly d on-variety roots") {
  const Hypersurface& X = quartic();
  Rng rng(5);
  VecC a(3), b(3);
  for (int i = 0; i < 3; ++i) {
    a[i] = rng.cgaussian();
    b[i] = rng.cgaussian();
  }
  std::vector<cplx> coef = detail::line_restriction(X, a, b);
  CHECK(coef.size() == 5);  // degree-4 univariate
  std::vector<cplx> roots = detail::poly_roots(coef);
  REQUIRE(roots.size() == 4);
  for (cplx t : roots) {
    VecC z = a + t * b;
    CHECK(std::abs(X.F.eval(z)) < 1e-8 * X.F.coef_scale() * std::pow(z.norm(), 4));
  }
}

TEST_CASE("residue density is independent of the residue chart") {
  const Hypersurface& X = quartic();
  int checked = 0;
  for (const auto& p : probes().points) {
    double ref = residue_fs_density_in_chart(X, p, p.chart_residue);
    CHECK(ref > 0.0);
    for (int j = 0; j < 3; ++j) {
      if (j == p.chart_affine || j == p.chart_residue) continue;
      double fj = std::abs(X.partials[static_cast<std::size_t>(j)].eval(p.z));
      if (fj < 1e-3 * partial_coef_scale(X)) continue;  // chart unusable there
      double alt = residue_fs_density_in_chart(X, p, j);
      CHECK(std::abs(alt - ref) <= 1e-9 * ref);
      ++checked;
    }
  }
  CHECK(checked > 10);
}

TEST_CASE("basis evaluation transforms by a common scalar across charts") {
  // Changing the residue chart rescales every section value by the same
  // factor, so ratios of basis entries are chart-independent.
  const Hypersurface& X = quartic();
  CanonicalBasis b = canonical_power_basis(X, 3);
  int checked = 0;
  for (const auto& p : probes().points) {
    for (int j = 0; j < 3; ++j) {
      if (j == p.chart_affine || j == p.chart_residue) continue;
      double fj = std::abs(X.partials[static_cast<std::size_t>(j)].eval(p.z));
      if (fj < 1e-3 * partial_coef_scale(X)) continue;
      VecC u = evaluate_basis_in_chart(X, b, p, p.chart_residue);
      VecC v = evaluate_basis_in_chart(X, b, p, j);
      cplx ratio = v[0] / u[0];
      for (Eigen::Index i = 1; i < u.size(); ++i)
        CHECK(std::abs(v[i] - ratio * u[i]) <= 1e-9 * v.norm());
      ++checked;
    }
  }
  CHECK(checked > 10);
}

TEST_CASE("invalid residue chart index is rejected") {
  const Hypersurface& X = quartic();
  CanonicalBasis b = canonical_power_basis(X, 2);
  VarietyPoint p = probes().points[0];
  CHECK_THROWS_AS(evaluate_basis_in_chart(X, b, p, p.chart_affine), Error);
  CHECK_THROWS_AS(evaluate_basis_in_chart(X, b, p, 7), Error);
}
