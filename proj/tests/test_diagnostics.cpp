#include <catch2/catch_amalgamated.hpp>

#include "keiter/diagnostics.hpp"
#include "keiter/iteration.hpp"

using namespace kei;

namespace {
const Hypersurface& quartic() {
  static Hypersurface X = parse_hypersurface("x^4 + y^4 + z^4");
  return X;
}
const SampleSet& sample() {
  static SampleSet S = sample_fs(quartic(), 8000, 2718);
  return S;
}
const ChainResult& chain() {
  static ChainResult ch = run_chain_shared(quartic(), init_state(quartic()), 6, make_weight_one(), sample());
  return ch;
}
std::vector<VarietyPoint> some_probes(int n, std::uint64_t seed) {
  // the line sampler rounds up to a multiple of the degree, so trim
  auto pts = sample_fs(quartic(), n, seed).points;
  pts.resize(static_cast<std::size_t>(n));
  return pts;
}
}  // namespace

TEST_CASE("gauss-legendre rules integrate polynomials exactly") {
  GLRule r = gauss_legendre(8);
  REQUIRE(r.nodes.size() == 8);
  CHECK(std::abs(r.weights.sum() - 2.0) < 1e-14);
  // exact for degree <= 15: integrate x^14 over [-1,1] = 2/15
  double acc = 0.0;
  for (Eigen::Index i = 0; i < 8; ++i) acc += r.weights[i] * std::pow(r.nodes[i], 14);
  CHECK(std::abs(acc - 2.0 / 15.0) < 1e-14);
  CHECK_THROWS_AS(gauss_legendre(1), Error);
}

TEST_CASE("adaptive quadrature reaches near machine accuracy") {
  double v = integrate_adaptive([](double x) { return std::exp(x); }, -1.0, 2.0);
  CHECK(std::abs(v - (std::exp(2.0) - std::exp(-1.0))) < 1e-12);
  double w = integrate_adaptive([](double x) { return std::cos(10.0 * x); }, 0.0, 3.0);
  CHECK(std::abs(w - std::sin(30.0) / 10.0) < 1e-12);
}

TEST_CASE("full ball mass is the inverse rising factorial") {
  CHECK(std::abs(full_ball_mass(100, 1) - 1.0 / 101.0) < 1e-17);
  CHECK(std::abs(full_ball_mass(50, 2) - 1.0 / (51.0 * 52.0)) < 1e-18);
}

TEST_CASE("shrinking-ball mass check hits the closed form") {
  // b = 16 pushes the cutoff past the unit ball, so truncation costs nothing
  BallMassResult r1 = ball_mass_check(1, 100, 16.0);
  CHECK(std::abs(r1.analytic - 1.0 / 101.0) < 1e-18);
  CHECK(r1.abs_error < 1e-10);
  CHECK(r1.radius == 1.0);
  BallMassResult r2 = ball_mass_check(2, 50, 16.0);
  CHECK(std::abs(r2.analytic - 1.0 / (51.0 * 52.0)) < 1e-20);
  CHECK(r2.abs_error < 1e-10);
}

TEST_CASE("truncation error decays superpolynomially in the level") {
  // with b = 1 the radius (log m)^2/m stays inside the ball and the deficit
  // (1-R)^(m+1)/(m+1) collapses much faster than any fixed power
  double e20 = ball_mass_check(1, 20, 1.0).abs_error;
  double e50 = ball_mass_check(1, 50, 1.0).abs_error;
  double e200 = ball_mass_check(1, 200, 1.0).abs_error;
  CHECK(e20 > e50);
  CHECK(e50 > e200);
  CHECK(e20 < 1e-6);
  CHECK(e200 < 1e-14);
  double slope = (std::log(e200) - std::log(e20)) / (std::log(200.0) - std::log(20.0));
  CHECK(slope < -4.0);
}

TEST_CASE("ball mass check validates its arguments") {
  CHECK_THROWS_AS(ball_mass_check(3, 100, 16.0), Error);
  CHECK_THROWS_AS(ball_mass_check(1, 4, 16.0), Error);
  CHECK_THROWS_AS(ball_mass_check(1, 100, 0.0), Error);
}

TEST_CASE("complex laplacian stencil has fourth order error") {
  auto phi = [](cplx z) { return std::exp(std::norm(z)) * std::cos(0.3 * z.real() + 0.1 * z.imag()); };
  cplx z0(0.3, -0.2);
  double a = dbar_d_raw(phi, z0, 0.02);
  double b = dbar_d_raw(phi, z0, 0.01);
  double c = dbar_d_raw(phi, z0, 0.005);
  CHECK(std::abs((a - b) / (b - c) - 16.0) < 1.0);
}

TEST_CASE("laplacian reproduces closed-form curvatures") {
  cplx w0(0.31, -0.17);
  // Poincare disk at Ric = -omega: g = 2/(1-|w|^2)^2
  double gh = 2.0 / std::pow(1.0 - std::norm(w0), 2);
  double res = std::abs(dbar_d([](cplx w) { return std::log(2.0) - 2.0 * std::log(1.0 - std::norm(w)); }, w0, 1e-2) / gh - 1.0);
  CHECK(res < 1e-5);
  // flat potential: residual against the Einstein normalization is exactly 1
  CHECK(dbar_d([](cplx) { return 0.0; }, w0, 1e-2) == 0.0);
  // round metric from the Fubini-Study potential at power m
  int m = 7;
  double g = dbar_d([&](cplx w) { return std::log(std::pow(1.0 + std::norm(w), m)) / m; }, w0, 1e-3);
  CHECK(std::abs(g - 1.0 / std::pow(1.0 + std::norm(w0), 2)) < 1e-7);
}

TEST_CASE("analytic and stencil curvature agree on a real chain state") {
  CurvatureOperator op(quartic(), chain().states.back());
  auto pts = some_probes(6, 11);
  for (const auto& p : pts) {
    double ga = op.analytic_at(p.z, p.chart_affine, p.chart_residue);
    double gf = op.fd_at(p.z, p.chart_affine, p.chart_residue, 1e-3);
    CHECK(ga > 0.0);
    CHECK(std::abs(ga - gf) <= 1e-6 * std::max(1.0, std::abs(ga)));
  }
}

TEST_CASE("curvature operator is restricted to curves") {
  Hypersurface S2 = parse_hypersurface("x^6 + y^6 + z^6 + w^6", 4);
  MetricState st;
  st.m = 1;
  st.basis = canonical_power_basis(S2, 1);
  st.P = MatC::Identity(static_cast<Eigen::Index>(st.basis.exps.size()),
                        static_cast<Eigen::Index>(st.basis.exps.size()));
  st.variety_hash = S2.content_hash;
  CHECK_THROWS_AS(CurvatureOperator(S2, st), Error);
}

TEST_CASE("einstein residual report delivers ordered statistics") {
  EinsteinReport er = einstein_residual(quartic(), chain().states.back(), some_probes(40, 12));
  CHECK(er.total == 40);
  CHECK(er.skipped <= 8);
  CHECK(static_cast<int>(er.values.size()) == er.total - er.skipped);
  CHECK(er.sup >= er.mean);
  CHECK(er.mean > 0.0);
  CHECK(er.median > 0.0);
  CHECK(er.median <= er.sup);
}

TEST_CASE("bergman density is extremal among unit-norm sections") {
  auto pts = some_probes(10, 13);
  for (std::size_t i = 2; i < chain().states.size(); ++i) {
    ExtremalReport rep = bergman_extremal_gap(quartic(), chain().states[i], sample(), make_weight_one(), pts, 200, 1);
    CHECK(rep.max_gap <= 1e-9);
    CHECK(rep.max_random_excess <= 1e-12);
    CHECK(rep.probes == 10);
  }
}

TEST_CASE("rate fit recovers an exact model and flags a wrong one") {
  std::vector<int> ms{4, 5, 6, 7, 8, 10, 12, 16};
  std::vector<double> self, fast;
  for (int m : ms) {
    self.push_back(0.5 * std::log(static_cast<double>(m)) / m);
    fast.push_back(1.0 / static_cast<double>(m * m));
  }
  RateFit fs = rate_fit(ms, self);
  CHECK(std::abs(fs.C - 0.5) < 1e-14);
  CHECK(std::abs(fs.R2 - 1.0) < 1e-14);
  RateFit ff = rate_fit(ms, fast);
  CHECK(ff.R2 < 0.8);
}

TEST_CASE("rate fit validates its series") {
  std::vector<int> ms{2, 3, 4, 5};
  CHECK_THROWS_AS(rate_fit(ms, {1.0, 2.0}), Error);                    // length mismatch
  CHECK_THROWS_AS(rate_fit({2, 3, 4}, {1.0, 0.5, 0.3}), Error);       // too short
  CHECK_THROWS_AS(rate_fit(ms, {1.0, 0.5, -0.1, 0.2}), Error);        // nonpositive
  CHECK_THROWS_AS(rate_fit(ms, {1.0, 1.0, 1.0, 1.0}), Error);         // constant
  CHECK_THROWS_AS(rate_fit({1, 2, 3, 4}, {1.0, 0.5, 0.3, 0.2}), Error);  // m below 2
  try {
    rate_fit(ms, {1.0, 1.0, 1.0, 1.0});
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("degenerate") != std::string::npos);
  }
}

namespace {
MetricState rank_one_state(int m, double gamma) {
  MetricState st;
  st.m = m;
  st.basis = canonical_power_basis(quartic(), m);
  Eigen::Index N = static_cast<Eigen::Index>(st.basis.exps.size());
  Eigen::Index idx = -1;
  for (Eigen::Index i = 0; i < N; ++i)
    if (st.basis.exps[static_cast<std::size_t>(i)][2] == m) idx = i;
  REQUIRE(idx >= 0);
  st.P = MatC::Zero(N, N);
  st.P(idx, idx) = gamma;
  st.variety_hash = quartic().content_hash;
  st.provenance = "synthetic";
  return st;
}
}  // namespace

TEST_CASE("envelope analysis decodes a synthetic product chain exactly") {
  // gamma_m = m+1 up to the reference level makes the scaled sup sequence
  // log(m+1) on the nose, with increments log(1 + 1/(m+1))
  const int M = 13;
  std::vector<MetricState> prod, constant;
  for (int m = 1; m <= M; ++m) {
    prod.push_back(rank_one_state(m, m < M ? static_cast<double>(m + 1) : 1.0));
    constant.push_back(rank_one_state(m, 1.0));
  }
  auto pts = some_probes(15, 14);
  EnvelopeReport env = envelope_monotonicity(quartic(), prod, pts);
  REQUIRE(env.sups.size() == static_cast<std::size_t>(M - 1));
  for (std::size_t i = 0; i < env.sups.size(); ++i)
    CHECK(std::abs(env.sups[i] - std::log(static_cast<double>(i + 2))) < 1e-9);
  for (std::size_t i = 0; i < env.increments.size(); ++i)
    CHECK(std::abs(env.increments[i] - std::log1p(1.0 / static_cast<double>(i + 2))) < 1e-9);
  CHECK(env.A > 0.8);
  CHECK(env.A < 1.05);
  CHECK(env.violations.empty());

  EnvelopeReport cst = envelope_monotonicity(quartic(), constant, pts);
  CHECK(cst.A < 1e-10);
}

TEST_CASE("envelope analysis validates its input") {
  std::vector<MetricState> two{rank_one_state(1, 1.0), rank_one_state(2, 1.0)};
  CHECK_THROWS_AS(envelope_monotonicity(quartic(), two, some_probes(5, 15)), Error);
  std::vector<MetricState> enough;
  for (int m = 1; m <= 5; ++m) enough.push_back(rank_one_state(m, 1.0));
  CHECK_THROWS_AS(envelope_monotonicity(quartic(), enough, {}), Error);
}

TEST_CASE("convergence series carries one row per step with fit bookkeeping") {
  auto pts = some_probes(25, 16);
  ConvergenceSeries cs = build_convergence_series(quartic(), chain(), pts, true);
  REQUIRE(cs.rows.size() == chain().states.size() - 1);
  for (std::size_t i = 0; i < cs.rows.size(); ++i) {
    CHECK(cs.rows[i].m == chain().states[i].m);
    CHECK(cs.rows[i].sup_delta >= cs.rows[i].mean_delta);
    CHECK(cs.rows[i].mean_delta >= cs.rows[i].inf_delta);
    CHECK(cs.rows[i].sup_delta > 0.0);
    CHECK(cs.rows[i].holder_slack >= -1e-12);
    CHECK(cs.rows[i].einstein_median > 0.0);  // curve, einstein requested
  }
  CHECK(cs.fit_ok);  // rows at m = 2..5 give four usable points
  CHECK(cs.fit.C > 0.0);
  CHECK(cs.fit_model == "C*log(m)/m");

  ChainResult tiny;
  tiny.states.assign(chain().states.begin(), chain().states.begin() + 3);
  tiny.reports.assign(chain().reports.begin(), chain().reports.begin() + 2);
  ConvergenceSeries small = build_convergence_series(quartic(), tiny, pts, false);
  CHECK(small.rows.size() == 2);
  CHECK_FALSE(small.fit_ok);
  CHECK(small.rows[0].einstein_median == 0.0);  // einstein disabled
}
