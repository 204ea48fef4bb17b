#include <catch2/catch_amalgamated.hpp>

#include "keiter/iteration.hpp"

using namespace kei;

namespace {
const Hypersurface& quartic() {
  static Hypersurface X = parse_hypersurface("x^4 + y^4 + z^4");
  return X;
}
const SampleSet& sample() {
  static SampleSet S = sample_fs(quartic(), 6000, 314159);
  return S;
}
const ChainResult& chain() {
  static ChainResult ch = run_chain_shared(quartic(), init_state(quartic()), 6, make_weight_one(), sample());
  return ch;
}
}  // namespace

TEST_CASE("update constants are products of consecutive integers") {
  // divisor for the step leaving level m is (m+2)(m+3)...(m+n+1)
  CHECK(update_constant(1, 1) == 3.0);
  CHECK(update_constant(1, 2) == 4.0);
  CHECK(update_constant(1, 15) == 17.0);
  CHECK(update_constant(2, 2) == 20.0);
  CHECK(update_constant(2, 3) == 30.0);
  CHECK(update_constant(3, 2) == 120.0);
}

TEST_CASE("initial state is the identity metric on the level basis") {
  MetricState st = init_state(quartic());
  CHECK(st.m == 1);
  CHECK(st.basis.exps.size() == 3);
  CHECK(st.P.rows() == 3);
  CHECK((st.P - MatC::Identity(3, 3)).norm() == 0.0);
  CHECK(st.variety_hash == quartic().content_hash);
  MetricState st4 = init_state(quartic(), 4);
  CHECK(st4.m == 4);
  CHECK(st4.P.rows() == 14);
}

TEST_CASE("state validation catches mismatched shapes and varieties") {
  MetricState st = init_state(quartic());
  st.P = MatC::Identity(4, 4);
  CHECK_THROWS_AS(check_state(quartic(), st), Error);
  MetricState st2 = init_state(quartic());
  st2.variety_hash = "0000000000000000";
  CHECK_THROWS_AS(check_state(quartic(), st2), Error);
}

TEST_CASE("density evaluation is positive and scales linearly in P") {
  const MetricState& st = chain().states[2];
  VarietyPoint p = sample().points[17];
  double b = eval_B(quartic(), st, p);
  CHECK(b > 0.0);
  MetricState st2 = st;
  st2.P *= 2.0;
  CHECK(eval_B(quartic(), st2, p) == 2.0 * b);
}

TEST_CASE("first step trace sum hits the dimension ratio exactly") {
  // leaving m=1: divisor 3, dim H0(2K) = 6, so the weighted trace is 2
  StepReport rep;
  MetricState next = step(quartic(), init_state(quartic()), sample(), make_weight_one(), &rep);
  CHECK(next.m == 2);
  CHECK(rep.m_from == 1);
  CHECK(rep.m_to == 2);
  CHECK(std::abs(rep.trace_sum - 2.0) < 1e-12);
  CHECK(rep.trace_residual < 1e-13);
  CHECK(rep.min_eigenvalue > 0.0);
  CHECK(rep.condition >= 1.0);
  CHECK(std::abs(rep.sample_mass - 4.0) < 1e-9);
}

TEST_CASE("every chain step satisfies the finite-sample identities") {
  for (const auto& r : chain().reports) {
    double divisor = update_constant(1, r.m_from);
    double expect = static_cast<double>(4 * r.m_to - 2) / divisor;
    CHECK(std::abs(r.trace_sum - expect) <= 1e-12 * expect);
    CHECK(r.trace_residual <= 1e-13);
    CHECK(r.holder_slack >= -1e-12);
    CHECK(r.L_after > 0.0);
    CHECK(r.L_before > 0.0);
  }
  CHECK(chain().reports.size() == 5);
  CHECK_FALSE(chain().aborted);
}

TEST_CASE("eta ratio of a state with itself is exactly one") {
  const MetricState& st = chain().states[3];
  VarietyPoint p = sample().points[3];
  CHECK(eta_ratio(quartic(), st, st, p) == 1.0);
  CHECK(log_eta_ratio(quartic(), st, st, p) == 0.0);
}

TEST_CASE("log eta ratio is antisymmetric") {
  const MetricState& a = chain().states[2];
  const MetricState& b = chain().states[4];
  VarietyPoint p = sample().points[8];
  CHECK(log_eta_ratio(quartic(), a, b, p) == -log_eta_ratio(quartic(), b, a, p));
}

TEST_CASE("gram matrix demands a matching sample set") {
  Hypersurface Y = parse_hypersurface("x^5 + y^5 + z^5");
  SampleSet SY = sample_fs(Y, 500, 2);
  CHECK_THROWS_AS(gram_matrix(quartic(), init_state(quartic()), SY, make_weight_one()), Error);
  SampleSet empty;
  empty.variety_hash = quartic().content_hash;
  CHECK_THROWS_AS(gram_matrix(quartic(), init_state(quartic()), empty, make_weight_one()), Error);
}

TEST_CASE("gram matrix is hermitian positive definite on a healthy sample") {
  MatC G = gram_matrix(quartic(), chain().states[1], sample(), make_weight_one());
  CHECK((G - G.adjoint()).norm() == 0.0);  // symmetrized on construction
  Eigen::SelfAdjointEigenSolver<MatC> es(G);
  CHECK(es.eigenvalues()(0) > 0.0);
}

TEST_CASE("an undersized sample aborts the chain with a numerical reason") {
  SampleSet tiny = sample_fs(quartic(), 8, 77);  // fewer points than dim H0(4K) = 14
  ChainResult ch = run_chain_shared(quartic(), init_state(quartic()), 6, make_weight_one(), tiny);
  CHECK(ch.aborted);
  CHECK(ch.states.back().m < 6);
  CHECK_FALSE(ch.abort_reason.empty());
}

TEST_CASE("target level must exceed the starting level") {
  CHECK_THROWS_AS(run_chain_shared(quartic(), init_state(quartic(), 3), 3, make_weight_one(), sample()), Error);
}

TEST_CASE("scaling the initial metric scales every iterate covariantly") {
  MetricState scaled = init_state(quartic());
  scaled.P *= 1.0 / 7.0;
  ChainResult ch7 = run_chain_shared(quartic(), scaled, 4, make_weight_one(), sample());
  for (std::size_t i = 0; i < ch7.states.size(); ++i) {
    double mm = static_cast<double>(chain().states[i].m);
    VarietyPoint p = sample().points[21];
    double r = eval_B(quartic(), chain().states[i], p) / eval_B(quartic(), ch7.states[i], p);
    CHECK(std::abs(std::pow(r, 1.0 / mm) - std::pow(7.0, 1.0 / mm)) < 1e-12 * std::pow(7.0, 1.0 / mm));
  }
}

TEST_CASE("reruns are bitwise identical") {
  ChainResult again = run_chain_shared(quartic(), init_state(quartic()), 6, make_weight_one(), sample());
  REQUIRE(again.states.size() == chain().states.size());
  for (std::size_t i = 0; i < again.states.size(); ++i) {
    const MatC& A = again.states[i].P;
    const MatC& B = chain().states[i].P;
    REQUIRE(A.rows() == B.rows());
    for (Eigen::Index r = 0; r < A.rows(); ++r)
      for (Eigen::Index c = 0; c < A.cols(); ++c) CHECK(A(r, c) == B(r, c));
  }
}

TEST_CASE("weighted chains keep the identities with a nontrivial weight") {
  WeightSpec w = make_weight_zero(parse_polynomial("x", 3), 0.5);
  normalize_weight_sup(w, sample());
  ChainResult ch = run_chain_shared(quartic(), init_state(quartic()), 5, w, sample());
  CHECK_FALSE(ch.aborted);
  for (const auto& r : ch.reports) {
    CHECK(r.trace_residual <= 1e-13);
    CHECK(r.holder_slack >= -1e-12);
  }
}

TEST_CASE("functional L matches the step report bookkeeping") {
  double l = functional_L(quartic(), chain().states[0], sample(), make_weight_one());
  CHECK(std::abs(l - chain().reports[0].L_before) <= 1e-12 * l);
}
