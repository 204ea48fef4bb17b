#pragma once

// Built-in verification battery. Each check is named, self-contained, and
// cheap enough for a pre-run sanity pass; the fault-injection check confirms
// the trace-identity detector actually fires on a corrupted update.

#include <chrono>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "keiter/diagnostics.hpp"
#include "keiter/io.hpp"
#include "keiter/iteration.hpp"
#include "keiter/sampling.hpp"
#include "keiter/variety.hpp"
#include "keiter/weights.hpp"

namespace kei {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double millis = 0.0;
};

namespace checks {

struct Outcome {
  bool pass;
  std::string detail;
};

inline Outcome ok(std::string d) { return {true, std::move(d)}; }
inline Outcome bad(std::string d) { return {false, std::move(d)}; }

inline std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(3);
  ss << std::scientific << v;
  return ss.str();
}

// Shared tiny chain: Fermat quartic, modest sample, levels 1..6.
struct Fixture {
  Hypersurface X;
  SampleSet S;
  ChainResult chain;
  std::vector<VarietyPoint> probes;

  Fixture() : X(parse_hypersurface("x^4 + y^4 + z^4")) {
    S = sample_fs(X, 8000, 1914);
    chain = run_chain(X, init_state(X), 6, make_weight_one(), [&](int) -> const SampleSet& { return S; });
    SampleSet P = sample_fs(X, 24, 8128);
    probes = P.points;
  }
};

inline const Fixture& fixture() {
  static Fixture f;
  return f;
}

inline Outcome ball_mass_anchor() {
  BallMassResult r1 = ball_mass_check(1, 100, 16.0);
  BallMassResult r2 = ball_mass_check(2, 50, 16.0);
  if (r1.abs_error > 1e-8) return bad("n=1 m=100 error " + fmt(r1.abs_error));
  if (r2.abs_error > 1e-8) return bad("n=2 m=50 error " + fmt(r2.abs_error));
  return ok("errors " + fmt(r1.abs_error) + " / " + fmt(r2.abs_error));
}

inline Outcome ball_mass_sweep() {
  // b = 1 keeps the truncation radius inside the unit ball so the sweep
  // actually measures the superpolynomial tail decay.
  std::vector<int> ms{20, 50, 100, 200};
  std::vector<double> lx, ly;
  for (int m : ms) {
    BallMassResult r = ball_mass_check(1, m, 1.0);
    if (!(r.abs_error > 0.0)) return bad("truncation error vanished at m=" + std::to_string(m));
    lx.push_back(std::log(static_cast<double>(m)));
    ly.push_back(std::log(r.abs_error));
  }
  double n = static_cast<double>(lx.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  if (!(slope < -4.0)) return bad("log-log slope " + fmt(slope) + " not < -4");
  return ok("log-log slope " + fmt(slope));
}

inline Outcome trace_identity() {
  double worst = 0.0;
  for (const auto& r : fixture().chain.reports) worst = std::max(worst, std::abs(r.trace_residual));
  if (worst > 1e-8) return bad("worst relative trace residual " + fmt(worst));
  return ok("worst relative trace residual " + fmt(worst));
}

inline Outcome holder_slack() {
  double lo = 1e300;
  for (const auto& r : fixture().chain.reports) lo = std::min(lo, r.holder_slack);
  if (lo < -1e-12) return bad("negative slack " + fmt(lo));
  return ok("minimum slack " + fmt(lo));
}

// Detector sanity: a ridge added to the Gram matrix must break the trace
// identity by far more than the pass threshold.
inline Outcome trace_identity_fault() {
  const Fixture& f = fixture();
  const MetricState& st = f.chain.states.front();
  CanonicalBasis next;
  MatC U_next;
  VecR B_cur;
  MatC G = gram_matrix(f.X, st, f.S, make_weight_one(), &next, &U_next, &B_cur);
  G += 1e-2 * MatC::Identity(G.rows(), G.cols());
  double divisor = update_constant(f.X.dim(), st.m);
  MatC P_bad = G.inverse() / divisor;
  double tr = 0.0;
  for (std::size_t k = 0; k < f.S.size(); ++k) {
    auto i = static_cast<Eigen::Index>(k);
    VecC u = U_next.row(i).transpose();
    double Bn = ((u.adjoint() * P_bad * u)(0)).real();
    tr += f.S.weights[i] * residue_fs_density(f.X, f.S.points[k]) * Bn / B_cur[i];
  }
  double expect = static_cast<double>(next.exps.size()) / divisor;
  double res = std::abs(tr - expect) / expect;
  if (res <= 1e-8) return bad("ridge fault not detected, residual " + fmt(res));
  return ok("injected ridge detected, residual " + fmt(res));
}

inline Outcome extremal_identity() {
  const Fixture& f = fixture();
  std::vector<VarietyPoint> probes(f.probes.begin(), f.probes.begin() + 10);
  double worst_gap = 0.0, worst_excess = 0.0;
  for (const auto& st : f.chain.states) {
    ExtremalReport rep = bergman_extremal_gap(f.X, st, f.S, make_weight_one(), probes, 200, 5);
    worst_gap = std::max(worst_gap, rep.max_gap);
    worst_excess = std::max(worst_excess, rep.max_random_excess);
  }
  if (worst_gap > 1e-9) return bad("extremal gap " + fmt(worst_gap));
  if (worst_excess > 1e-12) return bad("random section exceeded the density by " + fmt(worst_excess));
  return ok("gap " + fmt(worst_gap) + ", random excess " + fmt(worst_excess));
}

// Transform the level-m coefficient basis by an invertible matrix T; the
// Bergman density is unchanged because the metric matrix transports
// contravariantly (u -> T u, P -> T^{-dag} P T^{-1}).
inline Outcome basis_change_pointwise() {
  const Fixture& f = fixture();
  const MetricState& st = f.chain.states[2];
  Rng rng(99);
  Eigen::Index N = st.P.rows();
  MatC T = MatC::Zero(N, N);
  for (Eigen::Index r = 0; r < N; ++r)
    for (Eigen::Index c = 0; c < N; ++c) T(r, c) = rng.cgaussian();
  Eigen::HouseholderQR<MatC> qr(T);
  MatC Q = qr.householderQ();
  VecR d(N);
  for (Eigen::Index i = 0; i < N; ++i) d[i] = 0.5 + 1.5 * rng.uniform01();
  T = Q * d.asDiagonal() * Q.adjoint();  // condition number <= 4

  MetricState alt = st;
  MatC Tin = T.partialPivLu().inverse();
  alt.P = (Tin.adjoint() * st.P * Tin).eval();  // coefficients u -> T u leave u^dag P u fixed
  double worst = 0.0;
  for (const auto& p : f.probes) {
    VecC u = evaluate_basis(f.X, st.basis, p);
    double b0 = ((u.adjoint() * st.P * u)(0)).real();
    VecC v = T * u;
    double b1 = ((v.adjoint() * alt.P * v)(0)).real();
    worst = std::max(worst, std::abs(b1 - b0) / b0);
  }
  if (worst > 1e-9) return bad("transported density deviates by " + fmt(worst));
  return ok("worst relative deviation " + fmt(worst));
}

inline Outcome scaling_covariance() {
  const Fixture& f = fixture();
  MetricState scaled = init_state(f.X);
  scaled.P *= 1.0 / 7.0;  // h_{m0} -> 7 h_{m0}
  ChainResult ch7 = run_chain(f.X, scaled, 5, make_weight_one(), [&](int) -> const SampleSet& { return f.S; });
  double worst = 0.0;
  for (std::size_t i = 0; i < ch7.states.size(); ++i) {
    const MetricState& a = f.chain.states[i];
    const MetricState& b = ch7.states[i];
    double expect = std::pow(7.0, 1.0 / static_cast<double>(a.m));
    for (const auto& p : f.probes) {
      double r = eval_B(f.X, a, p) / eval_B(f.X, b, p);
      worst = std::max(worst, std::abs(std::pow(r, 1.0 / static_cast<double>(a.m)) - expect) / expect);
    }
  }
  if (worst > 1e-12) return bad("covariance violated by " + fmt(worst));
  return ok("worst relative deviation " + fmt(worst));
}

inline Outcome unitary_invariance() {
  // Any G-orthonormal family spans the same density: sum_i |<c_i, u>|^2 with
  // A^dag G A = I equals u^dag G^{-1} u for every A, so rotating the family by
  // a unitary cannot change B.
  const Fixture& f = fixture();
  const MetricState& st = f.chain.states[3];
  Rng rng(321);
  Eigen::Index N = st.P.rows();
  MatC G = st.P.inverse();  // the Gram matrix this state was built from, up to the constant
  Eigen::LLT<MatC> llt(MatC(0.5 * (G + G.adjoint())));
  if (llt.info() != Eigen::Success) return bad("state Gram not positive definite");
  MatC Linv = llt.matrixL().solve(MatC::Identity(N, N));
  MatC A0 = Linv.adjoint();  // G-orthonormal columns: A0^dag G A0 = I
  MatC U = MatC::Zero(N, N);
  for (Eigen::Index r = 0; r < N; ++r)
    for (Eigen::Index c = 0; c < N; ++c) U(r, c) = rng.cgaussian();
  Eigen::HouseholderQR<MatC> qr(U);
  U = qr.householderQ();
  MatC A1 = A0 * U;
  double worst = 0.0;
  for (const auto& p : f.probes) {
    VecC u = evaluate_basis(f.X, st.basis, p);
    double b0 = (A0.adjoint() * u).squaredNorm();
    double b1 = (A1.adjoint() * u).squaredNorm();
    worst = std::max(worst, std::abs(b1 - b0) / b0);
  }
  if (worst > 1e-10) return bad("rotated family changed the density by " + fmt(worst));
  return ok("worst relative deviation " + fmt(worst));
}

inline Outcome dimension_law() {
  Hypersurface quartic = parse_hypersurface("x^4 + y^4 + z^4");
  Hypersurface quintic = parse_hypersurface("x^5 + y^5 + z^5 + x y^3 z");
  for (int m = 2; m <= 12; ++m) {
    long long nq = static_cast<long long>(canonical_power_basis(quartic, m).exps.size());
    long long n5 = static_cast<long long>(canonical_power_basis(quintic, m).exps.size());
    if (nq != (2LL * m - 1) * 2) return bad("quartic m=" + std::to_string(m) + " dim " + std::to_string(nq));
    if (n5 != (2LL * m - 1) * 5) return bad("quintic m=" + std::to_string(m) + " dim " + std::to_string(n5));
  }
  // rank cross-check at one level
  CanonicalBasis b = canonical_power_basis(quartic, 5);
  SampleSet S = sample_fs(quartic, 3 * b.exps.size(), 5150);
  MatC M = section_value_matrix(quartic, b, S);
  Eigen::ColPivHouseholderQR<MatC> qr(M);
  qr.setThreshold(1e-9);
  if (qr.rank() != static_cast<Eigen::Index>(b.exps.size()))
    return bad("evaluation rank " + std::to_string(qr.rank()) + " != " + std::to_string(b.exps.size()));
  return ok("(2m-1)(g-1) holds on both curves, rank verified");
}

inline Outcome quadrature_mass() {
  const Hypersurface& X = fixture().X;
  double d = static_cast<double>(X.degree());
  SampleSet q16 = curve_chart_quadrature(X, 16);
  SampleSet q32 = curve_chart_quadrature(X, 32);
  double e16 = std::abs(q16.total_weight() - d);
  double e32 = std::abs(q32.total_weight() - d);
  if (e32 > 5e-3) return bad("resolution-32 mass error " + fmt(e32));
  if (!(e32 < 0.5 * e16)) return bad("refinement did not reduce the error: " + fmt(e16) + " -> " + fmt(e32));
  return ok("mass errors " + fmt(e16) + " -> " + fmt(e32));
}

inline Outcome mc_symmetry() {
  // On the Fermat quartic, integral of |x|^2/||z||^2 is d/3 by coordinate
  // symmetry; checked against the estimator's own error bar.
  const Fixture& f = fixture();
  McResult r = mc_integrate(f.S, [&](const VarietyPoint& p) {
    return std::norm(p.z[0]) / static_cast<double>(p.z.squaredNorm());
  });
  double expect = 4.0 / 3.0;
  double dev = std::abs(r.value - expect);
  if (dev > std::max(4.0 * r.stderr_est, 1e-3)) return bad("deviation " + fmt(dev) + " vs stderr " + fmt(r.stderr_est));
  return ok("deviation " + fmt(dev) + " within " + fmt(r.stderr_est) + " stderr scale");
}

inline Outcome weight_vanishing() {
  const Fixture& f = fixture();
  WeightSpec w = make_weight_zero(parse_polynomial("x", f.X.nvars()), 0.5);
  normalize_weight_sup(w, f.S);
  double worst = 0.0;
  for (const auto& p : f.probes) {
    double b = eval_weight(w, p);
    if (b < 0.0 || b > 1.0) return bad("weight out of [0,1]: " + fmt(b));
    worst = std::max(worst, b);
  }
  // a point of X with x = 0: (0, 1, c) with c^4 = -1
  VecC z(3);
  z << cplx(0, 0), cplx(1, 0), std::polar(1.0, 3.14159265358979323846 / 4.0);
  VarietyPoint p0 = make_point(f.X, z);
  newton_polish(f.X, p0);
  double at_zero = eval_weight(w, p0);
  if (at_zero > 1e-12) return bad("weight at a vanishing-locus point: " + fmt(at_zero));
  return ok("range [0,1], zero locus respected (" + fmt(at_zero) + ")");
}

inline Outcome weighted_chain_identities() {
  const Fixture& f = fixture();
  WeightSpec w = make_weight_zero(parse_polynomial("x", f.X.nvars()), 0.5);
  normalize_weight_sup(w, f.S);
  ChainResult ch = run_chain(f.X, init_state(f.X), 5, w, [&](int) -> const SampleSet& { return f.S; });
  double worst_tr = 0.0, lo_slack = 1e300;
  for (const auto& r : ch.reports) {
    worst_tr = std::max(worst_tr, std::abs(r.trace_residual));
    lo_slack = std::min(lo_slack, r.holder_slack);
  }
  if (worst_tr > 1e-8) return bad("weighted trace residual " + fmt(worst_tr));
  if (lo_slack < -1e-12) return bad("weighted slack " + fmt(lo_slack));
  return ok("trace " + fmt(worst_tr) + ", slack " + fmt(lo_slack));
}

inline Outcome determinism_threads() {
  const Fixture& f = fixture();
  int saved = global_thread_count();
  global_thread_count() = 1;
  SampleSet s1 = sample_fs(f.X, 4000, 777);
  ChainResult c1 = run_chain(f.X, init_state(f.X), 4, make_weight_one(), [&](int) -> const SampleSet& { return s1; });
  global_thread_count() = 8;
  SampleSet s8 = sample_fs(f.X, 4000, 777);
  ChainResult c8 = run_chain(f.X, init_state(f.X), 4, make_weight_one(), [&](int) -> const SampleSet& { return s8; });
  global_thread_count() = saved;
  if (sample_content_hash(s1) != sample_content_hash(s8)) return bad("sample differs across thread counts");
  for (std::size_t i = 0; i < c1.states.size(); ++i) {
    RunStamp st;
    if (state_to_json(c1.states[i], st, 1.0).dump() != state_to_json(c8.states[i], st, 1.0).dump())
      return bad("state m=" + std::to_string(c1.states[i].m) + " differs across thread counts");
  }
  return ok("samples and states byte-identical at 1 and 8 threads");
}

inline Outcome curvature_consistency() {
  const Fixture& f = fixture();
  CurvatureOperator op(f.X, f.chain.states.back());
  double worst = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    const VarietyPoint& p = f.probes[i];
    double ga = op.analytic_at(p.z, p.chart_affine, p.chart_residue);
    double gf = op.fd_at(p.z, p.chart_affine, p.chart_residue, 1e-3);
    worst = std::max(worst, std::abs(ga - gf) / std::max(1.0, std::abs(ga)));
  }
  if (worst > 1e-6) return bad("analytic and stencil curvature disagree by " + fmt(worst));
  return ok("two routes agree to " + fmt(worst));
}

inline Outcome einstein_synthetics() {
  // Poincare disk normalized to Ric = -omega: g = 2/(1-|w|^2)^2 has residual
  // 0; the flat coefficient g = 1 has residual exactly 1.
  cplx w0(0.31, -0.17);
  auto logg_h = [](cplx w) { return std::log(2.0) - 2.0 * std::log(1.0 - std::norm(w)); };
  double gh = 2.0 / ((1.0 - std::norm(w0)) * (1.0 - std::norm(w0)));
  double res_h = std::abs(dbar_d(logg_h, w0, 1e-2) / gh - 1.0);
  double res_flat = std::abs(dbar_d([](cplx) { return 0.0; }, w0, 1e-2) / 1.0 - 1.0);
  int m = 7;
  auto phi_fs = [&](cplx w) { return std::log(std::pow(1.0 + std::norm(w), m)) / m; };
  double g_fs = dbar_d(phi_fs, w0, 1e-3);
  double fs_err = std::abs(g_fs - 1.0 / ((1.0 + std::norm(w0)) * (1.0 + std::norm(w0))));
  if (res_h > 1e-5) return bad("hyperbolic synthetic residual " + fmt(res_h));
  if (std::abs(res_flat - 1.0) > 1e-12) return bad("flat synthetic residual " + fmt(res_flat));
  if (fs_err > 1e-7) return bad("round-metric synthetic error " + fmt(fs_err));
  return ok("hyperbolic " + fmt(res_h) + ", flat exact, round " + fmt(fs_err));
}

inline Outcome fd_order() {
  auto phi = [](cplx z) { return std::exp(std::norm(z)) * std::cos(0.3 * z.real() + 0.1 * z.imag()); };
  cplx z0(0.3, -0.2);
  double a = dbar_d_raw(phi, z0, 0.02);
  double b = dbar_d_raw(phi, z0, 0.01);
  double c = dbar_d_raw(phi, z0, 0.005);
  double ratio = (a - b) / (b - c);
  if (std::abs(ratio - 16.0) > 1.0) return bad("halving ratio " + fmt(ratio) + " not ~16");
  return ok("halving ratio " + fmt(ratio));
}

inline Outcome rate_fit_shape() {
  std::vector<int> ms{4, 5, 6, 7, 8, 10, 12, 16};
  std::vector<double> self, fast;
  for (int m : ms) {
    self.push_back(0.5 * std::log(static_cast<double>(m)) / m);
    fast.push_back(1.0 / (static_cast<double>(m) * m));
  }
  RateFit fs = rate_fit(ms, self);
  RateFit ff = rate_fit(ms, fast);
  if (std::abs(fs.C - 0.5) > 1e-12 || std::abs(fs.R2 - 1.0) > 1e-12)
    return bad("self-fit C=" + fmt(fs.C) + " R2=" + fmt(fs.R2));
  if (!(ff.R2 < 0.8)) return bad("faster-than-model series reported R2=" + fmt(ff.R2));
  return ok("self-fit exact, 1/m^2 reported low (R2=" + fmt(ff.R2) + ")");
}

inline Outcome envelope_shapes() {
  const Fixture& f = fixture();
  const Hypersurface& X = f.X;
  const int M = 13;
  auto make_rank1 = [&](int m, double gamma) {
    MetricState st;
    st.m = m;
    st.basis = canonical_power_basis(X, m);
    Eigen::Index N = static_cast<Eigen::Index>(st.basis.exps.size());
    Eigen::Index idx = -1;
    for (Eigen::Index i = 0; i < N; ++i)
      if (st.basis.exps[static_cast<std::size_t>(i)][2] == m) idx = i;
    if (idx < 0) fail_validation("pure power of the last variable missing from the basis");
    st.P = MatC::Zero(N, N);
    st.P(idx, idx) = gamma;
    st.variety_hash = X.content_hash;
    st.provenance = "synthetic";
    return st;
  };
  std::vector<MetricState> chain, constant;
  for (int m = 1; m <= M; ++m) {
    chain.push_back(make_rank1(m, m < M ? static_cast<double>(m + 1) : 1.0));
    constant.push_back(make_rank1(m, 1.0));
  }
  EnvelopeReport env = envelope_monotonicity(X, chain, f.probes);
  EnvelopeReport cst = envelope_monotonicity(X, constant, f.probes);
  double worst = 0.0;
  for (std::size_t i = 0; i < env.increments.size(); ++i)
    worst = std::max(worst, std::abs(env.increments[i] - std::log1p(1.0 / static_cast<double>(chain[i + 1].m))));
  if (worst > 1e-9) return bad("product-chain increments off by " + fmt(worst));
  if (std::abs(env.A - 1.0) > 0.1) return bad("product-chain envelope constant " + fmt(env.A));
  if (!env.violations.empty()) return bad("product chain reported monotonicity violations");
  if (cst.A > 1e-10) return bad("constant chain envelope constant " + fmt(cst.A));
  return ok("product-chain A=" + fmt(env.A) + ", constant-chain A=" + fmt(cst.A));
}

inline Outcome state_roundtrip() {
  const Fixture& f = fixture();
  const MetricState& st = f.chain.states.back();
  RunStamp stamp{"cfg", 1, "smp"};
  json j = state_to_json(st, stamp, 1.0);
  MetricState back = state_from_json(json::parse(j.dump()));
  if (back.m != st.m || back.P.rows() != st.P.rows()) return bad("shape changed in round trip");
  for (Eigen::Index r = 0; r < st.P.rows(); ++r)
    for (Eigen::Index c = 0; c < st.P.cols(); ++c)
      if (back.P(r, c) != st.P(r, c)) return bad("P entry changed in round trip");
  json j2 = state_to_json(back, stamp, 1.0);
  if (j.dump() != j2.dump()) return bad("serialized forms differ");
  return ok("bitwise round trip");
}

}  // namespace checks

struct NamedCheck {
  std::string name;
  std::function<checks::Outcome()> run;
};

inline const std::vector<NamedCheck>& verification_suite() {
  static const std::vector<NamedCheck> suite = {
      {"ball_mass_anchor", checks::ball_mass_anchor},
      {"ball_mass_sweep", checks::ball_mass_sweep},
      {"trace_identity", checks::trace_identity},
      {"holder_slack", checks::holder_slack},
      {"trace_identity_fault", checks::trace_identity_fault},
      {"extremal_identity", checks::extremal_identity},
      {"basis_change_invariance", checks::basis_change_pointwise},
      {"scaling_covariance", checks::scaling_covariance},
      {"unitary_invariance", checks::unitary_invariance},
      {"dimension_law", checks::dimension_law},
      {"quadrature_mass", checks::quadrature_mass},
      {"mc_symmetry", checks::mc_symmetry},
      {"weight_vanishing", checks::weight_vanishing},
      {"weighted_chain_identities", checks::weighted_chain_identities},
      {"determinism_threads", checks::determinism_threads},
      {"curvature_consistency", checks::curvature_consistency},
      {"einstein_synthetics", checks::einstein_synthetics},
      {"fd_order", checks::fd_order},
      {"rate_fit_shape", checks::rate_fit_shape},
      {"envelope_shapes", checks::envelope_shapes},
      {"state_roundtrip", checks::state_roundtrip},
  };
  return suite;
}

// Runs checks whose name contains `only` (all when empty). A check that
// throws is recorded as failed with the error text.
inline std::vector<CheckResult> run_verification(const std::string& only = "") {
  std::vector<CheckResult> out;
  for (const auto& c : verification_suite()) {
    if (!only.empty() && c.name.find(only) == std::string::npos) continue;
    CheckResult r;
    r.name = c.name;
    auto t0 = std::chrono::steady_clock::now();
    try {
      checks::Outcome o = c.run();
      r.pass = o.pass;
      r.detail = o.detail;
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  if (out.empty()) fail_validation("no verification check matches '" + only + "'");
  return out;
}

inline std::string verification_csv(const std::vector<CheckResult>& rs) {
  std::ostringstream ss;
  ss << "check,status,millis,detail\n";
  for (const auto& r : rs) {
    std::string detail = r.detail;
    for (char& ch : detail)
      if (ch == ',' || ch == '\n') ch = ';';
    ss << r.name << ',' << (r.pass ? "pass" : "FAIL") << ',' << num_str(r.millis) << ',' << detail << '\n';
  }
  return ss.str();
}

}  // namespace kei
