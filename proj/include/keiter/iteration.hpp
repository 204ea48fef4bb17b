#pragma once

// The iterative construction. A state at level m is the Hermitian positive
// matrix P with
//   B_m(p) = u(p)^dagger P u(p),   h_m = 1 / B_m,
// where u(p) are the canonical-basis monomial values at the normalized point
// (section coefficients in the shared residue frame; all frame factors cancel
// in the ratios this module reports). One step builds the Gram matrix of the
// level-(m+1) basis in the inner product weighted by h_m and advances
//   P_{m+1} = G^{-1} / prod_{k=m+2}^{m+n+1} k.
//
// Exact finite-sum invariants checked per step (same sample set as the Gram):
//   trace:    sum_k w beta Phi B_{m+1}/B_m = N_{m+1} / prod_k  (linear algebra)
//   Hoelder:  L_{m+1} <= t^(1/(m+1)) * L_m^(m/(m+1)),  t the computed trace sum,
// with L_m = sum_k w beta Phi B_m^(1/m).

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "keiter/common.hpp"
#include "keiter/sampling.hpp"
#include "keiter/variety.hpp"
#include "keiter/weights.hpp"

namespace kei {

inline constexpr double kGramConditionCap = 1e12;

struct MetricState {
  int m = 0;
  CanonicalBasis basis;
  MatC P;                   // Hermitian positive definite, B = u^dagger P u
  std::string variety_hash;
  std::string provenance;
};

// prod_{k=m+2}^{m+n+1} k, the normalization divisor for the step leaving level m.
inline double update_constant(int n, int m) {
  double prod = 1.0;
  for (int k = m + 2; k <= m + n + 1; ++k) prod *= static_cast<double>(k);
  return prod;
}

inline MetricState init_state(const Hypersurface& X, int m0 = 1) {
  MetricState st;
  st.m = m0;
  st.basis = canonical_power_basis(X, m0);
  st.P = MatC::Identity(static_cast<Eigen::Index>(st.basis.exps.size()), static_cast<Eigen::Index>(st.basis.exps.size()));
  st.variety_hash = X.content_hash;
  st.provenance = "identity initialization at level " + std::to_string(m0);
  return st;
}

inline void check_state(const Hypersurface& X, const MetricState& st) {
  if (st.variety_hash != X.content_hash) fail_validation("metric state belongs to a different variety (content hash mismatch)");
  if (st.m != st.basis.m) fail_validation("metric state level does not match its basis");
  if (st.P.rows() != st.P.cols() || st.P.rows() != static_cast<Eigen::Index>(st.basis.exps.size()))
    fail_validation("metric state matrix size does not match its basis");
}

inline double eval_B(const Hypersurface& X, const MetricState& st, const VarietyPoint& p) {
  VecC u = section_values(X, st.basis, p);
  double b = (u.adjoint() * st.P * u)(0).real();
  if (!(b > 0.0)) fail_numerical("nonpositive fibre value B at a sample point");
  return b;
}

// Matrix of section values, one row per sample point.
inline MatC section_value_matrix(const Hypersurface& X, const CanonicalBasis& basis, const SampleSet& S) {
  MatC U(static_cast<Eigen::Index>(S.size()), static_cast<Eigen::Index>(basis.exps.size()));
  parallel_for(S.size(), [&](std::size_t k) {
    U.row(static_cast<Eigen::Index>(k)) = section_values(X, basis, S.points[k]).transpose();
  });
  return U;
}

inline VecR eval_B_batch(const MatC& U, const MatC& P) {
  VecR b = (U * P).cwiseProduct(U.conjugate()).rowwise().sum().real();
  for (Eigen::Index k = 0; k < b.size(); ++k)
    if (!(b[k] > 0.0)) fail_numerical("nonpositive fibre value B at sample point " + std::to_string(k));
  return b;
}

// L_m = sum_k w beta Phi B_m^(1/m).
inline double functional_L(const Hypersurface& X, const MetricState& st, const SampleSet& S, const WeightSpec& w) {
  check_state(X, st);
  MatC U = section_value_matrix(X, st.basis, S);
  VecR B = eval_B_batch(U, st.P);
  double ex = 1.0 / static_cast<double>(st.m);
  double acc = 0.0;
  for (std::size_t k = 0; k < S.size(); ++k)
    acc += S.weights[static_cast<Eigen::Index>(k)] * eval_weight(w, S.points[k]) *
           residue_fs_density(X, S.points[k]) * std::pow(B[static_cast<Eigen::Index>(k)], ex);
  return acc;
}

// log of B_b(p)^(1/m_b) / B_a(p)^(1/m_a); both fibre values are taken at the
// same normalized point so the frame factors cancel.
inline double log_eta_ratio(const Hypersurface& X, const MetricState& a, const MetricState& b, const VarietyPoint& p) {
  double la = std::log(eval_B(X, a, p)) / static_cast<double>(a.m);
  double lb = std::log(eval_B(X, b, p)) / static_cast<double>(b.m);
  return lb - la;
}

inline double eta_ratio(const Hypersurface& X, const MetricState& a, const MetricState& b, const VarietyPoint& p) {
  return std::exp(log_eta_ratio(X, a, b, p));
}

struct StepReport {
  int m_from = 0;
  int m_to = 0;
  double condition = 0.0;       // lambda_max / lambda_min of the Gram matrix
  double min_eigenvalue = 0.0;
  double sample_mass = 0.0;     // sum of sample weights
  double trace_sum = 0.0;       // sum_k w beta Phi B_new/B_old
  double trace_residual = 0.0;  // relative deviation from N_new / divisor
  double L_before = 0.0;
  double L_after = 0.0;
  double holder_slack = 0.0;    // t^(1/m_new) L_before^(m_old/m_new) - L_after, >= 0 up to roundoff
  double millis = 0.0;
};

// Gram matrix of the level-(m+1) basis in the inner product
//   <s, t> = sum_k w beta Phi s(p_k) conj(t(p_k)) / B_m(p_k).
// Also returns the level-(m+1) basis and the per-point B_m values on request.
inline MatC gram_matrix(const Hypersurface& X, const MetricState& st, const SampleSet& S, const WeightSpec& w,
                        CanonicalBasis* basis_out = nullptr, MatC* U_next_out = nullptr, VecR* B_cur_out = nullptr) {
  check_state(X, st);
  if (S.variety_hash != X.content_hash) fail_validation("sample set belongs to a different variety (content hash mismatch)");
  if (S.points.empty()) fail_validation("cannot build a Gram matrix on an empty sample set");

  CanonicalBasis next = canonical_power_basis(X, st.m + 1);
  Eigen::Index K = static_cast<Eigen::Index>(S.size());

  MatC U_cur = section_value_matrix(X, st.basis, S);
  VecR B_cur = eval_B_batch(U_cur, st.P);
  MatC U_next = section_value_matrix(X, next, S);

  // row_k scaled by sqrt(w beta Phi / B); then G = U^dagger U
  VecR scale(K);
  parallel_for(S.size(), [&](std::size_t k) {
    Eigen::Index ke = static_cast<Eigen::Index>(k);
    double c = S.weights[ke] * eval_weight(w, S.points[k]) * residue_fs_density(X, S.points[k]) / B_cur[ke];
    if (!(c >= 0.0) || !std::isfinite(c)) fail_numerical("non-finite Gram contribution at sample point " + std::to_string(k));
    scale[ke] = std::sqrt(c);
  });
  MatC Us = scale.asDiagonal() * U_next;
  MatC G = Us.adjoint() * Us;
  G = cplx(0.5, 0.0) * (G + G.adjoint()).eval();
  if (basis_out) *basis_out = std::move(next);
  if (U_next_out) *U_next_out = std::move(U_next);
  if (B_cur_out) *B_cur_out = std::move(B_cur);
  return G;
}

inline MetricState step(const Hypersurface& X, const MetricState& st, const SampleSet& S, const WeightSpec& w,
                        StepReport* report = nullptr) {
  auto t0 = std::chrono::steady_clock::now();
  CanonicalBasis next;
  MatC U_next;
  VecR B_cur;
  MatC G = gram_matrix(X, st, S, w, &next, &U_next, &B_cur);
  Eigen::Index K = static_cast<Eigen::Index>(S.size());
  Eigen::Index N = static_cast<Eigen::Index>(next.exps.size());

  Eigen::SelfAdjointEigenSolver<MatC> es(G);
  if (es.info() != Eigen::Success) fail_numerical("Gram matrix eigendecomposition failed");
  double lo = es.eigenvalues()(0), hi = es.eigenvalues()(N - 1);
  if (!(lo > 0.0) || hi / lo > kGramConditionCap)
    fail_numerical("Gram matrix is numerically singular (condition " +
                   std::to_string(lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity()) +
                   " at level " + std::to_string(st.m + 1) + "); increase the sample size");

  double divisor = update_constant(X.dim(), st.m);
  MatC Pn = es.eigenvectors() * (1.0 / divisor / es.eigenvalues().array()).matrix().asDiagonal() *
            es.eigenvectors().adjoint();
  Pn = cplx(0.5, 0.0) * (Pn + Pn.adjoint()).eval();

  MetricState out;
  out.m = st.m + 1;
  out.basis = std::move(next);
  out.P = std::move(Pn);
  out.variety_hash = X.content_hash;
  out.provenance = st.provenance + " -> step@" + std::to_string(out.m);

  if (report) {
    report->m_from = st.m;
    report->m_to = out.m;
    report->condition = hi / lo;
    report->min_eigenvalue = lo;
    report->sample_mass = S.weights.sum();

    VecR B_next = eval_B_batch(U_next, out.P);
    double tsum = 0.0, l_before = 0.0, l_after = 0.0;
    double ex_b = 1.0 / static_cast<double>(st.m), ex_a = 1.0 / static_cast<double>(out.m);
    for (Eigen::Index k = 0; k < K; ++k) {
      double base = S.weights[k] * eval_weight(w, S.points[static_cast<std::size_t>(k)]) *
                    residue_fs_density(X, S.points[static_cast<std::size_t>(k)]);
      tsum += base * B_next[k] / B_cur[k];
      l_before += base * std::pow(B_cur[k], ex_b);
      l_after += base * std::pow(B_next[k], ex_a);
    }
    double c_exact = static_cast<double>(N) / divisor;
    report->trace_sum = tsum;
    report->trace_residual = std::abs(tsum - c_exact) / c_exact;
    report->L_before = l_before;
    report->L_after = l_after;
    report->holder_slack = std::pow(tsum, ex_a) * std::pow(l_before, static_cast<double>(st.m) * ex_a) - l_after;
    report->millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  return out;
}

struct ChainResult {
  std::vector<MetricState> states;   // the initial state plus one per completed step
  std::vector<StepReport> reports;   // one per completed step
  bool aborted = false;
  std::string abort_reason;
};

// Advances from `start` to level m_max. The provider returns the sample set
// for the step leaving level m (shared sets return the same reference every
// time). On a numerical failure the completed prefix is returned with the
// abort flag set.
inline ChainResult run_chain(const Hypersurface& X, const MetricState& start, int m_max, const WeightSpec& w,
                             const std::function<const SampleSet&(int)>& provider) {
  check_state(X, start);
  if (m_max <= start.m) fail_validation("target level must exceed the starting level");
  ChainResult res;
  res.states.push_back(start);
  for (int m = start.m; m < m_max; ++m) {
    StepReport rep;
    try {
      res.states.push_back(step(X, res.states.back(), provider(m), w, &rep));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::validation) throw;
      res.aborted = true;
      res.abort_reason = e.what();
      return res;
    }
    res.reports.push_back(rep);
  }
  return res;
}

inline ChainResult run_chain_shared(const Hypersurface& X, const MetricState& start, int m_max, const WeightSpec& w,
                                    const SampleSet& S) {
  return run_chain(X, start, m_max, w, [&](int) -> const SampleSet& { return S; });
}

}  // namespace kei
