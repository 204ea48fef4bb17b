#pragma once

// Convergence diagnostics: truncated ball-mass quadrature, the Bergman
// extremal identity, curvature and Einstein residuals for curves, and rate /
// envelope fits for the eta-ratio series.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "keiter/common.hpp"
#include "keiter/iteration.hpp"
#include "keiter/sampling.hpp"
#include "keiter/variety.hpp"
#include "keiter/weights.hpp"

namespace kei {

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature.

struct GLRule {
  VecR nodes;    // on (-1, 1)
  VecR weights;
};

// Nodes by Newton iteration on the Legendre three-term recurrence.
inline GLRule gauss_legendre(int n) {
  if (n < 2) fail_validation("Gauss-Legendre rule needs at least 2 nodes");
  GLRule r;
  r.nodes = VecR(n);
  r.weights = VecR(n);
  const double pi = 3.14159265358979323846264338328;
  for (int k = 0; k < n; ++k) {
    double x = std::cos(pi * (static_cast<double>(k) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / static_cast<double>(j);
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    r.nodes[k] = x;
    r.weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

namespace detail {

inline double gl_panel(const std::function<double(double)>& f, const GLRule& rule, double a, double b) {
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < rule.nodes.size(); ++k) acc += rule.weights[k] * f(mid + half * rule.nodes[k]);
  return acc * half;
}

inline double gl_adaptive(const std::function<double(double)>& f, const GLRule& rule, double a, double b,
                          double tol, int depth) {
  double whole = gl_panel(f, rule, a, b);
  double mid = 0.5 * (a + b);
  double split = gl_panel(f, rule, a, mid) + gl_panel(f, rule, mid, b);
  if (std::abs(split - whole) <= tol * std::max(1e-300, std::abs(split)) + 1e-300) return split;
  if (depth >= 40) fail_numerical("adaptive quadrature failed to converge");
  return gl_adaptive(f, rule, a, mid, tol, depth + 1) + gl_adaptive(f, rule, mid, b, tol, depth + 1);
}

}  // namespace detail

inline double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double rel_tol = 1e-14) {
  static const GLRule rule = gauss_legendre(20);
  if (!(b > a)) fail_validation("integration interval is empty");
  return detail::gl_adaptive(f, rule, a, b, rel_tol, 0);
}

// ---------------------------------------------------------------------------
// Ball-mass check: the mass of (1 - |z|^2)^m over the ball |z|^2 <= b (log m)^2 / m
// in C^n, normalized by pi^n, against the full-ball value m! / (m+n)!.
// Radially, mass = (1/(n-1)!) int_0^min(R,1) (1-rho)^m rho^(n-1) drho; the
// integrand lives on |z|^2 < 1, so an over-long radius clips to the full ball.

struct BallMassResult {
  double numeric = 0.0;
  double analytic = 0.0;
  double abs_error = 0.0;
  double radius = 0.0;  // the rho cutoff actually used
};

inline double full_ball_mass(int m, int n) {
  double v = 1.0;
  for (int k = m + 1; k <= m + n; ++k) v /= static_cast<double>(k);
  return v;  // m! / (m+n)!
}

inline double truncated_ball_mass(int m, int n, double R) {
  double fact = 1.0;
  for (int k = 2; k < n; ++k) fact *= static_cast<double>(k);
  auto f = [&](double rho) { return std::pow(1.0 - rho, static_cast<double>(m)) * std::pow(rho, static_cast<double>(n - 1)) / fact; };
  return integrate_adaptive(f, 0.0, R);
}

inline BallMassResult ball_mass_check(int n, int m, double b) {
  if (n < 1 || n > 2) fail_validation("ball-mass check supports n in {1, 2}");
  if (m < 5) fail_validation("ball-mass check needs m >= 5");
  if (!(b > 0.0)) fail_validation("ball-mass radius parameter must be positive");
  double lm = std::log(static_cast<double>(m));
  BallMassResult r;
  r.radius = std::min(1.0, b * lm * lm / static_cast<double>(m));
  r.numeric = truncated_ball_mass(m, n, r.radius);
  r.analytic = full_ball_mass(m, n);
  r.abs_error = std::abs(r.numeric - r.analytic);
  return r;
}

// ---------------------------------------------------------------------------
// Bergman extremal identity: with G the Gram matrix of the level-(m+1) basis,
// rho(p) = v(p)^dagger G^{-1} v(p) equals the max of |<c, v(p)>|^2 over
// sections with c^dagger G c = 1, attained at c* prop. G^{-1} v(p); any other
// section stays below by Cauchy-Schwarz.

struct ExtremalReport {
  double max_gap = 0.0;           // worst |rho_extremal - rho_direct| / rho_direct
  double max_random_excess = 0.0; // worst max(0, ratio / rho_direct - 1) over random sections
  int probes = 0;
};

inline ExtremalReport extremal_gap_for_gram(const MatC& G, const std::vector<VecC>& vs, int n_random,
                                            std::uint64_t seed) {
  Eigen::LDLT<MatC> ldlt(G);
  if (ldlt.info() != Eigen::Success) fail_numerical("Gram matrix factorization failed in the extremal check");
  ExtremalReport rep;
  rep.probes = static_cast<int>(vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const VecC& v = vs[i];
    VecC c = ldlt.solve(v);
    double direct = (v.adjoint() * c)(0).real();
    if (!(direct > 0.0)) fail_numerical("nonpositive Bergman density at a probe point");
    double cnorm = (c.adjoint() * G * c)(0).real();
    double extremal = std::norm((c.adjoint() * v)(0)) / cnorm;
    rep.max_gap = std::max(rep.max_gap, std::abs(extremal - direct) / direct);

    Rng rng(seed, i);
    for (int t = 0; t < n_random; ++t) {
      VecC cr(v.size());
      for (Eigen::Index k = 0; k < v.size(); ++k) cr[k] = rng.cgaussian();
      double nr = (cr.adjoint() * G * cr)(0).real();
      double val = std::norm((cr.adjoint() * v)(0)) / nr;
      rep.max_random_excess = std::max(rep.max_random_excess, std::max(0.0, val / direct - 1.0));
    }
  }
  return rep;
}

inline ExtremalReport bergman_extremal_gap(const Hypersurface& X, const MetricState& st, const SampleSet& S,
                                           const WeightSpec& w, const std::vector<VarietyPoint>& probes,
                                           int n_random = 200, std::uint64_t seed = 0) {
  CanonicalBasis next;
  MatC G = gram_matrix(X, st, S, w, &next);
  std::vector<VecC> vs;
  vs.reserve(probes.size());
  for (const auto& p : probes) vs.push_back(section_values(X, next, p));
  return extremal_gap_for_gram(G, vs, n_random, seed);
}

// ---------------------------------------------------------------------------
// Finite-difference core. For zeta = x + iy, d^2/dzeta dzbar = Laplacian / 4;
// the raw stencil is fourth order, the default adds one Richardson level.

inline double dbar_d_raw(const std::function<double(cplx)>& phi, cplx z0, double h) {
  auto second = [&](cplx dir) {
    return (-phi(z0 + 2.0 * h * dir) + 16.0 * phi(z0 + h * dir) - 30.0 * phi(z0) + 16.0 * phi(z0 - h * dir) -
            phi(z0 - 2.0 * h * dir)) /
           (12.0 * h * h);
  };
  return 0.25 * (second(cplx(1.0, 0.0)) + second(cplx(0.0, 1.0)));
}

inline double dbar_d(const std::function<double(cplx)>& phi, cplx z0, double h) {
  double coarse = dbar_d_raw(phi, z0, h);
  double fine = dbar_d_raw(phi, z0, 0.5 * h);
  return (16.0 * fine - coarse) / 15.0;
}

// ---------------------------------------------------------------------------
// Curvature of a chain state on a curve. The candidate metric coefficient is
//   g_m(zeta) = d^2/dzeta dzbar [ (1/m) log B(zeta) ]
// in the affine coordinate zeta = w_b of the probe's chart, following the
// curve through the implicit function w_j(zeta). Two routes are provided: the
// holomorphic-derivative identity
//   d dbar log B = (v'^dagger P v') / B - |v^dagger P v'|^2 / B^2,
// where v(zeta) is the holomorphic section-value vector along the curve and
// v' its zeta-derivative, and fourth-order finite differences of log B for
// cross-validation. The frame factor f_j^{-m} is holomorphic, so it drops out
// of d dbar log and both routes may use the plain monomial frame.

class CurvatureOperator {
 public:
  CurvatureOperator(const Hypersurface& X, const MetricState& st) : X_(&X), st_(&st) {
    if (X.dim() != 1) fail_validation("curvature diagnostics support plane curves only");
    check_state(X, st);
    second_.resize(static_cast<std::size_t>(X.nvars()));
    for (int j = 0; j < X.nvars(); ++j)
      for (int v = 0; v < X.nvars(); ++v)
        second_[static_cast<std::size_t>(j)].push_back(X.partials[static_cast<std::size_t>(j)].partial(v));
  }

  // d dbar of (1/m) log B at z along the curve, holomorphic-derivative route.
  double analytic_at(const VecC& z, int a, int j) const {
    const Hypersurface& X = *X_;
    int b = free_coord(a, j);
    cplx fj = X.partials[static_cast<std::size_t>(j)].eval(z);
    cplx fb = X.partials[static_cast<std::size_t>(b)].eval(z);
    if (std::abs(fj) < kResidueFloor * partial_coef_scale(X) * 1e-3)
      fail_numerical("residue derivative too small for curvature evaluation");
    cplx slope = -fb / fj;  // dw_j / dzeta
    // d f_j / dzeta along the curve
    cplx dfj = second_[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)].eval(z) +
               slope * second_[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)].eval(z);

    const CanonicalBasis& basis = st_->basis;
    Eigen::Index N = static_cast<Eigen::Index>(basis.exps.size());
    VecC v(N), vp(N);
    for (Eigen::Index i = 0; i < N; ++i) {
      const Expo& e = basis.exps[static_cast<std::size_t>(i)];
      cplx mono, db, dj;
      monomial_and_partials(e, z, b, j, mono, db, dj);
      v[i] = mono;
      // (M / f_j^m)' * f_j^m = M' - m M dfj / fj, shared factor f_j^{-m} cancels in the ratios
      vp[i] = db + slope * dj - static_cast<double>(basis.m) * mono * dfj / fj;
    }
    double B = ((v.adjoint() * st_->P * v)(0)).real();
    if (!(B > 0.0)) fail_numerical("nonpositive fibre value in curvature evaluation");
    cplx Bp = (v.adjoint() * st_->P * vp)(0);
    double Bpp = ((vp.adjoint() * st_->P * vp)(0)).real();
    return (Bpp / B - std::norm(Bp) / (B * B)) / static_cast<double>(basis.m);
  }

  // Finite-difference route on phi(zeta) = (1/m) log B in the fixed frame (a, j).
  double fd_at(const VecC& z, int a, int j, double h = 1e-3) const {
    auto phi = [&](cplx zeta) {
      VecC zz = z;
      if (!move_to(zz, free_coord(a, j), j, zeta)) fail_numerical("implicit path correction failed in curvature stencil");
      VarietyPoint q;
      q.z = zz;
      q.chart_affine = a;
      q.chart_residue = j;
      VecC u = evaluate_basis_in_chart(*X_, st_->basis, q, j);
      double B = ((u.adjoint() * st_->P * u)(0)).real();
      if (!(B > 0.0)) fail_numerical("nonpositive fibre value in curvature stencil");
      return std::log(B) / static_cast<double>(st_->basis.m);
    };
    return dbar_d(phi, z[free_coord(a, j)], h);
  }

  double curvature(const VarietyPoint& p) const { return analytic_at(p.z, p.chart_affine, p.chart_residue); }

  // |d dbar log g / g - 1| at the probe; g from the analytic route on a
  // stencil around the probe, the outer derivative by finite differences.
  struct PointResult {
    double value = 0.0;
    bool skipped = false;
  };

  PointResult einstein_at(const VarietyPoint& p, double h = 1e-2) const {
    PointResult res;
    int a = p.chart_affine, j = p.chart_residue, b = free_coord(a, j);
    try {
      auto logg = [&](cplx zeta) {
        VecC zz = p.z;
        if (!move_to(zz, b, j, zeta)) fail_numerical("implicit path correction failed in Einstein stencil");
        double g = analytic_at(zz, a, j);
        if (!(g > 0.0)) fail_numerical("nonpositive curvature coefficient in Einstein stencil");
        return std::log(g);
      };
      double g0 = analytic_at(p.z, a, j);
      if (!(g0 > 0.0)) fail_numerical("nonpositive curvature coefficient at the probe");
      double lap = dbar_d(logg, p.z[b], h);
      res.value = std::abs(lap / g0 - 1.0);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::validation) throw;
      res.skipped = true;
    }
    return res;
  }

 private:
  const Hypersurface* X_;
  const MetricState* st_;
  std::vector<std::vector<HomPoly>> second_;

  int free_coord(int a, int j) const {
    for (int v = 0; v < X_->nvars(); ++v)
      if (v != a && v != j) return v;
    fail_validation("no free coordinate: not a plane curve chart");
  }

  // monomial value and the partials w.r.t. variables b and j
  static void monomial_and_partials(const Expo& e, const VecC& z, int b, int j, cplx& mono, cplx& db, cplx& dj) {
    mono = cplx(1.0, 0.0);
    cplx rest_b(1.0, 0.0), rest_j(1.0, 0.0);  // prod over v != b (resp. j) of z_v^e_v
    for (int v = 0; v < static_cast<int>(e.size()); ++v) {
      cplx pw(1.0, 0.0);
      for (int t = 0; t < e[static_cast<std::size_t>(v)]; ++t) pw *= z[v];
      mono *= pw;
      if (v != b) rest_b *= pw;
      if (v != j) rest_j *= pw;
    }
    auto dpow = [&](int v) {
      int ev = e[static_cast<std::size_t>(v)];
      if (ev == 0) return cplx(0.0, 0.0);
      cplx pw(static_cast<double>(ev), 0.0);
      for (int t = 0; t < ev - 1; ++t) pw *= z[v];
      return pw;
    };
    db = dpow(b) * rest_b;
    dj = dpow(j) * rest_j;
  }

  // Set z[b] = wb and re-solve z[j] from F = 0 by Newton, starting at the
  // current z[j]. Fails (false) if Newton stalls.
  bool move_to(VecC& z, int b, int j, cplx wb) const {
    z[b] = wb;
    double fscale = X_->F.coef_scale();
    for (int it = 0; it < 30; ++it) {
      cplx f = X_->F.eval(z);
      if (std::abs(f) <= 1e-14 * fscale * std::max(1.0, std::pow(z.cwiseAbs().maxCoeff(), static_cast<double>(X_->degree()))))
        return true;
      cplx fj = X_->partials[static_cast<std::size_t>(j)].eval(z);
      if (std::abs(fj) == 0.0) return false;
      z[j] -= f / fj;
    }
    return false;
  }
};

struct EinsteinReport {
  double sup = 0.0;
  double mean = 0.0;
  double median = 0.0;
  int skipped = 0;
  int total = 0;
  std::vector<double> values;  // per retained probe, in probe order
};

inline EinsteinReport einstein_residual(const Hypersurface& X, const MetricState& st,
                                        const std::vector<VarietyPoint>& probes, double h = 1e-2) {
  if (probes.empty()) fail_validation("Einstein residual needs at least one probe point");
  CurvatureOperator op(X, st);
  std::vector<CurvatureOperator::PointResult> raw(probes.size());
  parallel_for(probes.size(), [&](std::size_t i) { raw[i] = op.einstein_at(probes[i], h); });

  EinsteinReport rep;
  rep.total = static_cast<int>(probes.size());
  for (const auto& r : raw) {
    if (r.skipped) {
      rep.skipped += 1;
      continue;
    }
    rep.values.push_back(r.value);
    rep.sup = std::max(rep.sup, r.value);
    rep.mean += r.value;
  }
  if (rep.skipped * 5 > rep.total) fail_numerical("more than 20% of Einstein probes were skipped");
  rep.mean /= static_cast<double>(rep.values.size());
  std::vector<double> sorted = rep.values;
  std::sort(sorted.begin(), sorted.end());
  std::size_t n = sorted.size();
  rep.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return rep;
}

// ---------------------------------------------------------------------------
// Rate fit: least squares of delta_m against C log(m)/m. The model has no
// intercept, so R^2 is the through-origin coefficient 1 - SS_res / sum d^2
// (the centered variant is not meaningful for forced-origin fits).

struct RateFit {
  double C = 0.0;
  double R2 = 0.0;
};

inline RateFit rate_fit(const std::vector<int>& ms, const std::vector<double>& deltas) {
  if (ms.size() != deltas.size()) fail_validation("rate fit series length mismatch");
  if (ms.size() < 4) fail_validation("rate fit needs at least 4 points");
  double lo = deltas[0], hi = deltas[0];
  for (double d : deltas) {
    if (!(d > 0.0)) fail_validation("rate fit needs positive series values");
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  if (lo == hi) fail_validation("rate fit on a degenerate (constant) series");
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    if (ms[i] < 2) fail_validation("rate fit needs levels m >= 2");
    double x = std::log(static_cast<double>(ms[i])) / static_cast<double>(ms[i]);
    sxx += x * x;
    sxy += x * deltas[i];
  }
  RateFit fit;
  fit.C = sxy / sxx;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    double x = std::log(static_cast<double>(ms[i])) / static_cast<double>(ms[i]);
    ss_res += (deltas[i] - fit.C * x) * (deltas[i] - fit.C * x);
    ss_tot += deltas[i] * deltas[i];
  }
  fit.R2 = 1.0 - ss_res / ss_tot;
  return fit;
}

// ---------------------------------------------------------------------------
// Envelope shape of the distance to the final state. With h_ref the final
// state normalized to level one, s_m = sup_p |log(h_m / h_ref^m)| (the raw
// level-m comparison, i.e. m times the normalized log eta-ratio). A chain
// whose metrics move by finite products of (1 +- A/k) has increments
// |s_{m+1} - s_m| <= log(1 + A/k) <= A/k at the incoming level k; the report
// fits the tightest such A and lists where the increment sequence fails to
// decrease.

struct EnvelopeReport {
  double A = 0.0;                  // max over steps of (incoming level) * increment
  std::vector<double> sups;        // s_m per non-final state
  std::vector<double> increments;  // |s_{i+1} - s_i|
  std::vector<int> violations;     // i with increments[i] > increments[i-1]
};

inline EnvelopeReport envelope_monotonicity(const Hypersurface& X, const std::vector<MetricState>& chain,
                                            const std::vector<VarietyPoint>& probes) {
  if (chain.size() < 4) fail_validation("envelope diagnostic needs a chain of length at least 4");
  if (probes.empty()) fail_validation("envelope diagnostic needs probe points");
  EnvelopeReport rep;
  const MetricState& ref = chain.back();
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    double sup = 0.0;
    for (const auto& p : probes) sup = std::max(sup, std::abs(log_eta_ratio(X, ref, chain[i], p)));
    rep.sups.push_back(static_cast<double>(chain[i].m) * sup);
  }
  for (std::size_t i = 0; i + 1 < rep.sups.size(); ++i) {
    double d = std::abs(rep.sups[i + 1] - rep.sups[i]);
    rep.increments.push_back(d);
    rep.A = std::max(rep.A, d * static_cast<double>(chain[i + 1].m));
  }
  for (std::size_t i = 1; i < rep.increments.size(); ++i)
    if (rep.increments[i] > rep.increments[i - 1] + 1e-12) rep.violations.push_back(static_cast<int>(i));
  return rep;
}

// ---------------------------------------------------------------------------
// Per-level convergence summary of a chain run.

struct ConvergenceRow {
  int m = 0;
  double sup_delta = 0.0;   // sampled sup of |log eta_ratio(state_m, state_{m+1})|
  double inf_delta = 0.0;
  double mean_delta = 0.0;
  double einstein_sup = 0.0;
  double einstein_mean = 0.0;
  double einstein_median = 0.0;
  int einstein_skipped = 0;
  double L_value = 0.0;         // L functional at level m
  double trace_residual = 0.0;  // from the step leaving level m
  double holder_slack = 0.0;
};

struct ConvergenceSeries {
  std::vector<ConvergenceRow> rows;
  bool fit_ok = false;
  RateFit fit;             // sup_delta against C log(m)/m
  std::string fit_model = "C*log(m)/m";
};

inline ConvergenceSeries build_convergence_series(const Hypersurface& X, const ChainResult& chain,
                                                  const std::vector<VarietyPoint>& probes, bool with_einstein,
                                                  double einstein_h = 1e-2) {
  if (chain.states.size() < 2) fail_validation("convergence series needs at least one completed step");
  if (probes.empty()) fail_validation("convergence series needs probe points");
  ConvergenceSeries cs;
  for (std::size_t i = 0; i + 1 < chain.states.size(); ++i) {
    ConvergenceRow row;
    row.m = chain.states[i].m;
    std::vector<double> d(probes.size());
    parallel_for(probes.size(), [&](std::size_t k) {
      d[k] = std::abs(log_eta_ratio(X, chain.states[i], chain.states[i + 1], probes[k]));
    });
    row.sup_delta = *std::max_element(d.begin(), d.end());
    row.inf_delta = *std::min_element(d.begin(), d.end());
    row.mean_delta = 0.0;
    for (double v : d) row.mean_delta += v;
    row.mean_delta /= static_cast<double>(d.size());
    if (with_einstein && X.dim() == 1) {
      EinsteinReport er = einstein_residual(X, chain.states[i], probes, einstein_h);
      row.einstein_sup = er.sup;
      row.einstein_mean = er.mean;
      row.einstein_median = er.median;
      row.einstein_skipped = er.skipped;
    }
    if (i < chain.reports.size()) {
      row.L_value = chain.reports[i].L_before;
      row.trace_residual = chain.reports[i].trace_residual;
      row.holder_slack = chain.reports[i].holder_slack;
    }
    cs.rows.push_back(row);
  }
  if (cs.rows.size() >= 4) {
    std::vector<int> ms;
    std::vector<double> ds;
    bool positive = true;
    for (const auto& r : cs.rows) {
      if (r.m < 2) continue;
      ms.push_back(r.m);
      ds.push_back(r.sup_delta);
      positive = positive && r.sup_delta > 0.0;
    }
    if (ms.size() >= 4 && positive) {
      bool constant = true;
      for (double v : ds) constant = constant && v == ds[0];
      if (!constant) {
        cs.fit = rate_fit(ms, ds);
        cs.fit_ok = true;
      }
    }
  }
  return cs;
}

}  // namespace kei
