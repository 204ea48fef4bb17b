#pragma once

// Sample sets on the hypersurface carrying weights for the measure
// omega_FS^n|_X (total mass = degree d).
//
// Two constructions:
//  * sample_fs: unitarily invariant random lines (two iid complex-Gaussian
//    points span a line; its d intersection points with X are distributed so
//    that the per-line empirical sum averages to omega_FS^n|_X). Every point
//    of a line gets weight 1/#lines, so the total mass is d exactly.
//  * curve_chart_quadrature: deterministic polar-grid quadrature per affine
//    chart (plane curves only), blended by a smooth partition of unity so the
//    per-cell integrands stay analytic and plain Gauss cells converge fast.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "keiter/common.hpp"
#include "keiter/variety.hpp"

namespace kei {

struct SampleSet {
  std::string method;   // "random-line" or "chart-quadrature"
  std::uint64_t seed = 0;
  int block = 0;        // points per line for random-line sets (enables per-line stats)
  std::string variety_hash;
  std::vector<VarietyPoint> points;
  VecR weights;

  std::size_t size() const { return points.size(); }
  double total_weight() const { return weights.sum(); }
};

// ---------------------------------------------------------------------------
// Random lines.

namespace detail {

inline cplx horner(const std::vector<cplx>& coef, cplx t) {
  cplx acc(0.0, 0.0);
  for (std::size_t i = coef.size(); i-- > 0;) acc = acc * t + coef[i];
  return acc;
}

inline cplx horner_deriv(const std::vector<cplx>& coef, cplx t) {
  cplx acc(0.0, 0.0);
  for (std::size_t i = coef.size(); i-- > 1;) acc = acc * t + static_cast<double>(i) * coef[i];
  return acc;
}

// Newton-polish a univariate root to |p(t)| <= tol * scale; returns false if
// it fails to converge within the iteration cap.
inline bool polish_root(const std::vector<cplx>& coef, cplx& t, double scale, int max_iter = 40, double tol = 1e-12) {
  for (int it = 0; it < max_iter; ++it) {
    cplx f = horner(coef, t);
    double bound = tol * scale * std::max(1.0, std::pow(std::abs(t), static_cast<double>(coef.size() - 1)));
    if (std::abs(f) <= bound) return true;
    cplx df = horner_deriv(coef, t);
    if (std::abs(df) == 0.0) return false;
    t -= f / df;
  }
  return std::abs(horner(coef, t)) <= tol * scale * std::max(1.0, std::pow(std::abs(t), static_cast<double>(coef.size() - 1)));
}

}  // namespace detail

// Draws ceil(n_points/d) random lines; each contributes its d intersection
// points with weight 1/#lines. Lines whose restriction drops degree, fails to
// polish, or has clustered roots (pairwise distance < 1e-8) are redrawn.
inline SampleSet sample_fs(const Hypersurface& X, int n_points, std::uint64_t seed, int max_redraw = 64) {
  int d = X.degree();
  if (n_points < d) fail_validation("sample_fs needs at least degree-many points");
  int lines = (n_points + d - 1) / d;

  SampleSet S;
  S.method = "random-line";
  S.seed = seed;
  S.block = d;
  S.variety_hash = X.content_hash;
  S.points.resize(static_cast<std::size_t>(lines) * static_cast<std::size_t>(d));
  S.weights = VecR::Constant(static_cast<Eigen::Index>(S.points.size()), 1.0 / static_cast<double>(lines));

  parallel_for(static_cast<std::size_t>(lines), [&](std::size_t li) {
    bool placed = false;
    for (int attempt = 0; attempt < max_redraw && !placed; ++attempt) {
      Rng rng(seed, li * 1024ULL + static_cast<std::uint64_t>(attempt));
      VecC p(X.nvars()), q(X.nvars());
      for (int v = 0; v < X.nvars(); ++v) p[v] = rng.cgaussian();
      for (int v = 0; v < X.nvars(); ++v) q[v] = rng.cgaussian();
      auto coef = detail::line_restriction(X, p, q);
      double cscale = 0.0;
      for (auto& c : coef) cscale = std::max(cscale, std::abs(c));
      if (cscale == 0.0 || std::abs(coef.back()) < 1e-10 * cscale) continue;

      auto roots = detail::poly_roots(coef);
      if (static_cast<int>(roots.size()) != d) continue;
      bool ok = true;
      for (auto& t : roots)
        if (!detail::polish_root(coef, t, cscale)) { ok = false; break; }
      if (!ok) continue;
      for (std::size_t i = 0; i < roots.size() && ok; ++i)
        for (std::size_t k = i + 1; k < roots.size() && ok; ++k)
          if (std::abs(roots[i] - roots[k]) < 1e-8) ok = false;
      if (!ok) continue;

      std::vector<VarietyPoint> pts;
      pts.reserve(static_cast<std::size_t>(d));
      try {
        for (auto& t : roots) pts.push_back(make_point(X, p + t * q));
      } catch (const Error&) {
        continue;
      }
      for (int i = 0; i < d; ++i) S.points[li * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] = std::move(pts[static_cast<std::size_t>(i)]);
      placed = true;
    }
    if (!placed) fail_numerical("sample_fs: exceeded redraw cap for line " + std::to_string(li));
  });
  return S;
}

// ---------------------------------------------------------------------------
// Deterministic chart quadrature for plane curves.
//
// Every point of X is shared between the three affine charts through a smooth
// partition of unity psi_a built from bump(|z_a|^2 / M) with M a smooth proxy
// for max_v |z_v|^2. psi_a is supported where all chart-a affine coordinates
// satisfy |w|^2 < 1/kQuadBumpLo, so a polar grid of that radius covers it.
// Within a chart the density is split once more between the two projections
// (grid one affine coordinate, solve the other from F = 0) with
//   chi = |f_solve|^2 / (|f_grid|^2 + |f_solve|^2),
// which keeps chi * G bounded through branch points of the solved projection.
//
// The resulting per-grid integrand psi * chi * G / pi (summed over sheets) is
// smooth: sheet sums cancel the square-root branch behaviour, chi * G extends
// smoothly across branch points, and psi vanishes to all orders before any
// root leaves the solve disk. A plain tensor grid of 2x2 Gauss cells in
// (rho = |w|^2, theta) therefore converges at high order; cells are subdivided
// only when a root solve fails. omega_FS|_X in the grid coordinate w is
// (1/pi) * G dLeb(w) and a polar cell has Lebesgue area (1/2) drho dtheta.

inline constexpr double kQuadBumpLo = 0.7;  // bump support threshold; grid radius^2 = 1/kQuadBumpLo

struct QuadratureStats {
  int cells_evaluated = 0;
  int cells_dropped = 0;
};

namespace detail {

// C-infinity step: 0 for u <= 0, 1 for u >= 1, all derivatives vanish at ends.
inline double cinf_step(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  double a = std::exp(-1.0 / u);
  double b = std::exp(-1.0 / (1.0 - u));
  return a / (a + b);
}

inline double chart_bump(double x) { return cinf_step((x - kQuadBumpLo) / (1.0 - kQuadBumpLo)); }

// psi_a(z): scale-invariant smooth chart weight. M is the p = 8 power mean of
// the |z_v|^2, so max^2 / M >= (N+1)^(-1/8) > kQuadBumpLo keeps the
// denominator bounded away from zero.
inline double chart_weight(const VecC& z, int a) {
  int nv = static_cast<int>(z.size());
  double m = 0.0;
  for (int v = 0; v < nv; ++v) m = std::max(m, std::norm(z[v]));
  double acc = 0.0;
  for (int v = 0; v < nv; ++v) {
    double q = std::norm(z[v]) / m;
    double q2 = q * q, q4 = q2 * q2;
    acc += q4 * q4;
  }
  double M = m * std::pow(acc, 0.125);
  double denom = 0.0, ga = 0.0;
  for (int v = 0; v < nv; ++v) {
    double g = chart_bump(std::norm(z[v]) / M);
    denom += g;
    if (v == a) ga = g;
  }
  return ga / denom;
}

struct CellSample {
  bool ok = false;
  double density = 0.0;  // sum over contributing sheets of psi * chi * G / pi
};

struct QuadCtx {
  const Hypersurface* X;
  int a;       // affine chart index
  int b;       // gridded affine coordinate
  int c;       // solved affine coordinate
};

inline CellSample quad_eval(const QuadCtx& ctx, double rho, double theta,
                            std::vector<VarietyPoint>* out_pts, std::vector<double>* out_density) {
  const Hypersurface& X = *ctx.X;
  const double solve_r2 = 1.0 / kQuadBumpLo;
  CellSample cs;
  double r = std::sqrt(rho);
  cplx w1(r * std::cos(theta), r * std::sin(theta));
  VecC base = VecC::Zero(X.nvars());
  base[ctx.a] = cplx(1.0, 0.0);
  base[ctx.b] = w1;
  VecC dir = VecC::Zero(X.nvars());
  dir[ctx.c] = cplx(1.0, 0.0);
  auto coef = line_restriction(X, base, dir);
  double cscale = 0.0;
  for (auto& cc : coef) cscale = std::max(cscale, std::abs(cc));
  if (cscale == 0.0) return cs;  // the whole line lies in X; impossible for smooth X
  cs.ok = true;
  for (cplx t : poly_roots(coef)) {
    if (std::norm(t) > solve_r2) continue;             // psi vanishes outside the solve disk
    if (!polish_root(coef, t, cscale)) { cs.ok = false; continue; }
    VecC z = base;
    z[ctx.c] = t;
    double psi = chart_weight(z, ctx.a);
    if (psi <= 0.0) continue;
    double fb2 = std::norm(X.partials[static_cast<std::size_t>(ctx.b)].eval(z));
    double fc2 = std::norm(X.partials[static_cast<std::size_t>(ctx.c)].eval(z));
    if (fb2 + fc2 == 0.0) { cs.ok = false; continue; }
    if (fc2 == 0.0) continue;                          // chi = 0 exactly
    double chi = fc2 / (fb2 + fc2);
    VarietyPoint p;
    double g = 0.0;
    try {
      p = chart_select(X, z);
      // the pullback coefficient is not scale invariant: evaluate it in the
      // grid normalization z_a = 1, not at the canonicalized p.z
      g = fs_pullback_det(X, z, ctx.a, ctx.c);         // 1x1 pullback in the w1 coordinate
    } catch (const Error&) {
      cs.ok = false;
      continue;
    }
    double dens = psi * chi * g / 3.14159265358979323846264338328;
    cs.density += dens;
    if (out_pts) {
      out_pts->push_back(std::move(p));
      out_density->push_back(dens);
    }
  }
  return cs;
}

// 2x2 tensor Gauss rule in (rho, theta); subdivides only on solve failure.
inline void quad_cell(const QuadCtx& ctx, double rho0, double rho1, double th0, double th1, int depth,
                      int max_depth, std::vector<VarietyPoint>& pts, std::vector<double>& wts, QuadratureStats& stats) {
  const double gauss_off = 0.28867513459481288225457439025098;  // 1/(2 sqrt 3)
  double rm = 0.5 * (rho0 + rho1), tm = 0.5 * (th0 + th1);
  double hr = rho1 - rho0, ht = th1 - th0;
  double node_area = 0.5 * hr * ht / 4.0;  // quarter of the polar-cell Lebesgue area
  std::vector<VarietyPoint> cell_pts;
  std::vector<double> cell_wts;
  bool any_fail = false;
  for (int gr = 0; gr < 2; ++gr) {
    for (int gt = 0; gt < 2; ++gt) {
      double rho = rm + (gr == 0 ? -gauss_off : gauss_off) * hr;
      double th = tm + (gt == 0 ? -gauss_off : gauss_off) * ht;
      std::vector<VarietyPoint> node_pts;
      std::vector<double> node_density;
      CellSample ns = quad_eval(ctx, rho, th, &node_pts, &node_density);
      if (!ns.ok) any_fail = true;
      for (std::size_t i = 0; i < node_pts.size(); ++i) {
        cell_pts.push_back(std::move(node_pts[i]));
        cell_wts.push_back(node_density[i] * node_area);
      }
    }
  }
  if (any_fail && depth < max_depth) {
    quad_cell(ctx, rho0, rm, th0, tm, depth + 1, max_depth, pts, wts, stats);
    quad_cell(ctx, rho0, rm, tm, th1, depth + 1, max_depth, pts, wts, stats);
    quad_cell(ctx, rm, rho1, th0, tm, depth + 1, max_depth, pts, wts, stats);
    quad_cell(ctx, rm, rho1, tm, th1, depth + 1, max_depth, pts, wts, stats);
    return;
  }
  stats.cells_evaluated += 1;
  if (any_fail) stats.cells_dropped += 1;
  for (std::size_t i = 0; i < cell_pts.size(); ++i) {
    pts.push_back(std::move(cell_pts[i]));
    wts.push_back(cell_wts[i]);
  }
}

}  // namespace detail

inline SampleSet curve_chart_quadrature(const Hypersurface& X, int resolution, QuadratureStats* stats_out = nullptr,
                                        int max_depth = 5) {
  if (X.dim() != 1) fail_validation("chart quadrature supports plane curves only");
  if (resolution < 4) fail_validation("quadrature resolution must be at least 4");

  const double two_pi = 6.283185307179586476925286766559;
  QuadratureStats stats;
  SampleSet S;
  S.method = "chart-quadrature";
  S.seed = 0;
  S.block = 0;
  S.variety_hash = X.content_hash;

  struct BaseCell { int a, b, c, ir, it; };
  std::vector<BaseCell> cells;
  for (int a = 0; a < X.nvars(); ++a) {
    std::vector<int> aff;
    for (int v = 0; v < X.nvars(); ++v)
      if (v != a) aff.push_back(v);
    for (int orient = 0; orient < 2; ++orient)
      for (int ir = 0; ir < resolution; ++ir)
        for (int it = 0; it < resolution; ++it)
          cells.push_back({a, aff[static_cast<std::size_t>(orient)], aff[static_cast<std::size_t>(1 - orient)], ir, it});
  }

  std::vector<std::vector<VarietyPoint>> pts(cells.size());
  std::vector<std::vector<double>> wts(cells.size());
  std::vector<QuadratureStats> cstats(cells.size());

  parallel_for(cells.size(), [&](std::size_t ci) {
    const BaseCell& bc = cells[ci];
    detail::QuadCtx ctx{&X, bc.a, bc.b, bc.c};
    double dr = (1.0 / kQuadBumpLo) / static_cast<double>(resolution);
    double dt = two_pi / static_cast<double>(resolution);
    detail::quad_cell(ctx, bc.ir * dr, (bc.ir + 1) * dr, bc.it * dt, (bc.it + 1) * dt, 0, max_depth,
                      pts[ci], wts[ci], cstats[ci]);
  });

  std::size_t total = 0;
  for (auto& v : pts) total += v.size();
  S.points.reserve(total);
  std::vector<double> weights;
  weights.reserve(total);
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    for (std::size_t i = 0; i < pts[ci].size(); ++i) {
      S.points.push_back(std::move(pts[ci][i]));
      weights.push_back(wts[ci][i]);
    }
    stats.cells_evaluated += cstats[ci].cells_evaluated;
    stats.cells_dropped += cstats[ci].cells_dropped;
  }
  S.weights = Eigen::Map<VecR>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  if (stats_out) *stats_out = stats;
  return S;
}

// ---------------------------------------------------------------------------

struct McResult {
  double value = 0.0;
  double stderr_est = 0.0;
  bool stderr_applicable = false;
};

// Weighted sum of f over the sample. The standard error uses the pointwise
// weighted sample variance (random-line sets only); correlation between the d
// points of one line is deliberately ignored.
inline McResult mc_integrate(const SampleSet& S, const std::function<double(const VarietyPoint&)>& f) {
  if (S.points.empty()) fail_validation("mc_integrate on an empty sample set");
  McResult r;
  std::size_t K = S.points.size();
  std::vector<double> vals(K);
  for (std::size_t k = 0; k < K; ++k) {
    double v = f(S.points[k]);
    if (!std::isfinite(v)) fail_numerical("mc_integrate: non-finite integrand at sample point " + std::to_string(k));
    vals[k] = v;
    r.value += S.weights[static_cast<Eigen::Index>(k)] * v;
  }
  if (S.method == "random-line" && K > 1) {
    double W = S.weights.sum();
    double mean = r.value / W;
    double acc = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      double w = S.weights[static_cast<Eigen::Index>(k)];
      acc += w * w * (vals[k] - mean) * (vals[k] - mean);
    }
    r.stderr_est = std::sqrt(acc * static_cast<double>(K) / static_cast<double>(K - 1));
    r.stderr_applicable = true;
  }
  return r;
}

}  // namespace kei
