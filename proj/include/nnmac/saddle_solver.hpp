#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "nnmac/fast_poisson.hpp"
#include "nnmac/mac_grid.hpp"
#include "nnmac/nd_array.hpp"
#include "nnmac/singular_field.hpp"

namespace nnmac {

struct SaddleReport {
  int cg_iterations = 0;
  double final_residual = 0.0;  // ||r||_2 / max(1, ||rhs||_2)
  long poisson_solve_count = 0;
  bool converged = false;
  std::vector<double> residual_history;
};

struct CgOptions {
  double tolerance = 1e-12;
  int max_iterations = 0;  // 0 -> 10 N
};

/// Projects b2 onto the solution space of the Schur system: the kernel of
/// -G^T L^{-1} G is spanned by the constant vector, so the mean is removed.
template <int D>
NdArray<D> project_rhs(NdArray<D> b2) {
  const double mean = b2.mean();
  for (double& v : b2) v -= mean;
  return b2;
}

template <int D>
struct SaddleSolution {
  std::array<NdArray<D>, D> u;  // interior unknowns per component
  NdArray<D> p;                 // zero-mean cell pressure
  SaddleReport report;
};

/// Fractional-step (block-LU / Uzawa) solve of
///   [L G; G^T 0] [u_r; p_r] = [b1; b2]:
///   1. u* = L^{-1} b1                         (D fast solves)
///   2. CG on (-G^T L^{-1} G) p_r = b2~ - G^T u*   (D solves per iteration)
///   3. u_r = u* - L^{-1} G p_r                (D fast solves)
/// The Schur operator is symmetric positive definite on the zero-mean
/// subspace, which CG preserves up to roundoff; the residual is re-projected
/// each iteration to pin the constant mode.
template <int D, std::size_t K>
  requires(K == D)
SaddleSolution<D> solve_saddle(const MacGrid<D>& g, const std::array<NdArray<D>, K>& b1,
                               const NdArray<D>& b2, const PoissonPlanSet<D>& plans,
                               const CgOptions& opt = {}) {
  plans.reset_count();
  SaddleSolution<D> sol;

  std::array<NdArray<D>, D> u_star;
  for (int k = 0; k < D; ++k) u_star[k] = plans.solve(k, b1[k]);

  NdArray<D> rhs = project_rhs(b2);
  rhs -= apply_GT(g, u_star);
  rhs = project_rhs(std::move(rhs));

  auto schur = [&](const NdArray<D>& psi) {
    NdArray<D> out = apply_GT(g, apply_Linv_G(plans, g, psi));
    out *= -1.0;
    return out;
  };

  const double rhs_norm = rhs.norm2();
  const double tol = opt.tolerance * std::max(1.0, rhs_norm);
  const int max_it = opt.max_iterations > 0 ? opt.max_iterations : 10 * g.n;

  NdArray<D> p(g.cell_dims());
  NdArray<D> r = rhs;  // p0 = 0
  NdArray<D> d = r;
  double rho = r.dot(r);
  SaddleReport& rep = sol.report;
  rep.residual_history.push_back(std::sqrt(rho));

  while (std::sqrt(rho) > tol && rep.cg_iterations < max_it) {
    const NdArray<D> q = schur(d);
    const double alpha = rho / d.dot(q);
    p.for_each_index([&](const std::array<int, D>& c) { p[c] += alpha * d[c]; });
    r.for_each_index([&](const std::array<int, D>& c) { r[c] -= alpha * q[c]; });
    r = project_rhs(std::move(r));
    const double rho_next = r.dot(r);
    const double beta = rho_next / rho;
    d.for_each_index([&](const std::array<int, D>& c) { d[c] = r[c] + beta * d[c]; });
    rho = rho_next;
    ++rep.cg_iterations;
    rep.residual_history.push_back(std::sqrt(rho));
  }
  rep.converged = std::sqrt(rho) <= tol;
  rep.final_residual = std::sqrt(rho) / std::max(1.0, rhs_norm);

  sol.u = u_star;
  const auto correction = apply_Linv_G(plans, g, p);
  for (int k = 0; k < D; ++k) sol.u[k] -= correction[k];

  const double p_mean = p.mean();
  for (double& v : p) v -= p_mean;
  sol.p = std::move(p);
  rep.poisson_solve_count = plans.solve_count();
  return sol;
}

/// u = u_r + u_s at faces (boundary faces carry u_b), p = p_r + p_s at
/// centers. The composed pressure keeps the solver's gauge; error reporting
/// shifts it against a reference mean.
template <int D>
StaggeredField<D> compose_solution(const MacGrid<D>& g, const SaddleSolution<D>& sol,
                                   const SingularField<D>& s,
                                   const std::function<Vec<D>(const Vec<D>&)>& ub) {
  StaggeredField<D> f = StaggeredField<D>::zero(g);
  for (int k = 0; k < D; ++k) {
    f.u[k] = embed_interior(g, k, sol.u[k]);
    f.u[k].for_each_index([&](const std::array<int, D>& idx) {
      const Vec<D> x = g.face_position(k, idx);
      if (idx[k] == 0 || idx[k] == g.n)
        f.u[k][idx] = ub(x)[k];
      else if (s.shape.is_inside(x))
        f.u[k][idx] += s.u_nets[k].value(x);
    });
  }
  f.p = sol.p;
  f.p.for_each_index([&](const std::array<int, D>& c) { f.p[c] += s.p_s(g.cell_center(c)); });
  return f;
}

}  // namespace nnmac
