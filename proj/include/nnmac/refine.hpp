#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "nnmac/cases.hpp"
#include "nnmac/mac_grid.hpp"
#include "nnmac/saddle_solver.hpp"
#include "nnmac/singular_field.hpp"

namespace nnmac {

template <int D>
struct CaseSolution {
  MacGrid<D> grid;
  StaggeredField<D> regular;   // u_r (boundary faces carry u_b), zero-mean p_r
  StaggeredField<D> composed;  // u_r + u_s, p_r + p_s
  SaddleReport report;
};

/// Assemble and solve one grid level with trained networks.
template <int D>
CaseSolution<D> solve_case(const CaseDefinition<D>& c, const SingularField<D>& s, int n,
                           const CgOptions& opt = {}) {
  CaseSolution<D> out;
  out.grid = MacGrid<D>(c.lo, c.hi, n);
  const PoissonPlanSet<D> plans(out.grid, c.mu);
  const RhsAssembly<D> rhs = assemble_rhs(out.grid, c, s);
  SaddleSolution<D> sol = solve_saddle(out.grid, rhs.b1, rhs.b2, plans, opt);
  out.report = sol.report;

  out.regular = StaggeredField<D>::zero(out.grid);
  for (int k = 0; k < D; ++k) {
    out.regular.u[k] = embed_interior(out.grid, k, sol.u[k]);
    out.regular.u[k].for_each_index([&](const std::array<int, D>& idx) {
      if (idx[k] == 0 || idx[k] == out.grid.n)
        out.regular.u[k][idx] = c.boundary_velocity(out.grid.face_position(k, idx))[k];
    });
  }
  out.regular.p = sol.p;
  out.composed = compose_solution(out.grid, sol, s, c.boundary_velocity);
  return out;
}

// ---- errors against an exact solution -----------------------------------------

template <int D>
std::array<double, D> velocity_errors_vs_exact(const CaseDefinition<D>& c,
                                               const CaseSolution<D>& sol) {
  std::array<double, D> err{};
  for (int k = 0; k < D; ++k) {
    double m = 0.0;
    sol.composed.u[k].for_each_index([&](const std::array<int, D>& idx) {
      const Vec<D> x = sol.grid.face_position(k, idx);
      const double exact = c.exact_u(x, c.shape.is_inside(x))[k];
      m = std::max(m, std::abs(sol.composed.u[k][idx] - exact));
    });
    err[k] = m;
  }
  return err;
}

/// Max-norm pressure error after matching the mean of the computed pressure to
/// the exact one over all cell centers (the solution only fixes p up to a
/// constant).
template <int D>
double pressure_error_vs_exact(const CaseDefinition<D>& c, const CaseSolution<D>& sol) {
  NdArray<D> diff(sol.grid.cell_dims());
  diff.for_each_index([&](const std::array<int, D>& cc) {
    const Vec<D> x = sol.grid.cell_center(cc);
    diff[cc] = sol.composed.p[cc] - c.exact_p(x, c.shape.is_inside(x));
  });
  const double shift = diff.mean();
  double m = 0.0;
  for (double v : diff) m = std::max(m, std::abs(v - shift));
  return m;
}

/// e_inf(div u) = || div_h u_r + div u_s ||_inf over cell centers; the
/// singular divergence comes from exact network differentiation and is zero
/// outside the interface.
template <int D>
double divergence_error(const CaseSolution<D>& sol, const SingularField<D>& s) {
  const NdArray<D> div_r = div_full(sol.grid, sol.regular.u);
  double m = 0.0;
  div_r.for_each_index([&](const std::array<int, D>& c) {
    m = std::max(m, std::abs(div_r[c] + s.div_u_s(sol.grid.cell_center(c))));
  });
  return m;
}

// ---- cross-resolution interpolation and successive errors ----------------------

/// Multilinear interpolation on the sample lattice of one staggered variable.
/// component in 0..D-1 selects a velocity component; -1 selects pressure.
template <int D>
double interp_staggered(const MacGrid<D>& g, int component, const NdArray<D>& values,
                        const Vec<D>& x) {
  std::array<int, D> base;
  std::array<double, D> w;
  for (int a = 0; a < D; ++a) {
    const bool node_axis = a == component;
    const double u = node_axis ? (x[a] - g.lo) / g.h() : (x[a] - g.lo) / g.h() - 0.5;
    const int top = values.dim(a) - 2;
    int i0 = static_cast<int>(std::floor(u));
    i0 = std::max(0, std::min(i0, top));
    base[a] = i0;
    w[a] = u - i0;
  }
  double acc = 0.0;
  const int corners = 1 << D;
  for (int c = 0; c < corners; ++c) {
    double weight = 1.0;
    std::array<int, D> idx = base;
    for (int a = 0; a < D; ++a) {
      const int bit = (c >> a) & 1;
      idx[a] += bit;
      weight *= bit ? w[a] : 1.0 - w[a];
    }
    acc += weight * values[idx];
  }
  return acc;
}

/// ||phi_N - phi_2N||_inf per velocity component at the coarse interior faces.
/// The singular part is the same network at the same points on both levels, so
/// it cancels and the comparison reduces to the regular parts (fine level
/// multilinearly interpolated, per the successive-refinement prescription).
template <int D>
std::array<double, D> successive_velocity_errors(const CaseSolution<D>& coarse,
                                                 const CaseSolution<D>& fine) {
  std::array<double, D> err{};
  for (int k = 0; k < D; ++k) {
    double m = 0.0;
    coarse.regular.u[k].for_each_index([&](const std::array<int, D>& idx) {
      if (idx[k] == 0 || idx[k] == coarse.grid.n) return;  // shared Dirichlet data
      const Vec<D> x = coarse.grid.face_position(k, idx);
      const double f = interp_staggered(fine.grid, k, fine.regular.u[k], x);
      m = std::max(m, std::abs(coarse.regular.u[k][idx] - f));
    });
    err[k] = m;
  }
  return err;
}

/// Mean-removed successive pressure error (p is defined up to a constant).
template <int D>
double successive_pressure_error(const CaseSolution<D>& coarse, const CaseSolution<D>& fine) {
  NdArray<D> diff(coarse.grid.cell_dims());
  diff.for_each_index([&](const std::array<int, D>& c) {
    const Vec<D> x = coarse.grid.cell_center(c);
    diff[c] = coarse.regular.p[c] - interp_staggered(fine.grid, -1, fine.regular.p, x);
  });
  const double shift = diff.mean();
  double m = 0.0;
  for (double v : diff) m = std::max(m, std::abs(v - shift));
  return m;
}

// ---- convergence tables ---------------------------------------------------------

struct ErrorRow {
  int n = 0;
  std::vector<double> e_u;     // per velocity component
  std::vector<double> rate_u;  // NaN in the first row
  double e_p = 0.0;
  double rate_p = std::numeric_limits<double>::quiet_NaN();
  double e_div = std::numeric_limits<double>::quiet_NaN();  // exact-solution cases only
};

inline void fill_rates(std::vector<ErrorRow>& rows) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].rate_u.assign(rows[i].e_u.size(), std::numeric_limits<double>::quiet_NaN());
    if (i == 0) continue;
    for (std::size_t k = 0; k < rows[i].e_u.size(); ++k)
      rows[i].rate_u[k] = std::log2(rows[i - 1].e_u[k] / rows[i].e_u[k]);
    rows[i].rate_p = std::log2(rows[i - 1].e_p / rows[i].e_p);
  }
}

inline void validate_grid_list(const std::vector<int>& ns) {
  if (ns.empty()) throw std::invalid_argument("grid list is empty");
  for (std::size_t i = 1; i < ns.size(); ++i)
    if (ns[i] != 2 * ns[i - 1])
      throw std::invalid_argument("grid list must double at each step");
}

/// Mesh refinement against the exact solution (ex1, ex3).
template <int D>
std::vector<ErrorRow> convergence_exact(const CaseDefinition<D>& c, const SingularField<D>& s,
                                        const std::vector<int>& ns, const CgOptions& opt = {}) {
  validate_grid_list(ns);
  std::vector<ErrorRow> rows;
  for (int n : ns) {
    const CaseSolution<D> sol = solve_case(c, s, n, opt);
    ErrorRow row;
    row.n = n;
    const auto eu = velocity_errors_vs_exact(c, sol);
    row.e_u.assign(eu.begin(), eu.end());
    row.e_p = pressure_error_vs_exact(c, sol);
    row.e_div = divergence_error(sol, s);
    rows.push_back(std::move(row));
  }
  fill_rates(rows);
  return rows;
}

/// Successive-refinement table (ex2, ex4): row N holds ||phi_N - phi_2N||, so
/// one extra solve at 2 * ns.back() is performed.
template <int D>
std::vector<ErrorRow> convergence_successive(const CaseDefinition<D>& c, const SingularField<D>& s,
                                             const std::vector<int>& ns,
                                             const CgOptions& opt = {}) {
  validate_grid_list(ns);
  std::vector<CaseSolution<D>> sols;
  for (int n : ns) sols.push_back(solve_case(c, s, n, opt));
  sols.push_back(solve_case(c, s, 2 * ns.back(), opt));
  std::vector<ErrorRow> rows;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    ErrorRow row;
    row.n = ns[i];
    const auto eu = successive_velocity_errors(sols[i], sols[i + 1]);
    row.e_u.assign(eu.begin(), eu.end());
    row.e_p = successive_pressure_error(sols[i], sols[i + 1]);
    rows.push_back(std::move(row));
  }
  fill_rates(rows);
  return rows;
}

/// Least-squares fitted convergence rate: minus the slope of log2(e) against
/// log2(N).
inline double fitted_rate(const std::vector<int>& ns, const std::vector<double>& errs) {
  const std::size_t m = ns.size();
  if (m < 2 || errs.size() != m) throw std::invalid_argument("fitted_rate: need >= 2 levels");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double x = std::log2(static_cast<double>(ns[i]));
    const double y = std::log2(errs[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return -slope;
}

// ---- interface markers and cross-section extracts ------------------------------

/// Velocity at on-surface marker points: the singular part vanishes on Gamma,
/// so each regular component is interpolated multilinearly from its face grid.
template <int D>
std::vector<Vec<D>> marker_velocity(const CaseSolution<D>& sol,
                                    const std::vector<SurfacePoint<D>>& markers) {
  std::vector<Vec<D>> out;
  out.reserve(markers.size());
  for (const auto& mk : markers) {
    Vec<D> v;
    for (int k = 0; k < D; ++k)
      v[k] = interp_staggered(sol.grid, k, sol.regular.u[k], mk.position);
    out.push_back(v);
  }
  return out;
}

struct SlicePoint {
  double coordinate = 0.0;
  double value = 0.0;
};

/// Extract one variable of the composed 2D solution along a grid line
/// axis=value. The line must pass through that variable's sample lattice:
/// u1 lives at x = lo + i h, y = lo + (j+1/2) h; u2 swaps the roles; p is
/// cell-centered in both.
inline std::vector<SlicePoint> slice_line(const CaseSolution<2>& sol, const std::string& var,
                                          int fixed_axis, double value) {
  const MacGrid<2>& g = sol.grid;
  int component = -1;
  if (var == "u1") component = 0;
  else if (var == "u2") component = 1;
  else if (var != "p") throw std::invalid_argument("slice: variable must be u1, u2 or p");
  const NdArray<2>& data = component < 0 ? sol.composed.p : sol.composed.u[component];

  const bool node_axis = component == fixed_axis;
  const double offset = node_axis ? 0.0 : 0.5;
  const double pos = (value - g.lo) / g.h() - offset;
  const int fixed_idx = static_cast<int>(std::llround(pos));
  if (std::abs(pos - fixed_idx) > 1e-9 || fixed_idx < 0 || fixed_idx >= data.dim(fixed_axis)) {
    const char axis_name = fixed_axis == 0 ? 'x' : 'y';
    throw std::invalid_argument(
        std::string("slice: line ") + axis_name + "=" + std::to_string(value) + " misses the " +
        var + " lattice; valid offsets are " + axis_name + " = lo + " +
        (node_axis ? "i*h (i = 0..N)" : "(i+1/2)*h (i = 0..N-1)"));
  }
  const int free_axis = 1 - fixed_axis;
  std::vector<SlicePoint> out;
  for (int i = 0; i < data.dim(free_axis); ++i) {
    std::array<int, 2> idx;
    idx[fixed_axis] = fixed_idx;
    idx[free_axis] = i;
    const double coord = component == free_axis ? g.lo + i * g.h() : g.lo + (i + 0.5) * g.h();
    out.push_back({coord, data[idx]});
  }
  return out;
}

struct QuiverPoint {
  double x = 0.0, z = 0.0;
  double u1 = 0.0, u3 = 0.0;
  double magnitude = 0.0;
};

/// (u1, u3) averaged to cell centers on the plane y = value (a cell-center
/// plane); magnitude includes all three components.
inline std::vector<QuiverPoint> quiver_plane(const CaseSolution<3>& sol, double value) {
  const MacGrid<3>& g = sol.grid;
  const double pos = (value - g.lo) / g.h() - 0.5;
  const int j = static_cast<int>(std::llround(pos));
  if (std::abs(pos - j) > 1e-9 || j < 0 || j >= g.n)
    throw std::invalid_argument("quiver: plane y=" + std::to_string(value) +
                                " is not a cell-center plane y = lo + (j+1/2)*h inside the domain");
  std::vector<QuiverPoint> out;
  out.reserve(static_cast<std::size_t>(g.n) * g.n);
  for (int i = 0; i < g.n; ++i)
    for (int k = 0; k < g.n; ++k) {
      QuiverPoint q;
      const std::array<int, 3> c{i, j, k};
      const Vec<3> xc = g.cell_center(c);
      q.x = xc[0];
      q.z = xc[2];
      q.u1 = 0.5 * (sol.composed.u[0](i, j, k) + sol.composed.u[0](i + 1, j, k));
      q.u3 = 0.5 * (sol.composed.u[2](i, j, k) + sol.composed.u[2](i, j, k + 1));
      const double u2c = 0.5 * (sol.composed.u[1](i, j, k) + sol.composed.u[1](i, j + 1, k));
      q.magnitude = std::sqrt(q.u1 * q.u1 + u2c * u2c + q.u3 * q.u3);
      out.push_back(q);
    }
  return out;
}

}  // namespace nnmac
