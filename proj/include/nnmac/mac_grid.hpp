#pragma once

#include <array>
#include <stdexcept>

#include "nnmac/cases.hpp"
#include "nnmac/geometry.hpp"
#include "nnmac/nd_array.hpp"
#include "nnmac/singular_field.hpp"

namespace nnmac {

/// Uniform staggered (MAC) grid on the box [lo,hi]^D with N cells per
/// direction. Pressure lives at cell centers; velocity component k lives on
/// the faces normal to axis k (N+1 planes in direction k, N in the others).
/// Faces on the domain boundary in the normal direction carry Dirichlet data.
template <int D>
struct MacGrid {
  double lo = 0.0, hi = 1.0;
  int n = 0;

  MacGrid() = default;
  MacGrid(double lo_, double hi_, int n_) : lo(lo_), hi(hi_), n(n_) {
    if (n < 4 || n % 2 != 0) throw std::invalid_argument("MacGrid: N must be even and >= 4");
    if (!(hi > lo)) throw std::invalid_argument("MacGrid: empty domain");
  }

  double h() const { return (hi - lo) / n; }

  std::array<int, D> cell_dims() const {
    std::array<int, D> d;
    d.fill(n);
    return d;
  }
  std::array<int, D> face_dims(int k) const {
    std::array<int, D> d;
    d.fill(n);
    d[k] = n + 1;
    return d;
  }
  std::array<int, D> interior_dims(int k) const {
    std::array<int, D> d;
    d.fill(n);
    d[k] = n - 1;
    return d;
  }

  Vec<D> cell_center(const std::array<int, D>& c) const {
    Vec<D> x;
    for (int a = 0; a < D; ++a) x[a] = lo + (c[a] + 0.5) * h();
    return x;
  }
  /// Position of a component-k face given its full index (idx[k] in 0..N).
  Vec<D> face_position(int k, const std::array<int, D>& idx) const {
    Vec<D> x;
    for (int a = 0; a < D; ++a) x[a] = a == k ? lo + idx[a] * h() : lo + (idx[a] + 0.5) * h();
    return x;
  }
  /// Full face index of an interior unknown (interior idx[k] in 0..N-2).
  std::array<int, D> interior_to_face(int k, std::array<int, D> idx) const {
    idx[k] += 1;
    return idx;
  }
};

/// Velocity on faces (full arrays, boundary-normal faces included) plus
/// cell-centered pressure.
template <int D>
struct StaggeredField {
  std::array<NdArray<D>, D> u;
  NdArray<D> p;

  static StaggeredField zero(const MacGrid<D>& g) {
    StaggeredField f;
    for (int k = 0; k < D; ++k) f.u[k] = NdArray<D>(g.face_dims(k));
    f.p = NdArray<D>(g.cell_dims());
    return f;
  }
};

template <int D>
struct RhsAssembly {
  std::array<NdArray<D>, D> b1;  // interior faces per component
  NdArray<D> b2;                 // cell centers
};

// ---- discrete operators -------------------------------------------------------
//
// L  = mu * Delta_h   (5-point in 2D, 7-point in 3D)
// G  = -grad_h        (cell pressure -> interior faces)
// G^T = div_h         (interior faces -> cells); boundary-face contributions
//                      are moved to the right-hand side during assembly.

/// mu Delta_h of one velocity component at its interior faces. The array holds
/// all faces; boundary-normal faces are read as Dirichlet data and the wall
/// closure in cell-centered directions uses the ghost value 2 u_b - u_in, with
/// u_b evaluated by `ub` (the k-th velocity component as a function of
/// position).
template <int D, class UbFn>
NdArray<D> apply_L_full(const MacGrid<D>& g, int k, const NdArray<D>& full, double mu, UbFn&& ub) {
  const double ih2 = 1.0 / (g.h() * g.h());
  NdArray<D> out(g.interior_dims(k));
  out.for_each_index([&](const std::array<int, D>& t) {
    const std::array<int, D> f = g.interior_to_face(k, t);
    double acc = -2.0 * D * full[f];
    for (int a = 0; a < D; ++a) {
      for (int step : {-1, +1}) {
        std::array<int, D> nb = f;
        nb[a] += step;
        const bool off = nb[a] < 0 || nb[a] >= full.dim(a);
        if (!off) {
          acc += full[nb];
        } else {
          // ghost point beyond the wall in a cell-centered direction
          Vec<D> wall = g.face_position(k, f);
          wall[a] = step < 0 ? g.lo : g.hi;
          acc += 2.0 * ub(wall) - full[f];
        }
      }
    }
    out[t] = mu * acc * ih2;
  });
  return out;
}

/// Same operator restricted to interior unknowns with homogeneous boundary
/// data (the matrix the fast solver inverts).
template <int D>
NdArray<D> apply_L_interior(const MacGrid<D>& g, int k, const NdArray<D>& interior, double mu) {
  const double ih2 = 1.0 / (g.h() * g.h());
  NdArray<D> out(g.interior_dims(k));
  out.for_each_index([&](const std::array<int, D>& t) {
    double acc = -2.0 * D * interior[t];
    for (int a = 0; a < D; ++a) {
      for (int step : {-1, +1}) {
        std::array<int, D> nb = t;
        nb[a] += step;
        const bool off = nb[a] < 0 || nb[a] >= interior.dim(a);
        if (!off)
          acc += interior[nb];
        else if (a != k)
          acc -= interior[t];  // homogeneous ghost: u_g = -u_in
        // a == k off-range: boundary face value 0
      }
    }
    out[t] = mu * acc * ih2;
  });
  return out;
}

/// G p = -grad_h p on interior faces (no pressure boundary condition enters).
template <int D>
std::array<NdArray<D>, D> apply_G(const MacGrid<D>& g, const NdArray<D>& p) {
  const double ih = 1.0 / g.h();
  std::array<NdArray<D>, D> out;
  for (int k = 0; k < D; ++k) {
    out[k] = NdArray<D>(g.interior_dims(k));
    out[k].for_each_index([&](const std::array<int, D>& t) {
      std::array<int, D> cm = t, cp = t;
      cp[k] += 1;
      out[k][t] = -(p[cp] - p[cm]) * ih;
    });
  }
  return out;
}

/// G^T v = div_h v per cell for interior-face velocities (boundary faces 0).
template <int D, std::size_t K>
  requires(K == D)
NdArray<D> apply_GT(const MacGrid<D>& g, const std::array<NdArray<D>, K>& v) {
  const double ih = 1.0 / g.h();
  NdArray<D> out(g.cell_dims());
  out.for_each_index([&](const std::array<int, D>& c) {
    double acc = 0.0;
    for (int k = 0; k < D; ++k) {
      std::array<int, D> fm = c, fp = c;
      fm[k] -= 1;  // interior index of the lower face (full index c[k])
      if (fp[k] <= g.n - 2) acc += v[k][fp];
      if (fm[k] >= 0) acc -= v[k][fm];
    }
    out[c] = acc * ih;
  });
  return out;
}

/// div_h of a full staggered velocity (boundary faces included); used for the
/// divergence diagnostic and boundary-flux bookkeeping.
template <int D, std::size_t K>
  requires(K == D)
NdArray<D> div_full(const MacGrid<D>& g, const std::array<NdArray<D>, K>& u_full) {
  const double ih = 1.0 / g.h();
  NdArray<D> out(g.cell_dims());
  out.for_each_index([&](const std::array<int, D>& c) {
    double acc = 0.0;
    for (int k = 0; k < D; ++k) {
      std::array<int, D> fm = c, fp = c;
      fp[k] += 1;
      acc += u_full[k][fp] - u_full[k][fm];
    }
    out[c] = acc * ih;
  });
  return out;
}

// ---- right-hand-side assembly --------------------------------------------------

/// Velocity field holding only the Dirichlet data: boundary-normal faces carry
/// u_b, all interior faces are zero.
template <int D>
std::array<NdArray<D>, D> boundary_only_velocity(const MacGrid<D>& g,
                                                 const std::function<Vec<D>(const Vec<D>&)>& ub) {
  std::array<NdArray<D>, D> out;
  for (int k = 0; k < D; ++k) {
    out[k] = NdArray<D>(g.face_dims(k));
    out[k].for_each_index([&](const std::array<int, D>& f) {
      if (f[k] == 0 || f[k] == g.n) out[k][f] = ub(g.face_position(k, f))[k];
    });
  }
  return out;
}

/// Assembles b1 = grad p_s - mu lap u_s - g + f(u_b) at interior faces and
/// b2 = -div u_s + h(u_b) at cell centers. Singular-field terms come from
/// exact network differentiation and vanish at faces/cells in Omega+; the
/// boundary terms are generated by applying L and div_h to the pure-boundary
/// velocity, which keeps operator and right-hand side exactly consistent.
template <int D>
RhsAssembly<D> assemble_rhs(const MacGrid<D>& g, const CaseDefinition<D>& c,
                            const SingularField<D>& s) {
  RhsAssembly<D> rhs;
  const auto bc = boundary_only_velocity<D>(g, c.boundary_velocity);
  for (int k = 0; k < D; ++k) {
    auto ub_k = [&](const Vec<D>& x) { return c.boundary_velocity(x)[k]; };
    const NdArray<D> bc_l = apply_L_full(g, k, bc[k], c.mu, ub_k);
    rhs.b1[k] = NdArray<D>(g.interior_dims(k));
    rhs.b1[k].for_each_index([&](const std::array<int, D>& t) {
      const Vec<D> x = g.face_position(k, g.interior_to_face(k, t));
      const bool inside = s.shape.is_inside(x);
      double val = -c.body_force(x, inside)[k] - bc_l[t];
      if (inside) {
        val += s.p_net.eval_with_derivatives(x).gradient[k] -
               s.mu * s.u_nets[k].eval_with_derivatives(x).laplacian;
      }
      rhs.b1[k][t] = val;
    });
  }
  const NdArray<D> bc_div = div_full(g, bc);
  rhs.b2 = NdArray<D>(g.cell_dims());
  rhs.b2.for_each_index([&](const std::array<int, D>& cidx) {
    const Vec<D> x = g.cell_center(cidx);
    rhs.b2[cidx] = -s.div_u_s(x) - bc_div[cidx];
  });
  return rhs;
}

// ---- interior/full embedding helpers -------------------------------------------

template <int D>
NdArray<D> embed_interior(const MacGrid<D>& g, int k, const NdArray<D>& interior) {
  NdArray<D> full(g.face_dims(k));
  interior.for_each_index(
      [&](const std::array<int, D>& t) { full[g.interior_to_face(k, t)] = interior[t]; });
  return full;
}

template <int D>
NdArray<D> extract_interior(const MacGrid<D>& g, int k, const NdArray<D>& full) {
  NdArray<D> interior(g.interior_dims(k));
  interior.for_each_index(
      [&](const std::array<int, D>& t) { interior[t] = full[g.interior_to_face(k, t)]; });
  return interior;
}

}  // namespace nnmac
