#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "nnmac/geometry.hpp"

namespace nnmac {

/// One benchmark problem: domain, interface, interfacial force, body force,
/// boundary data, and (when available) the exact solution. mu = 1 throughout.
template <int D>
struct CaseDefinition {
  std::string id;
  double lo = 0.0, hi = 1.0;  // domain box [lo, hi]^D
  InterfaceShape<D> shape;
  double mu = 1.0;

  std::function<Vec<D>(const SurfacePoint<D>&)> interfacial_force;  // F(X)
  std::function<Vec<D>(const Vec<D>&, bool inside)> body_force;     // g(x, side)
  std::function<Vec<D>(const SurfacePoint<D>&)> g_jump;             // [[g]] = g+ - g-
  std::function<Vec<D>(const Vec<D>&)> boundary_velocity;           // u_b on domain boundary

  bool has_exact = false;
  std::function<Vec<D>(const Vec<D>&, bool inside)> exact_u;
  std::function<double(const Vec<D>&, bool inside)> exact_p;
};

inline int case_dimension(const std::string& id) {
  if (id == "ex1" || id == "ex2") return 2;
  if (id == "ex3" || id == "ex4") return 3;
  throw std::invalid_argument("unknown case id '" + id + "' (expected ex1..ex4)");
}

// ---- free-space Stokeslet single layer (2D) ----------------------------------

struct StokesletSource2d {
  Vec<2> x;
  Vec<2> f;
  double ds;
};

/// Composite-trapezoid samples of an interfacial force density on a closed 2D
/// interface; spectrally accurate off the surface since the parametrization is
/// periodic and smooth.
inline std::vector<StokesletSource2d> stokeslet_sources(
    const InterfaceShape<2>& shape, const std::function<Vec<2>(const SurfacePoint<2>&)>& force,
    int n_q) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double a = shape.semi_axes[0], b = shape.semi_axes[1];
  std::vector<StokesletSource2d> src(n_q);
  for (int q = 0; q < n_q; ++q) {
    const double th = two_pi * q / n_q;
    SurfacePoint<2> p = surface_point<2>(shape, th);
    const double speed = std::hypot(a * std::sin(th), b * std::cos(th));  // |X'(theta)|
    src[q] = {p.position, force(p), speed * two_pi / n_q};
  }
  return src;
}

/// u(x) = 1/(4 pi mu) * sum_k [ -log|r_k| F_k + (r_k.F_k) r_k / |r_k|^2 ] ds_k.
/// Targets closer than a tenth of the quadrature spacing are rejected: the
/// plain trapezoid rule is invalid across the kernel's log singularity.
inline Vec<2> stokeslet_eval(const std::vector<StokesletSource2d>& sources, const Vec<2>& target,
                             double mu) {
  double max_ds = 0.0, min_dist = std::numeric_limits<double>::max();
  Vec<2> acc = Vec<2>::Zero();
  for (const auto& s : sources) {
    const Vec<2> r = target - s.x;
    const double r2 = r.squaredNorm();
    min_dist = std::min(min_dist, r2);
    max_ds = std::max(max_ds, s.ds);
    acc += (-0.5 * std::log(r2) * s.f + (r.dot(s.f) / r2) * r) * s.ds;
  }
  if (std::sqrt(min_dist) < 0.1 * max_ds)
    throw std::invalid_argument("stokeslet_eval: target too close to the interface");
  return acc / (4.0 * std::numbers::pi * mu);
}

// ---- Example 1: unit circle in [-2,2]^2, exact solution known ----------------

inline CaseDefinition<2> case_ex1() {
  using std::cos, std::sin;
  const double pi = std::numbers::pi;
  CaseDefinition<2> c;
  c.id = "ex1";
  c.lo = -2.0;
  c.hi = 2.0;
  c.shape.center = Vec<2>::Zero();
  c.shape.semi_axes = Vec<2>::Ones();
  c.mu = 1.0;

  c.interfacial_force = [](const SurfacePoint<2>& p) -> Vec<2> {
    const double th = p.params[0];
    return 2.0 * sin(3.0 * th) * p.tangents[0] - std::pow(cos(th), 3) * p.normal;
  };

  // exact fields in Cartesian form: r^2 cos(2t) = x^2-y^2,
  // r^4 cos(4t) = x^4-6x^2y^2+y^4, r^4 sin(4t) = 4(x^3y-xy^3), ...
  c.has_exact = true;
  c.exact_u = [](const Vec<2>& xy, bool inside) -> Vec<2> {
    const double x = xy[0], y = xy[1];
    const double r2 = x * x + y * y;
    const double q2 = x * x - y * y;
    const double q4 = x * x * x * x - 6.0 * x * x * y * y + y * y * y * y;
    const double p4 = x * x * x * y - x * y * y * y;
    if (inside) {
      return {q2 / 8.0 + q4 / 16.0 - r2 * q2 / 4.0,
              -x * y / 4.0 + p4 / 4.0 + r2 * x * y / 2.0};
    }
    const double r4 = r2 * r2, r6 = r4 * r2, r8 = r4 * r4;
    return {-q2 / (8.0 * r4) + 5.0 * q4 / (16.0 * r8) - q4 / (4.0 * r6),
            x * y / (4.0 * r4) + 5.0 * p4 / (4.0 * r8) - p4 / r6};
  };
  c.exact_p = [pi](const Vec<2>& xy, bool inside) -> double {
    const double x = xy[0], y = xy[1];
    const double base = cos(pi * x) * cos(pi * y);
    return inside ? x * x * x + base : base;
  };
  c.body_force = [pi](const Vec<2>& xy, bool inside) -> Vec<2> {
    const double x = xy[0], y = xy[1];
    const double g1t = -pi * sin(pi * x) * cos(pi * y);
    const double g2t = -pi * cos(pi * x) * sin(pi * y);
    if (inside) return {g1t + 6.0 * x * x - 3.0 * y * y, g2t - 6.0 * x * y};
    const double r2 = x * x + y * y, r8 = r2 * r2 * r2 * r2;
    const double q4 = x * x * x * x - 6.0 * x * x * y * y + y * y * y * y;
    const double p4 = x * x * x * y - x * y * y * y;
    return {g1t - 3.0 * q4 / r8, g2t - 12.0 * p4 / r8};
  };
  c.g_jump = [bf = c.body_force](const SurfacePoint<2>& p) -> Vec<2> {
    return bf(p.position, false) - bf(p.position, true);
  };
  c.boundary_velocity = [u = c.exact_u](const Vec<2>& x) { return u(x, false); };
  return c;
}

// ---- Example 2: ellipse (0.5, 0.3) in [-1,1]^2, boundary-integral reference --

inline CaseDefinition<2> case_ex2(int quadrature_nodes = 256) {
  CaseDefinition<2> c;
  c.id = "ex2";
  c.lo = -1.0;
  c.hi = 1.0;
  c.shape.center = Vec<2>::Zero();
  c.shape.semi_axes = Vec<2>(0.5, 0.3);
  c.mu = 1.0;

  c.interfacial_force = [](const SurfacePoint<2>& p) -> Vec<2> {
    return 0.1 * p.curvature * p.normal - 0.1 * p.tangents[0];
  };
  c.body_force = [](const Vec<2>&, bool) { return Vec<2>::Zero().eval(); };
  c.g_jump = [](const SurfacePoint<2>&) { return Vec<2>::Zero().eval(); };

  auto sources = std::make_shared<std::vector<StokesletSource2d>>(
      stokeslet_sources(c.shape, c.interfacial_force, quadrature_nodes));
  c.boundary_velocity = [sources, mu = c.mu](const Vec<2>& x) {
    return stokeslet_eval(*sources, x, mu);
  };
  return c;
}

/// The 64 discrete marker points X(theta_k), theta_k = 2 k pi / 64, k = 1..64.
inline std::vector<SurfacePoint<2>> markers_ex2(const InterfaceShape<2>& shape) {
  std::vector<SurfacePoint<2>> m;
  for (int k = 1; k <= 64; ++k)
    m.push_back(surface_point<2>(shape, 2.0 * std::numbers::pi * k / 64.0));
  return m;
}

/// Interfacial velocity of the single-layer field at on-surface points.
/// The trapezoid rule cannot be used on Gamma itself, so u(X) is recovered
/// from off-surface values: the two-sided average cancels the normal-derivative
/// jump up to the known term (eps/2) F_tau / mu, and one Richardson step in eps
/// removes the O(eps^2) remainder.
inline std::vector<Vec<2>> reference_interfacial_velocity(
    const InterfaceShape<2>& shape, const std::function<Vec<2>(const SurfacePoint<2>&)>& force,
    const std::vector<SurfacePoint<2>>& markers, double mu, int n_q = 16384, double eps = 1e-3) {
  const auto sources = stokeslet_sources(shape, force, n_q);
  auto one_sided = [&](const SurfacePoint<2>& p, double e) -> Vec<2> {
    const Vec<2> f = force(p);
    const Vec<2> f_tau = f - f.dot(p.normal) * p.normal;
    const Vec<2> avg = 0.5 * (stokeslet_eval(sources, (p.position + e * p.normal).eval(), mu) +
                              stokeslet_eval(sources, (p.position - e * p.normal).eval(), mu));
    return avg + (0.5 * e / mu) * f_tau;
  };
  std::vector<Vec<2>> out;
  out.reserve(markers.size());
  for (const auto& p : markers)
    out.push_back(((4.0 * one_sided(p, eps) - one_sided(p, 2.0 * eps)) / 3.0).eval());
  return out;
}

// ---- Example 3: unit sphere in [-2,2]^3, exact solution known ----------------

namespace detail {

/// 6th-order central difference of f along direction n (exact for polynomial
/// f of degree <= 6, which covers every exact field of Example 3).
template <class Fn>
Vec<3> directional_derivative6(Fn&& f, const Vec<3>& x, const Vec<3>& n, double eps) {
  auto at = [&](double s) -> Vec<3> { return f((x + s * eps * n).eval()); };
  Vec<3> num = -at(-3.0) + 9.0 * at(-2.0) - 45.0 * at(-1.0) + 45.0 * at(1.0) - 9.0 * at(2.0) +
               at(3.0);
  return num / (60.0 * eps);
}

}  // namespace detail

inline CaseDefinition<3> case_ex3() {
  CaseDefinition<3> c;
  c.id = "ex3";
  c.lo = -2.0;
  c.hi = 2.0;
  c.shape.center = Vec<3>::Zero();
  c.shape.semi_axes = Vec<3>::Ones();
  c.mu = 1.0;

  c.has_exact = true;
  c.exact_u = [](const Vec<3>& p, bool inside) -> Vec<3> {
    const double x = p[0], y = p[1], z = p[2];
    if (inside) return {0.25 * y * z, 0.25 * x * z, -0.5 * x * y * (1.0 - x * x - y * y)};
    const double r2 = x * x + y * y + z * z;
    return {0.25 * y * z * r2, 0.25 * x * z * r2, -0.5 * x * y * z * z};
  };
  c.exact_p = [](const Vec<3>& p, bool inside) -> double {
    const double x = p[0], y = p[1], z = p[2];
    return inside ? (-0.75 * x * x * x + 0.375 * x) * y * z : 0.0;
  };
  c.body_force = [](const Vec<3>& p, bool inside) -> Vec<3> {
    const double x = p[0], y = p[1], z = p[2];
    if (inside)
      return {(-2.25 * x * x + 0.375) * y * z, (-0.75 * x * x * x + 0.375 * x) * z,
              (-0.75 * x * x * x - 5.625 * x) * y};
    return {-3.5 * y * z, -3.5 * x * z, x * y};
  };
  c.g_jump = [bf = c.body_force](const SurfacePoint<3>& p) -> Vec<3> {
    return bf(p.position, false) - bf(p.position, true);
  };
  // F derived from the exact fields: F_n = [[p]], F_tau = -mu [[du/dn]].
  c.interfacial_force = [u = c.exact_u, p = c.exact_p, mu = c.mu](const SurfacePoint<3>& sp) {
    const Vec<3>& n = sp.normal;
    const double f_n = p(sp.position, false) - p(sp.position, true);
    const Vec<3> dun_out =
        detail::directional_derivative6([&](const Vec<3>& q) { return u(q, false); }, sp.position,
                                        n, 0.05);
    const Vec<3> dun_in =
        detail::directional_derivative6([&](const Vec<3>& q) { return u(q, true); }, sp.position,
                                        n, 0.05);
    Vec<3> f_tau = -mu * (dun_out - dun_in);
    f_tau -= f_tau.dot(n) * n;  // tangential by construction; drop roundoff
    return (f_n * n + f_tau).eval();
  };
  c.boundary_velocity = [u = c.exact_u](const Vec<3>& x) { return u(x, false); };
  return c;
}

// ---- Example 4: oblate spheroid in [-1,1]^3, surface tension force -----------

inline CaseDefinition<3> case_ex4() {
  CaseDefinition<3> c;
  c.id = "ex4";
  c.lo = -1.0;
  c.hi = 1.0;
  c.shape.center = Vec<3>::Zero();
  c.shape.semi_axes = Vec<3>(0.5, 0.5, 0.3);
  c.mu = 1.0;

  c.interfacial_force = [](const SurfacePoint<3>& p) -> Vec<3> {
    return -2.0 * p.curvature * p.normal;
  };
  c.body_force = [](const Vec<3>&, bool) { return Vec<3>::Zero().eval(); };
  c.g_jump = [](const SurfacePoint<3>&) { return Vec<3>::Zero().eval(); };
  c.boundary_velocity = [](const Vec<3>&) { return Vec<3>::Zero().eval(); };
  return c;
}

}  // namespace nnmac
