#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "nnmac/rng.hpp"

namespace nnmac {

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;

enum class ShapeKind { circle, ellipse, sphere, spheroid };

/// Axis-aligned closed interface: circle/ellipse (2D), sphere/spheroid (3D).
/// Implicit function phi(x) = sum ((x_i - c_i)/a_i)^2 - 1 is negative strictly
/// inside (Omega-), positive strictly outside (Omega+), zero on Gamma.
template <int D>
struct InterfaceShape {
  Vec<D> center = Vec<D>::Zero();
  Vec<D> semi_axes = Vec<D>::Ones();

  ShapeKind kind() const {
    bool equal = true;
    for (int i = 1; i < D; ++i) equal = equal && semi_axes[i] == semi_axes[0];
    if constexpr (D == 2) return equal ? ShapeKind::circle : ShapeKind::ellipse;
    return equal ? ShapeKind::sphere : ShapeKind::spheroid;
  }

  double phi(const Vec<D>& x) const {
    double s = -1.0;
    for (int i = 0; i < D; ++i) {
      double t = (x[i] - center[i]) / semi_axes[i];
      s += t * t;
    }
    return s;
  }

  Vec<D> grad_phi(const Vec<D>& x) const {
    Vec<D> g;
    for (int i = 0; i < D; ++i) g[i] = 2.0 * (x[i] - center[i]) / (semi_axes[i] * semi_axes[i]);
    return g;
  }

  // phi(x) == 0 is classified as Omega- so the singular field is single-valued
  // on grids.
  bool is_inside(const Vec<D>& x) const { return phi(x) <= 0.0; }
};

template <int D>
bool is_inside(const InterfaceShape<D>& shape, const Vec<D>& x) {
  return shape.is_inside(x);
}

/// A point on Gamma with the differential-geometric data the jump conditions
/// need: unit outward normal, orthonormal tangent basis, curvature
/// (signed kappa in 2D, mean curvature H in 3D; H = 1/R on a sphere).
template <int D>
struct SurfacePoint {
  Vec<D> position;
  std::array<double, D - 1> params;
  Vec<D> normal;
  std::array<Vec<D>, D - 1> tangents;
  double curvature = 0.0;
};

/// Signed curvature of the ellipse X(t) = c + (a cos t, b sin t); positive for
/// the convex interface with outward normal.
template <int D>
double curvature_2d(const InterfaceShape<D>& shape, double theta)
  requires(D == 2)
{
  const double a = shape.semi_axes[0], b = shape.semi_axes[1];
  const double s = std::sin(theta), c = std::cos(theta);
  const double w2 = a * a * s * s + b * b * c * c;
  return a * b / (w2 * std::sqrt(w2));
}

/// Mean curvature of the spheroid (a, a, c) at latitude phi, with the sign
/// convention H = 1/R on a sphere of radius R (outward normal).
template <int D>
double mean_curvature_spheroid(const InterfaceShape<D>& shape, double /*theta*/, double phi)
  requires(D == 3)
{
  const double a = shape.semi_axes[0], c = shape.semi_axes[2];
  if (shape.semi_axes[1] != a)
    throw std::invalid_argument("mean_curvature_spheroid: requires equal equatorial semi-axes");
  const double w = std::sqrt(a * a * std::sin(phi) * std::sin(phi) +
                             c * c * std::cos(phi) * std::cos(phi));
  return 0.5 * (a * c / (w * w * w) + c / (a * w));
}

template <int D>
SurfacePoint<D> surface_point(const InterfaceShape<D>& shape, double theta)
  requires(D == 2)
{
  const double a = shape.semi_axes[0], b = shape.semi_axes[1];
  const double s = std::sin(theta), c = std::cos(theta);
  SurfacePoint<2> p;
  p.params = {theta};
  p.position = shape.center + Vec<2>(a * c, b * s);
  const double w = std::sqrt(a * a * s * s + b * b * c * c);
  p.normal = Vec<2>(b * c, a * s) / w;
  p.tangents[0] = Vec<2>(-a * s, b * c) / w;
  p.curvature = curvature_2d(shape, theta);
  return p;
}

/// theta in [0, 2pi) is longitude, phi in [-pi/2, pi/2] latitude:
/// X = c + (a cos(phi)cos(theta), a cos(phi)sin(theta), c_z sin(phi)).
template <int D>
SurfacePoint<D> surface_point(const InterfaceShape<D>& shape, double theta, double phi)
  requires(D == 3)
{
  const double a = shape.semi_axes[0], cz = shape.semi_axes[2];
  const double st = std::sin(theta), ct = std::cos(theta);
  const double sp = std::sin(phi), cp = std::cos(phi);
  SurfacePoint<3> p;
  p.params = {theta, phi};
  p.position = shape.center + Vec<3>(a * cp * ct, a * cp * st, cz * sp);
  p.normal = shape.grad_phi(p.position).normalized();
  p.tangents[0] = Vec<3>(-st, ct, 0.0);  // azimuthal direction, unit for a spheroid
  p.tangents[1] = p.normal.cross(p.tangents[0]);
  p.curvature = mean_curvature_spheroid(shape, theta, phi);
  return p;
}

/// M random points on Gamma, deterministic for a fixed seed.
/// 2D: theta uniform on [0, 2pi). 3D: area-uniform via rejection sampling
/// (proposal uniform in (theta, sin phi) has density ~ cos(phi); accept with
/// probability proportional to the remaining area-element factor).
template <int D>
std::vector<SurfacePoint<D>> sample_interface(const InterfaceShape<D>& shape, int m,
                                              std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("sample_interface: M must be >= 1");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Rng rng(seed);
  std::vector<SurfacePoint<D>> pts;
  pts.reserve(m);
  if constexpr (D == 2) {
    for (int i = 0; i < m; ++i) pts.push_back(surface_point<2>(shape, rng.uniform(0.0, two_pi)));
  } else {
    const double a = shape.semi_axes[0], cz = shape.semi_axes[2];
    const double wmax = std::max(a, cz);
    while (static_cast<int>(pts.size()) < m) {
      const double theta = rng.uniform(0.0, two_pi);
      const double sphi = rng.uniform(-1.0, 1.0);
      const double phi = std::asin(sphi);
      const double w = std::sqrt(a * a * sphi * sphi + cz * cz * (1.0 - sphi * sphi));
      if (rng.uniform() * wmax <= w) pts.push_back(surface_point<3>(shape, theta, phi));
    }
  }
  return pts;
}

}  // namespace nnmac
