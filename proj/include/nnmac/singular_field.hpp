#pragma once

#include <array>

#include "nnmac/geometry.hpp"
#include "nnmac/shallow_net.hpp"

namespace nnmac {

/// The piecewise singular part of the solution: trained networks (P, U)
/// inside Omega-, hard zero outside. Evaluation is gated pointwise by the
/// interface's implicit function with no blending region; points with
/// phi(x) = 0 take the inner branch.
template <int D>
struct SingularField {
  ShallowNet p_net;
  std::array<ShallowNet, D> u_nets;
  InterfaceShape<D> shape;
  double mu = 1.0;

  bool inside(const Vec<D>& x) const { return shape.is_inside(x); }

  double p_s(const Vec<D>& x) const { return inside(x) ? p_net.value(x) : 0.0; }

  Vec<D> u_s(const Vec<D>& x) const {
    Vec<D> u = Vec<D>::Zero();
    if (!inside(x)) return u;
    for (int j = 0; j < D; ++j) u[j] = u_nets[j].value(x);
    return u;
  }

  Vec<D> grad_p_s(const Vec<D>& x) const {
    if (!inside(x)) return Vec<D>::Zero();
    return p_net.eval_with_derivatives(x).gradient;
  }

  Vec<D> laplacian_u_s(const Vec<D>& x) const {
    Vec<D> lap = Vec<D>::Zero();
    if (!inside(x)) return lap;
    for (int j = 0; j < D; ++j) lap[j] = u_nets[j].eval_with_derivatives(x).laplacian;
    return lap;
  }

  double div_u_s(const Vec<D>& x) const {
    if (!inside(x)) return 0.0;
    double div = 0.0;
    for (int j = 0; j < D; ++j) div += u_nets[j].eval_with_derivatives(x).gradient[j];
    return div;
  }

  /// Everything the right-hand-side assembly needs at one point.
  struct Sample {
    bool inside = false;
    double p = 0.0;
    Vec<D> u = Vec<D>::Zero();
    Vec<D> grad_p = Vec<D>::Zero();
    Vec<D> lap_u = Vec<D>::Zero();
    double div_u = 0.0;
  };

  Sample sample(const Vec<D>& x) const {
    Sample s;
    s.inside = inside(x);
    if (!s.inside) return s;
    auto pd = p_net.eval_with_derivatives(x);
    s.p = pd.value;
    s.grad_p = pd.gradient;
    for (int j = 0; j < D; ++j) {
      auto ud = u_nets[j].eval_with_derivatives(x);
      s.u[j] = ud.value;
      s.lap_u[j] = ud.laplacian;
      s.div_u += ud.gradient[j];
    }
    return s;
  }

  /// Batch entry point for grid assembly; safe to call concurrently.
  template <class PointRange, class Fn>
  void sample_each(const PointRange& points, Fn&& fn) const {
    for (const auto& x : points) fn(sample(x));
  }
};

}  // namespace nnmac
