#pragma once

#include <fftw3.h>

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "nnmac/mac_grid.hpp"
#include "nnmac/nd_array.hpp"

namespace nnmac {

/// Direct solver for L = mu Delta_h on the interior unknowns of one velocity
/// component, by tensor-product diagonalization with fast sine transforms.
///
/// The transform family per direction matches the node placement:
///  - face-normal direction: nodes between two Dirichlet faces -> DST-I
///    (RODFT00), modes sin(m pi i / N);
///  - cell-centered directions: ghost closure u_g = -u_in gives the
///    tridiagonal with -3 at the ends -> DST-II forward / DST-III inverse
///    (RODFT10/RODFT01), modes sin(m pi (j+1/2) / N).
/// Both families share the eigenvalues (2 cos(m pi / N) - 2)/h^2 < 0, so L is
/// negative definite and always invertible.
template <int D>
class PoissonPlan {
public:
  PoissonPlan(const MacGrid<D>& g, int component, double mu)
      : dims_(g.interior_dims(component)), mu_(mu) {
    const double h2 = g.h() * g.h();
    std::size_t total = 1;
    int n_fftw[D];
    fftw_r2r_kind fwd_kind[D], bwd_kind[D];
    for (int a = 0; a < D; ++a) {
      total *= static_cast<std::size_t>(dims_[a]);
      n_fftw[a] = dims_[a];
      const bool face_normal = a == component;
      fwd_kind[a] = face_normal ? FFTW_RODFT00 : FFTW_RODFT10;
      bwd_kind[a] = face_normal ? FFTW_RODFT00 : FFTW_RODFT01;
      eig_[a].resize(dims_[a]);
      for (int m = 0; m < dims_[a]; ++m)
        eig_[a][m] = (2.0 * std::cos((m + 1) * std::numbers::pi / g.n) - 2.0) / h2;
      norm_ *= 2.0 * g.n;  // logical size is N for both transform families
    }
    buf_.assign(total, 0.0);
    fwd_ = fftw_plan_r2r(D, n_fftw, buf_.data(), buf_.data(), fwd_kind, FFTW_ESTIMATE);
    bwd_ = fftw_plan_r2r(D, n_fftw, buf_.data(), buf_.data(), bwd_kind, FFTW_ESTIMATE);
    if (!fwd_ || !bwd_) throw std::runtime_error("PoissonPlan: fftw plan creation failed");
  }

  PoissonPlan(const PoissonPlan&) = delete;
  PoissonPlan& operator=(const PoissonPlan&) = delete;
  PoissonPlan(PoissonPlan&& o) noexcept { swap(o); }
  PoissonPlan& operator=(PoissonPlan&& o) noexcept {
    swap(o);
    return *this;
  }
  ~PoissonPlan() {
    if (fwd_) fftw_destroy_plan(fwd_);
    if (bwd_) fftw_destroy_plan(bwd_);
  }

  const std::array<int, D>& dims() const { return dims_; }

  /// Solves L u = rhs; one forward transform, a diagonal scale, one inverse.
  /// Not reentrant (shared in-place buffer); callers serialize.
  NdArray<D> solve(const NdArray<D>& rhs) const {
    if (rhs.dims() != dims_) throw std::invalid_argument("PoissonPlan::solve: dimension mismatch");
    std::copy(rhs.begin(), rhs.end(), buf_.begin());
    fftw_execute(fwd_);
    scale_modes();
    fftw_execute(bwd_);
    NdArray<D> out(dims_);
    const double inv_norm = 1.0 / norm_;
    for (std::size_t i = 0; i < buf_.size(); ++i) out.data()[i] = buf_[i] * inv_norm;
    return out;
  }

private:
  std::array<int, D> dims_{};
  std::array<std::vector<double>, D> eig_;
  double mu_ = 1.0;
  double norm_ = 1.0;
  mutable std::vector<double> buf_;
  fftw_plan fwd_ = nullptr, bwd_ = nullptr;

  void swap(PoissonPlan& o) noexcept {
    std::swap(dims_, o.dims_);
    std::swap(eig_, o.eig_);
    std::swap(mu_, o.mu_);
    std::swap(norm_, o.norm_);
    std::swap(buf_, o.buf_);
    std::swap(fwd_, o.fwd_);
    std::swap(bwd_, o.bwd_);
  }

  void scale_modes() const {
    if constexpr (D == 2) {
      std::size_t at = 0;
      for (int i = 0; i < dims_[0]; ++i)
        for (int j = 0; j < dims_[1]; ++j, ++at) buf_[at] /= mu_ * (eig_[0][i] + eig_[1][j]);
    } else {
      std::size_t at = 0;
      for (int i = 0; i < dims_[0]; ++i)
        for (int j = 0; j < dims_[1]; ++j) {
          const double eij = eig_[0][i] + eig_[1][j];
          for (int k = 0; k < dims_[2]; ++k, ++at) buf_[at] /= mu_ * (eij + eig_[2][k]);
        }
    }
  }
};

/// One plan per velocity component plus the Poisson-solve counter the cost
/// accounting reports.
template <int D>
class PoissonPlanSet {
public:
  PoissonPlanSet(const MacGrid<D>& g, double mu) {
    plans_.reserve(D);
    for (int k = 0; k < D; ++k) plans_.emplace_back(g, k, mu);
  }

  NdArray<D> solve(int k, const NdArray<D>& rhs) const {
    ++solve_count_;
    return plans_[k].solve(rhs);
  }

  long solve_count() const { return solve_count_; }
  void reset_count() const { solve_count_ = 0; }

private:
  std::vector<PoissonPlan<D>> plans_;
  mutable long solve_count_ = 0;
};

/// L^{-1} (G p) per component, reusing the plans.
template <int D>
std::array<NdArray<D>, D> apply_Linv_G(const PoissonPlanSet<D>& plans, const MacGrid<D>& g,
                                       const NdArray<D>& p) {
  std::array<NdArray<D>, D> gp = apply_G(g, p);
  for (int k = 0; k < D; ++k) gp[k] = plans.solve(k, gp[k]);
  return gp;
}

}  // namespace nnmac
