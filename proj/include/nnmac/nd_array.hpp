#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace nnmac {

/// Dense row-major D-dimensional array of doubles (D = 2 or 3).
/// Used for staggered velocity components, cell-centered pressure and all
/// assembled right-hand sides.
template <int D>
class NdArray {
  static_assert(D == 2 || D == 3);

public:
  NdArray() { dims_.fill(0); }
  explicit NdArray(const std::array<int, D>& dims, double fill = 0.0) : dims_(dims) {
    std::size_t n = 1;
    for (int d : dims_) {
      assert(d >= 0);
      n *= static_cast<std::size_t>(d);
    }
    data_.assign(n, fill);
  }

  const std::array<int, D>& dims() const { return dims_; }
  int dim(int axis) const { return dims_[axis]; }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  std::size_t offset(const std::array<int, D>& idx) const {
    std::size_t off = 0;
    for (int a = 0; a < D; ++a) {
      assert(idx[a] >= 0 && idx[a] < dims_[a]);
      off = off * static_cast<std::size_t>(dims_[a]) + static_cast<std::size_t>(idx[a]);
    }
    return off;
  }

  double& operator[](const std::array<int, D>& idx) { return data_[offset(idx)]; }
  double operator[](const std::array<int, D>& idx) const { return data_[offset(idx)]; }

  double& operator()(int i, int j)
    requires(D == 2)
  {
    return data_[offset({i, j})];
  }
  double operator()(int i, int j) const
    requires(D == 2)
  {
    return data_[offset({i, j})];
  }
  double& operator()(int i, int j, int k)
    requires(D == 3)
  {
    return data_[offset({i, j, k})];
  }
  double operator()(int i, int j, int k) const
    requires(D == 3)
  {
    return data_[offset({i, j, k})];
  }

  NdArray& operator+=(const NdArray& o) {
    assert(dims_ == o.dims_);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  NdArray& operator-=(const NdArray& o) {
    assert(dims_ == o.dims_);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  NdArray& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  double dot(const NdArray& o) const {
    assert(dims_ == o.dims_);
    double acc = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i) acc += data_[i] * o.data_[i];
    return acc;
  }
  double norm2() const { return std::sqrt(dot(*this)); }
  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }
  double sum() const {
    double acc = 0.0;
    for (double v : data_) acc += v;
    return acc;
  }
  double mean() const { return data_.empty() ? 0.0 : sum() / static_cast<double>(data_.size()); }

  void fill(double v) { data_.assign(data_.size(), v); }

  /// Visit every multi-index in row-major order.
  template <class Fn>
  void for_each_index(Fn&& fn) const {
    std::array<int, D> idx{};
    if constexpr (D == 2) {
      for (idx[0] = 0; idx[0] < dims_[0]; ++idx[0])
        for (idx[1] = 0; idx[1] < dims_[1]; ++idx[1]) fn(idx);
    } else {
      for (idx[0] = 0; idx[0] < dims_[0]; ++idx[0])
        for (idx[1] = 0; idx[1] < dims_[1]; ++idx[1])
          for (idx[2] = 0; idx[2] < dims_[2]; ++idx[2]) fn(idx);
    }
  }

private:
  std::array<int, D> dims_;
  std::vector<double> data_;
};

}  // namespace nnmac
