#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nnmac/rng.hpp"

namespace nnmac {

struct NetDerivatives {
  double value = 0.0;
  Eigen::VectorXd gradient;  // size = input dim
  double laplacian = 0.0;
};

struct CheckpointMeta {
  std::uint64_t seed = 0;
  double final_loss = 0.0;
  int epochs = 0;
  std::string case_id;
  std::string role;
  std::vector<double> loss_tail;
};

/// Fully-connected scalar-output network with sigmoid hidden activations and
/// identity output, at most two hidden layers. Value, gradient, Laplacian and
/// the Jacobians of those quantities w.r.t. every parameter are evaluated in
/// closed form (no AD framework; the depth is fixed and small).
///
/// Flattened parameter layout: per layer, weight matrix row-major then bias.
class ShallowNet {
public:
  enum class Deriv { value, normal_deriv, laplacian, partial };

  ShallowNet() = default;

  explicit ShallowNet(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    validate_sizes();
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      weights_.emplace_back(Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]));
      biases_.emplace_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
    }
  }

  /// Fan-in uniform init: W ~ U[-sqrt(1/fan_in), +sqrt(1/fan_in)], biases zero.
  static ShallowNet init(const std::vector<int>& layer_sizes, std::uint64_t seed) {
    ShallowNet net(layer_sizes);
    Rng rng(seed);
    for (std::size_t l = 0; l < net.weights_.size(); ++l) {
      const double bound = std::sqrt(1.0 / static_cast<double>(net.sizes_[l]));
      auto& w = net.weights_[l];
      for (int r = 0; r < w.rows(); ++r)
        for (int c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
    }
    return net;
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int hidden_layer_count() const { return static_cast<int>(sizes_.size()) - 2; }
  const Eigen::MatrixXd& weight(int l) const { return weights_[l]; }
  const Eigen::VectorXd& bias(int l) const { return biases_[l]; }
  Eigen::MatrixXd& weight(int l) { return weights_[l]; }
  Eigen::VectorXd& bias(int l) { return biases_[l]; }

  int param_count() const {
    int n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l)
      n += static_cast<int>(weights_[l].size() + biases_[l].size());
    return n;
  }

  Eigen::VectorXd flatten() const {
    Eigen::VectorXd theta(param_count());
    int at = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      const auto& w = weights_[l];
      for (int r = 0; r < w.rows(); ++r)
        for (int c = 0; c < w.cols(); ++c) theta[at++] = w(r, c);
      for (int r = 0; r < biases_[l].size(); ++r) theta[at++] = biases_[l][r];
    }
    return theta;
  }

  void set_params(const Eigen::VectorXd& theta) {
    if (theta.size() != param_count())
      throw std::invalid_argument("ShallowNet::set_params: wrong parameter count");
    int at = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      auto& w = weights_[l];
      for (int r = 0; r < w.rows(); ++r)
        for (int c = 0; c < w.cols(); ++c) w(r, c) = theta[at++];
      for (int r = 0; r < biases_[l].size(); ++r) biases_[l][r] = theta[at++];
    }
  }

  double value(const Eigen::VectorXd& x) const { return eval_with_derivatives(x).value; }

  NetDerivatives eval_with_derivatives(const Eigen::VectorXd& x) const {
    check_input(x);
    NetDerivatives out;
    if (hidden_layer_count() == 1) {
      Trace1 t = trace1(x);
      out.value = t.v.dot(t.s) + c();
      out.gradient = weights_[0].transpose() * (t.v.cwiseProduct(t.s1));
      out.laplacian = t.v.dot(t.s2.cwiseProduct(t.wsq));
    } else {
      Trace2 t = trace2(x);
      out.value = t.v.dot(t.s2v) + c();
      out.gradient = t.z2x.transpose() * (t.v.cwiseProduct(t.s2p));
      out.laplacian = t.v.dot(t.s2pp.cwiseProduct(t.rho) + t.s2p.cwiseProduct(t.q));
    }
    return out;
  }

  /// d(quantity)/d(theta) as a row over the flattened parameters.
  /// `dir` is the direction n for normal_deriv, `axis` the coordinate for
  /// partial (implemented as the derivative along e_axis).
  Eigen::RowVectorXd param_jacobian_row(const Eigen::VectorXd& x, Deriv which,
                                        const Eigen::VectorXd* dir = nullptr,
                                        int axis = -1) const {
    Eigen::RowVectorXd jv(param_count()), jn(param_count()), jl(param_count());
    Eigen::VectorXd n;
    switch (which) {
      case Deriv::value:
        n = Eigen::VectorXd::Zero(input_dim());
        break;
      case Deriv::laplacian:
        n = Eigen::VectorXd::Zero(input_dim());
        break;
      case Deriv::normal_deriv:
        if (!dir) throw std::invalid_argument("param_jacobian_row: missing direction");
        n = *dir;
        break;
      case Deriv::partial:
        if (axis < 0 || axis >= input_dim())
          throw std::invalid_argument("param_jacobian_row: bad axis");
        n = Eigen::VectorXd::Zero(input_dim());
        n[axis] = 1.0;
        break;
    }
    jacobian_rows(x, n, jv, jn, jl);
    if (which == Deriv::value) return jv;
    if (which == Deriv::laplacian) return jl;
    return jn;
  }

  /// All three rows (value, derivative along n, Laplacian) in one pass over a
  /// shared forward trace; this is the hot path of Levenberg-Marquardt
  /// assembly.
  void jacobian_rows(const Eigen::VectorXd& x, const Eigen::VectorXd& n, Eigen::RowVectorXd& jv,
                     Eigen::RowVectorXd& jn, Eigen::RowVectorXd& jl) const {
    check_input(x);
    const int p = param_count();
    jv.resize(p);
    jn.resize(p);
    jl.resize(p);
    if (hidden_layer_count() == 1)
      jacobian_rows1(x, n, jv, jn, jl);
    else
      jacobian_rows2(x, n, jv, jn, jl);
  }

  void save_checkpoint(const std::string& path, const CheckpointMeta& meta) const;
  static std::pair<ShallowNet, CheckpointMeta> load_checkpoint(const std::string& path);

private:
  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;

  double c() const { return biases_.back()[0]; }
  // output weights as a vector
  Eigen::VectorXd vout() const { return weights_.back().transpose().col(0); }

  void validate_sizes() const {
    if (sizes_.size() < 3 || sizes_.size() > 4)
      throw std::invalid_argument("ShallowNet: one or two hidden layers required");
    if (sizes_.front() != 2 && sizes_.front() != 3)
      throw std::invalid_argument("ShallowNet: input dim must be 2 or 3");
    if (sizes_.back() != 1) throw std::invalid_argument("ShallowNet: output dim must be 1");
    for (int s : sizes_)
      if (s < 1) throw std::invalid_argument("ShallowNet: layer sizes must be positive");
  }

  void check_input(const Eigen::VectorXd& x) const {
    if (x.size() != input_dim()) throw std::invalid_argument("ShallowNet: input dim mismatch");
  }

  static void sigmoid_jet(const Eigen::VectorXd& z, Eigen::VectorXd& s, Eigen::VectorXd& d1,
                          Eigen::VectorXd& d2, Eigen::VectorXd& d3) {
    const int n = static_cast<int>(z.size());
    s.resize(n);
    d1.resize(n);
    d2.resize(n);
    d3.resize(n);
    for (int i = 0; i < n; ++i) {
      const double si = 1.0 / (1.0 + std::exp(-z[i]));
      const double p1 = si * (1.0 - si);
      const double p2 = p1 * (1.0 - 2.0 * si);
      s[i] = si;
      d1[i] = p1;
      d2[i] = p2;
      d3[i] = p2 * (1.0 - 2.0 * si) - 2.0 * p1 * p1;
    }
  }

  // ---- one hidden layer ----------------------------------------------------

  struct Trace1 {
    Eigen::VectorXd s, s1, s2, s3;  // sigma and derivatives at z = W0 x + b0
    Eigen::VectorXd wsq;            // squared row norms of W0
    Eigen::VectorXd v;              // output weights
  };

  Trace1 trace1(const Eigen::VectorXd& x) const {
    Trace1 t;
    Eigen::VectorXd z = weights_[0] * x + biases_[0];
    sigmoid_jet(z, t.s, t.s1, t.s2, t.s3);
    t.wsq = weights_[0].rowwise().squaredNorm();
    t.v = vout();
    return t;
  }

  void jacobian_rows1(const Eigen::VectorXd& x, const Eigen::VectorXd& n, Eigen::RowVectorXd& jv,
                      Eigen::RowVectorXd& jn, Eigen::RowVectorXd& jl) const {
    const Trace1 t = trace1(x);
    const auto& w0 = weights_[0];
    const int nh = static_cast<int>(w0.rows());
    const int d = input_dim();
    const Eigen::VectorXd tn = w0 * n;  // w_k . n

    int at = 0;
    for (int k = 0; k < nh; ++k) {
      const double vk = t.v[k];
      for (int i = 0; i < d; ++i) {
        jv[at] = vk * t.s1[k] * x[i];
        jn[at] = vk * (t.s2[k] * tn[k] * x[i] + t.s1[k] * n[i]);
        jl[at] = vk * (t.s3[k] * t.wsq[k] * x[i] + 2.0 * t.s2[k] * w0(k, i));
        ++at;
      }
    }
    for (int k = 0; k < nh; ++k, ++at) {
      jv[at] = t.v[k] * t.s1[k];
      jn[at] = t.v[k] * t.s2[k] * tn[k];
      jl[at] = t.v[k] * t.s3[k] * t.wsq[k];
    }
    for (int k = 0; k < nh; ++k, ++at) {
      jv[at] = t.s[k];
      jn[at] = t.s1[k] * tn[k];
      jl[at] = t.s2[k] * t.wsq[k];
    }
    jv[at] = 1.0;
    jn[at] = 0.0;
    jl[at] = 0.0;
  }

  // ---- two hidden layers ---------------------------------------------------

  struct Trace2 {
    Eigen::VectorXd s1v, s1p, s1pp, s1ppp;  // layer-1 sigma jets
    Eigen::VectorXd s2v, s2p, s2pp, s2ppp;  // layer-2 sigma jets
    Eigen::VectorXd w0sq;                   // squared row norms of W0
    Eigen::MatrixXd z2x;                    // dz2/dx (n2 x d)
    Eigen::VectorXd q;                      // Laplacian of z2 rows
    Eigen::VectorXd rho;                    // squared row norms of z2x
    Eigen::VectorXd v;                      // output weights
  };

  Trace2 trace2(const Eigen::VectorXd& x) const {
    Trace2 t;
    Eigen::VectorXd z1 = weights_[0] * x + biases_[0];
    sigmoid_jet(z1, t.s1v, t.s1p, t.s1pp, t.s1ppp);
    Eigen::VectorXd z2 = weights_[1] * t.s1v + biases_[1];
    sigmoid_jet(z2, t.s2v, t.s2p, t.s2pp, t.s2ppp);
    t.w0sq = weights_[0].rowwise().squaredNorm();
    t.z2x = weights_[1] * (t.s1p.asDiagonal() * weights_[0]);
    t.q = weights_[1] * (t.s1pp.cwiseProduct(t.w0sq));
    t.rho = t.z2x.rowwise().squaredNorm();
    t.v = vout();
    return t;
  }

  void jacobian_rows2(const Eigen::VectorXd& x, const Eigen::VectorXd& n, Eigen::RowVectorXd& jv,
                      Eigen::RowVectorXd& jn, Eigen::RowVectorXd& jl) const {
    const Trace2 t = trace2(x);
    const auto& w0 = weights_[0];
    const auto& w1 = weights_[1];
    const int n1 = static_cast<int>(w0.rows());
    const int n2 = static_cast<int>(w1.rows());
    const int d = input_dim();

    const Eigen::VectorXd t1 = w0 * n;     // w0_k . n
    const Eigen::VectorXd t2 = t.z2x * n;  // dz2_m/dn
    const Eigen::MatrixXd pkm = t.z2x * w0.transpose();  // (n2 x n1): z2x_m . w0_k

    // reductions over the output index m, one coefficient vector per hidden-1
    // unit k
    const Eigen::VectorXd bsum = w1.transpose() * t.v.cwiseProduct(t.s2p).eval();
    const Eigen::VectorXd asum = w1.transpose() * t.v.cwiseProduct(t.s2pp).cwiseProduct(t2).eval();
    const Eigen::VectorXd csum =
        w1.transpose() * t.v.cwiseProduct(t.s2ppp).cwiseProduct(t.rho).eval();
    const Eigen::VectorXd fsum = w1.transpose() * t.v.cwiseProduct(t.s2pp).cwiseProduct(t.q).eval();
    const Eigen::VectorXd u2 = t.v.cwiseProduct(t.s2pp);
    const Eigen::VectorXd dsum = (w1.cwiseProduct(pkm)).transpose() * u2;
    const Eigen::MatrixXd hmat = w1.transpose() * (u2.asDiagonal() * t.z2x);  // (n1 x d)

    int at = 0;
    // W0 and b0
    Eigen::VectorXd db0v(n1), db0n(n1), db0l(n1);
    for (int k = 0; k < n1; ++k) {
      db0v[k] = bsum[k] * t.s1p[k];
      db0n[k] = asum[k] * t.s1p[k] + bsum[k] * t.s1pp[k] * t1[k];
      db0l[k] = (csum[k] + fsum[k]) * t.s1p[k] + 2.0 * dsum[k] * t.s1pp[k] +
                bsum[k] * t.s1ppp[k] * t.w0sq[k];
    }
    for (int k = 0; k < n1; ++k) {
      for (int i = 0; i < d; ++i) {
        jv[at] = db0v[k] * x[i];
        jn[at] = db0n[k] * x[i] + bsum[k] * t.s1p[k] * n[i];
        jl[at] = db0l[k] * x[i] + 2.0 * t.s1p[k] * hmat(k, i) + 2.0 * bsum[k] * t.s1pp[k] * w0(k, i);
        ++at;
      }
    }
    for (int k = 0; k < n1; ++k, ++at) {
      jv[at] = db0v[k];
      jn[at] = db0n[k];
      jl[at] = db0l[k];
    }
    // W1 and b1
    for (int m = 0; m < n2; ++m) {
      const double vm = t.v[m];
      for (int k = 0; k < n1; ++k, ++at) {
        jv[at] = vm * t.s2p[m] * t.s1v[k];
        jn[at] = vm * (t.s2pp[m] * t.s1v[k] * t2[m] + t.s2p[m] * t.s1p[k] * t1[k]);
        jl[at] = vm * (t.s2ppp[m] * t.s1v[k] * t.rho[m] + 2.0 * t.s2pp[m] * t.s1p[k] * pkm(m, k) +
                       t.s2pp[m] * t.s1v[k] * t.q[m] + t.s2p[m] * t.s1pp[k] * t.w0sq[k]);
      }
    }
    for (int m = 0; m < n2; ++m, ++at) {
      jv[at] = t.v[m] * t.s2p[m];
      jn[at] = t.v[m] * t.s2pp[m] * t2[m];
      jl[at] = t.v[m] * (t.s2ppp[m] * t.rho[m] + t.s2pp[m] * t.q[m]);
    }
    // W2 and b2
    for (int m = 0; m < n2; ++m, ++at) {
      jv[at] = t.s2v[m];
      jn[at] = t.s2p[m] * t2[m];
      jl[at] = t.s2pp[m] * t.rho[m] + t.s2p[m] * t.q[m];
    }
    jv[at] = 1.0;
    jn[at] = 0.0;
    jl[at] = 0.0;
  }
};

// ---- checkpoint I/O ---------------------------------------------------------
//
// A checkpoint is a single JSON document:
//   { layer_sizes, activation: "sigmoid", weights (row-major per layer),
//     biases, metadata { seed, final_loss, epochs, case, role, loss_tail } }
// nlohmann serializes doubles with shortest round-trip encoding, so parameters
// reload bit-exactly.

inline void ShallowNet::save_checkpoint(const std::string& path, const CheckpointMeta& meta) const {
  nlohmann::json j;
  j["layer_sizes"] = sizes_;
  j["activation"] = "sigmoid";
  nlohmann::json ws = nlohmann::json::array(), bs = nlohmann::json::array();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    std::vector<double> w(weights_[l].size());
    int at = 0;
    for (int r = 0; r < weights_[l].rows(); ++r)
      for (int c2 = 0; c2 < weights_[l].cols(); ++c2) w[at++] = weights_[l](r, c2);
    ws.push_back(w);
    bs.push_back(std::vector<double>(biases_[l].data(), biases_[l].data() + biases_[l].size()));
  }
  j["weights"] = ws;
  j["biases"] = bs;
  j["metadata"] = {{"seed", meta.seed},   {"final_loss", meta.final_loss},
                   {"epochs", meta.epochs}, {"case", meta.case_id},
                   {"role", meta.role},     {"loss_tail", meta.loss_tail}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  out << j.dump(1) << "\n";
}

inline std::pair<ShallowNet, CheckpointMeta> ShallowNet::load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint: invalid JSON in '" + path + "': " + e.what());
  }
  auto require = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key))
      throw std::runtime_error("checkpoint: missing key '" + std::string(key) + "'");
    return j.at(key);
  };
  const auto& sizes_j = require("layer_sizes");
  if (!sizes_j.is_array()) throw std::runtime_error("checkpoint: invalid key 'layer_sizes'");
  if (require("activation").get<std::string>() != "sigmoid")
    throw std::runtime_error("checkpoint: invalid key 'activation' (expected \"sigmoid\")");
  ShallowNet net(sizes_j.get<std::vector<int>>());
  const auto& ws = require("weights");
  const auto& bs = require("biases");
  if (!ws.is_array() || ws.size() != net.weights_.size())
    throw std::runtime_error("checkpoint: invalid key 'weights' (layer count mismatch)");
  if (!bs.is_array() || bs.size() != net.biases_.size())
    throw std::runtime_error("checkpoint: invalid key 'biases' (layer count mismatch)");
  for (std::size_t l = 0; l < net.weights_.size(); ++l) {
    auto w = ws[l].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != net.weights_[l].size())
      throw std::runtime_error("checkpoint: invalid key 'weights' (layer " + std::to_string(l) +
                               " length does not match layer_sizes)");
    int at = 0;
    for (int r = 0; r < net.weights_[l].rows(); ++r)
      for (int c2 = 0; c2 < net.weights_[l].cols(); ++c2) net.weights_[l](r, c2) = w[at++];
    auto b = bs[l].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(b.size()) != net.biases_[l].size())
      throw std::runtime_error("checkpoint: invalid key 'biases' (layer " + std::to_string(l) +
                               " length does not match layer_sizes)");
    for (std::size_t r = 0; r < b.size(); ++r) net.biases_[l][static_cast<int>(r)] = b[r];
  }
  CheckpointMeta meta;
  if (j.contains("metadata")) {
    const auto& m = j["metadata"];
    meta.seed = m.value("seed", std::uint64_t{0});
    meta.final_loss = m.value("final_loss", 0.0);
    meta.epochs = m.value("epochs", 0);
    meta.case_id = m.value("case", std::string{});
    meta.role = m.value("role", std::string{});
    meta.loss_tail = m.value("loss_tail", std::vector<double>{});
  }
  return {std::move(net), std::move(meta)};
}

}  // namespace nnmac
