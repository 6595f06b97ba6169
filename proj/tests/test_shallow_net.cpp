#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>

#include "nnmac/rng.hpp"
#include "nnmac/shallow_net.hpp"

using namespace nnmac;
using Eigen::VectorXd;

namespace {

// Central finite differences of the network value in space; the independent
// oracle for the analytic gradient and Laplacian.
VectorXd fd_gradient(const ShallowNet& net, const VectorXd& x, double e = 1e-5) {
  VectorXd g(x.size());
  for (int a = 0; a < x.size(); ++a) {
    VectorXd xp = x, xm = x;
    xp[a] += e;
    xm[a] -= e;
    g[a] = (net.value(xp) - net.value(xm)) / (2 * e);
  }
  return g;
}

double fd_laplacian(const ShallowNet& net, const VectorXd& x, double e = 1e-4) {
  double lap = 0.0;
  const double v0 = net.value(x);
  for (int a = 0; a < x.size(); ++a) {
    VectorXd xp = x, xm = x;
    xp[a] += e;
    xm[a] -= e;
    lap += (net.value(xp) - 2 * v0 + net.value(xm)) / (e * e);
  }
  return lap;
}

// d(quantity)/d(theta_t) by central differences in parameter space.
template <class Quantity>
double fd_param_derivative(const ShallowNet& net, const VectorXd& theta, int t, Quantity&& q,
                           double e = 1e-6) {
  ShallowNet n = net;
  VectorXd tp = theta, tm = theta;
  tp[t] += e;
  tm[t] -= e;
  n.set_params(tp);
  const double vp = q(n);
  n.set_params(tm);
  const double vm = q(n);
  return (vp - vm) / (2 * e);
}

ShallowNet random_net(const std::vector<int>& sizes, std::uint64_t seed) {
  ShallowNet net = ShallowNet::init(sizes, seed);
  // randomize biases too so the sigma'' and sigma''' terms are exercised
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  for (int l = 0; l < static_cast<int>(sizes.size()) - 1; ++l)
    for (int r = 0; r < net.bias(l).size(); ++r) net.bias(l)[r] = rng.uniform(-0.5, 0.5);
  return net;
}

TEST(ShallowNet, ParameterCounts) {
  EXPECT_EQ(ShallowNet({2, 50, 1}).param_count(), 201);
  EXPECT_EQ(ShallowNet({3, 100, 1}).param_count(), 501);
  EXPECT_EQ(ShallowNet({3, 30, 30, 1}).param_count(), 3 * 30 + 30 + 30 * 30 + 30 + 30 + 1);
}

TEST(ShallowNet, InitIsDeterministic) {
  const auto a = ShallowNet::init({2, 50, 1}, 42).flatten();
  const auto b = ShallowNet::init({2, 50, 1}, 42).flatten();
  ASSERT_EQ(a.size(), b.size());
  for (int i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  const auto c = ShallowNet::init({2, 50, 1}, 43).flatten();
  EXPECT_NE((a - c).norm(), 0.0);
}

TEST(ShallowNet, InitBoundsAndZeroBiases) {
  const auto net = ShallowNet::init({3, 40, 1}, 5);
  const double bound0 = std::sqrt(1.0 / 3.0), bound1 = std::sqrt(1.0 / 40.0);
  for (int r = 0; r < 40; ++r) {
    for (int c = 0; c < 3; ++c) EXPECT_LE(std::abs(net.weight(0)(r, c)), bound0);
    EXPECT_EQ(net.bias(0)[r], 0.0);
    EXPECT_LE(std::abs(net.weight(1)(0, r)), bound1);
  }
  EXPECT_EQ(net.bias(1)[0], 0.0);
}

TEST(ShallowNet, FlattenRoundTrips) {
  auto net = random_net({2, 13, 7, 1}, 3);
  const VectorXd theta = net.flatten();
  ShallowNet other({2, 13, 7, 1});
  other.set_params(theta);
  const VectorXd back = other.flatten();
  for (int i = 0; i < theta.size(); ++i) EXPECT_EQ(theta[i], back[i]);
}

TEST(ShallowNet, ZeroWeightsGiveConstant) {
  ShallowNet net({2, 10, 1});
  net.bias(1)[0] = 3.25;
  const auto d = net.eval_with_derivatives(Eigen::Vector2d(0.3, -0.7));
  EXPECT_EQ(d.value, 3.25);  // output weights are zero, so hidden units drop out
  EXPECT_EQ(d.gradient.norm(), 0.0);
  EXPECT_EQ(d.laplacian, 0.0);
}

TEST(ShallowNet, SingleUnitClosedForm) {
  // w = (1,0), b = 0, v = 1, c = 0 at x = 0: value 1/2, gradient (1/4, 0),
  // laplacian sigma''(0) = 0
  ShallowNet net({2, 1, 1});
  net.weight(0)(0, 0) = 1.0;
  net.weight(1)(0, 0) = 1.0;
  const auto d = net.eval_with_derivatives(Eigen::Vector2d(0.0, 0.0));
  EXPECT_NEAR(d.value, 0.5, 1e-15);
  EXPECT_NEAR(d.gradient[0], 0.25, 1e-15);
  EXPECT_NEAR(d.gradient[1], 0.0, 1e-15);
  EXPECT_NEAR(d.laplacian, 0.0, 1e-15);
}

TEST(ShallowNet, SpatialDerivativesMatchFiniteDifferences) {
  // 100 random (net, x) pairs across dims and depths
  const std::vector<std::vector<int>> arch = {{2, 17, 1}, {3, 11, 1}, {2, 9, 7, 1}, {3, 8, 6, 1}};
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto& sizes = arch[seed % arch.size()];
    const auto net = random_net(sizes, seed * 37 + 11);
    Rng rng(seed);
    VectorXd x(sizes[0]);
    for (int a = 0; a < x.size(); ++a) x[a] = rng.uniform(-1.5, 1.5);
    const auto d = net.eval_with_derivatives(x);
    const VectorXd gfd = fd_gradient(net, x);
    EXPECT_LE((d.gradient - gfd).norm(), 1e-6 * std::max(1.0, gfd.norm())) << "seed " << seed;
    const double lfd = fd_laplacian(net, x);
    EXPECT_LE(std::abs(d.laplacian - lfd), 1e-5 * std::max(1.0, std::abs(lfd)))
        << "seed " << seed;
  }
}

TEST(ShallowNet, LaplacianEqualsHessianTrace) {
  const auto net = random_net({3, 12, 9, 1}, 77);
  const VectorXd x = Eigen::Vector3d(0.2, -0.4, 0.8);
  const double e = 1e-4;
  double trace = 0.0;
  for (int a = 0; a < 3; ++a) {
    VectorXd xp = x, xm = x;
    xp[a] += e;
    xm[a] -= e;
    trace += (net.value(xp) - 2 * net.value(x) + net.value(xm)) / (e * e);
  }
  EXPECT_LE(std::abs(net.eval_with_derivatives(x).laplacian - trace),
            1e-5 * std::max(1.0, std::abs(trace)));
}

TEST(ShallowNet, ParamJacobiansMatchFiniteDifferences) {
  const std::vector<std::vector<int>> arch = {{2, 7, 1}, {3, 6, 1}, {2, 5, 4, 1}, {3, 4, 5, 1}};
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto& sizes = arch[seed % arch.size()];
    const auto net = random_net(sizes, seed * 101 + 13);
    const VectorXd theta = net.flatten();
    Rng rng(seed + 5);
    VectorXd x(sizes[0]), n(sizes[0]);
    for (int a = 0; a < x.size(); ++a) x[a] = rng.uniform(-1.0, 1.0);
    for (int a = 0; a < n.size(); ++a) n[a] = rng.uniform(-1.0, 1.0);
    n.normalize();

    Eigen::RowVectorXd jv, jn, jl;
    net.jacobian_rows(x, n, jv, jn, jl);

    for (int probe = 0; probe < 10; ++probe) {
      const int t = static_cast<int>(rng.uniform() * theta.size());
      const double fv =
          fd_param_derivative(net, theta, t, [&](const ShallowNet& m) { return m.value(x); });
      EXPECT_LE(std::abs(jv[t] - fv), 1e-6 * std::max(1.0, std::abs(fv))) << "value seed " << seed;
      const double fn = fd_param_derivative(net, theta, t, [&](const ShallowNet& m) {
        return m.eval_with_derivatives(x).gradient.dot(n);
      });
      EXPECT_LE(std::abs(jn[t] - fn), 1e-6 * std::max(1.0, std::abs(fn)))
          << "normal seed " << seed << " param " << t;
      const double fl = fd_param_derivative(net, theta, t, [&](const ShallowNet& m) {
        return m.eval_with_derivatives(x).laplacian;
      });
      EXPECT_LE(std::abs(jl[t] - fl), 1e-6 * std::max(1.0, std::abs(fl)))
          << "laplacian seed " << seed << " param " << t;
    }
  }
}

TEST(ShallowNet, PartialJacobianSelectsAxis) {
  const auto net = random_net({2, 6, 1}, 9);
  const VectorXd x = Eigen::Vector2d(0.4, -0.3);
  const auto row = net.param_jacobian_row(x, ShallowNet::Deriv::partial, nullptr, 1);
  VectorXd e1 = Eigen::Vector2d(0.0, 1.0);
  const auto expect = net.param_jacobian_row(x, ShallowNet::Deriv::normal_deriv, &e1);
  EXPECT_EQ((row - expect).norm(), 0.0);
}

TEST(ShallowNet, ValueJacobianVanishingInputStructure) {
  // at x = 0 the value rows for first-layer W entries vanish
  const auto net = random_net({2, 8, 1}, 21);
  const VectorXd x = Eigen::Vector2d::Zero();
  const auto row = net.param_jacobian_row(x, ShallowNet::Deriv::value);
  for (int k = 0; k < 8; ++k)
    for (int i = 0; i < 2; ++i) EXPECT_EQ(row[k * 2 + i], 0.0);
}

TEST(ShallowNet, TranslationConsistency) {
  // shifting the first-layer bias by W*a equals evaluating at x + a
  const auto net = random_net({2, 14, 1}, 31);
  const Eigen::Vector2d a(0.37, -0.21);
  ShallowNet shifted = net;
  shifted.bias(0) += shifted.weight(0) * a;
  const Eigen::Vector2d x(0.11, 0.59);
  EXPECT_NEAR(net.value(Eigen::Vector2d(x + a)), shifted.value(x), 1e-14);
}

TEST(ShallowNet, CheckpointRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "nnmac_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "net.json").string();
  const auto net = random_net({2, 9, 5, 1}, 4);
  CheckpointMeta meta;
  meta.seed = 4;
  meta.final_loss = 3.5e-11;
  meta.epochs = 123;
  meta.case_id = "ex1";
  meta.role = "U1";
  meta.loss_tail = {1e-9, 5e-10, 3.5e-11};
  net.save_checkpoint(path, meta);

  const auto [loaded, meta2] = ShallowNet::load_checkpoint(path);
  const VectorXd a = net.flatten(), b = loaded.flatten();
  ASSERT_EQ(a.size(), b.size());
  for (int i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);  // bit-exact
  EXPECT_EQ(meta2.seed, meta.seed);
  EXPECT_EQ(meta2.final_loss, meta.final_loss);
  EXPECT_EQ(meta2.epochs, meta.epochs);
  EXPECT_EQ(meta2.case_id, "ex1");
  EXPECT_EQ(meta2.role, "U1");
  EXPECT_EQ(meta2.loss_tail.size(), 3u);
}

TEST(ShallowNet, CheckpointRejectsMalformedFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "nnmac_ckpt_test";
  std::filesystem::create_directories(dir);

  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir / name);
    out << body;
    return (dir / name).string();
  };
  // weight array length inconsistent with layer_sizes
  const auto bad = write("bad.json", R"({
    "layer_sizes": [2, 3, 1], "activation": "sigmoid",
    "weights": [[0.1, 0.2], [0.3, 0.4, 0.5]], "biases": [[0,0,0],[0]]
  })");
  try {
    ShallowNet::load_checkpoint(bad);
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("weights"), std::string::npos);
  }
  const auto missing = write("missing.json", R"({"activation": "sigmoid"})");
  try {
    ShallowNet::load_checkpoint(missing);
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("layer_sizes"), std::string::npos);
  }
  const auto garbled = write("garbled.json", "{not json");
  EXPECT_THROW(ShallowNet::load_checkpoint(garbled), std::runtime_error);
}

}  // namespace
