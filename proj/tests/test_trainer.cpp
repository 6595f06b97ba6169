#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "nnmac/cases.hpp"
#include "nnmac/trainer.hpp"

using namespace nnmac;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

LMConfig quick_config(int max_epochs = 1500) {
  LMConfig cfg;
  cfg.max_epochs = max_epochs;
  cfg.seed = 2;
  return cfg;
}

TEST(LevenbergMarquardt, LinearLeastSquaresConvergesInFewSteps) {
  // r = A theta - b: LM with small damping is damped normal equations
  MatrixXd a(6, 3);
  a << 1, 2, 0, 0, 1, 1, 3, 0, 1, 1, 1, 1, 2, 1, 0, 0, 0, 2;
  VectorXd b(6);
  b << 1, 2, 3, 4, 5, 6;
  auto residual = [&](const VectorXd& th) { return (a * th - b).eval(); };
  auto jacobian = [&](const VectorXd&) { return a; };
  LMConfig cfg;
  cfg.lambda0 = 1e-12;
  cfg.loss_threshold = 0.0;  // run until no improvement is possible
  cfg.max_epochs = 3;
  const auto [theta, rep] =
      levenberg_marquardt(residual, jacobian, VectorXd::Zero(3), 1.0 / 6.0, cfg);
  const VectorXd exact = (a.transpose() * a).ldlt().solve(a.transpose() * b);
  EXPECT_LE((theta - exact).norm(), 1e-9);
}

TEST(LevenbergMarquardt, ScalarQuadraticRoot) {
  // r(theta) = theta^2 - 4 from theta0 = 1 converges to the root 2
  auto residual = [](const VectorXd& th) {
    VectorXd r(1);
    r[0] = th[0] * th[0] - 4.0;
    return r;
  };
  auto jacobian = [](const VectorXd& th) {
    MatrixXd j(1, 1);
    j(0, 0) = 2.0 * th[0];
    return j;
  };
  VectorXd th0(1);
  th0[0] = 1.0;
  const auto [theta, rep] = levenberg_marquardt(residual, jacobian, th0, 1.0, quick_config());
  EXPECT_TRUE(rep.reached_threshold);
  EXPECT_NEAR(theta[0], 2.0, 1e-5);
  EXPECT_LE(rep.final_loss, 1e-10);
}

TEST(LevenbergMarquardt, LossHistoryMonotoneNonIncreasing) {
  auto residual = [](const VectorXd& th) {
    VectorXd r(2);
    r[0] = std::sin(th[0]) + th[1] * th[1] - 0.3;
    r[1] = th[0] * th[1] - 0.12;
    return r;
  };
  auto jacobian = [](const VectorXd& th) {
    MatrixXd j(2, 2);
    j << std::cos(th[0]), 2 * th[1], th[1], th[0];
    return j;
  };
  VectorXd th0(2);
  th0 << 1.5, -2.0;
  const auto [theta, rep] = levenberg_marquardt(residual, jacobian, th0, 0.5, quick_config());
  for (std::size_t i = 1; i < rep.loss_history.size(); ++i)
    EXPECT_LE(rep.loss_history[i], rep.loss_history[i - 1]);
  EXPECT_LT(rep.final_loss, 1e-10);
}

// ---- residual systems ---------------------------------------------------------

ConstraintDataset<2> ex1_dataset(int m, std::uint64_t seed) {
  return build_dataset(case_ex1(), m, seed);
}

TEST(Residuals, DatasetInvariants) {
  const auto data = ex1_dataset(64, 3);
  ASSERT_EQ(data.size(), 64);
  for (int i = 0; i < data.size(); ++i) {
    double dot = 0.0;
    for (int j = 0; j < 2; ++j) dot += data.f_tau(i, j) * data.points[i].normal[j];
    EXPECT_LE(std::abs(dot), 1e-12);
  }
}

TEST(Residuals, ZeroNetZeroForce) {
  auto data = ex1_dataset(16, 5);
  data.f_n.setZero();
  const ShallowNet zero({2, 8, 1});
  const VectorXd r = residuals_P(zero, data);
  EXPECT_EQ(r.norm(), 0.0);
}

TEST(Residuals, PResidualAtThetaZeroIsMinusOne) {
  // F = 2 sin(3t) tau - cos^3(t) n gives F_n(X(0)) = -1, so r = P + F_n = -1
  ConstraintDataset<2> data;
  const auto c = case_ex1();
  data.points = {surface_point<2>(c.shape, 0.0)};
  const Vec<2> f = c.interfacial_force(data.points[0]);
  data.f_n.resize(1);
  data.f_n[0] = f.dot(data.points[0].normal);
  data.f_tau.resize(1, 2);
  data.g_jump.resize(1, 2);
  EXPECT_NEAR(data.f_n[0], -1.0, 1e-15);
  const ShallowNet zero({2, 8, 1});
  EXPECT_NEAR(residuals_P(zero, data)[0], -1.0, 1e-15);
}

TEST(Residuals, ZeroEverythingGivesZeroUResiduals) {
  auto data = ex1_dataset(12, 7);
  data.f_tau.setZero();
  data.g_jump.setZero();
  ShallowNet p_const({2, 4, 1});
  p_const.bias(1)[0] = 2.5;  // constant P has zero gradient
  const ShallowNet zero({2, 6, 1});
  const VectorXd r = residuals_U(zero, data, p_const, 0);
  EXPECT_EQ(r.norm(), 0.0);
}

TEST(Residuals, StackedUJacobianMatchesFiniteDifferences) {
  const auto data = ex1_dataset(5, 11);
  const ShallowNet p_net = ShallowNet::init({2, 6, 1}, 3);
  ShallowNet u_net = ShallowNet::init({2, 5, 1}, 4);
  Rng rng(9);
  for (int r = 0; r < u_net.bias(0).size(); ++r) u_net.bias(0)[r] = rng.uniform(-0.3, 0.3);

  const MatrixXd j = jacobian_U(u_net, data);
  const VectorXd theta = u_net.flatten();
  ShallowNet scratch = u_net;
  const double e = 1e-6;
  for (int t = 0; t < theta.size(); t += 7) {
    VectorXd tp = theta, tm = theta;
    tp[t] += e;
    tm[t] -= e;
    scratch.set_params(tp);
    const VectorXd rp = residuals_U(scratch, data, p_net, 1);
    scratch.set_params(tm);
    const VectorXd rm = residuals_U(scratch, data, p_net, 1);
    const VectorXd fd = (rp - rm) / (2 * e);
    EXPECT_LE((j.col(t) - fd).norm(), 1e-6 * std::max(1.0, fd.norm())) << "param " << t;
  }
}

// ---- end-to-end training -------------------------------------------------------

TEST(Training, Ex1PaperConfigurationReachesThreshold) {
  const auto c = case_ex1();
  NetConfig nets;
  nets.hidden_p = {50};
  nets.hidden_u = {50};
  nets.train_points = 400;
  const auto trained = train_singular_part(c, nets, quick_config(3000));
  for (const auto& rep : trained.reports) {
    EXPECT_TRUE(rep.reached_threshold) << rep.warning;
    EXPECT_LE(rep.final_loss, 1e-10);
  }

  // jump consistency: trained P satisfies P(X) ~ -F_n, i.e. P(X(t)) ~ cos^3 t
  for (double t : {0.0, 0.9, 2.2, 4.0}) {
    const auto p = surface_point<2>(c.shape, t);
    EXPECT_NEAR(trained.field.p_net.value(p.position), std::pow(std::cos(t), 3), 2e-4);
  }

  // max-norm interface residuals obey the sqrt(M * loss) bound
  const auto data = build_dataset(c, nets.train_points, quick_config().seed);
  const VectorXd rp = residuals_P(trained.field.p_net, data);
  EXPECT_LE(rp.cwiseAbs().maxCoeff(),
            std::sqrt(data.size() * trained.reports[0].final_loss) + 1e-12);
  for (int j = 0; j < 2; ++j) {
    const VectorXd ru = residuals_U(trained.field.u_nets[j], data, trained.field.p_net, j);
    EXPECT_LE(ru.cwiseAbs().maxCoeff(),
              std::sqrt(3.0 * data.size() * trained.reports[j + 1].final_loss) + 1e-12);
  }

  // post-training divergence identity on fresh interface samples
  const auto fresh = sample_interface(c.shape, 400, 777);
  double max_div = 0.0, max_u = 0.0;
  for (const auto& p : fresh) {
    double div = 0.0;
    for (int j = 0; j < 2; ++j)
      div += trained.field.u_nets[j].eval_with_derivatives(p.position).gradient[j];
    max_div = std::max(max_div, std::abs(div));
    max_u = std::max(max_u, trained.field.u_s(p.position).norm());
  }
  EXPECT_LE(max_div, 1e-3);
  EXPECT_LE(max_u, 1e-3);

  // generalization: residuals at 10M fresh points stay near the training RMS
  const auto data10 = build_dataset(c, 10 * nets.train_points, 31415);
  const VectorXd rp10 = residuals_P(trained.field.p_net, data10);
  const double train_rms = std::sqrt(trained.reports[0].final_loss);
  EXPECT_LE(rp10.cwiseAbs().maxCoeff(), 100.0 * std::max(train_rms, 1e-12));
}

TEST(Training, HomogeneousConstraintsTrainToZeroField) {
  // F = 0 and smooth g: the zero networks are a global minimum
  CaseDefinition<2> c = case_ex1();
  c.interfacial_force = [](const SurfacePoint<2>&) { return Vec<2>::Zero().eval(); };
  c.g_jump = [](const SurfacePoint<2>&) { return Vec<2>::Zero().eval(); };
  NetConfig nets;
  nets.hidden_p = {10};
  nets.hidden_u = {10};
  nets.train_points = 60;
  const auto trained = train_singular_part(c, nets, quick_config());
  for (const auto& rep : trained.reports) EXPECT_LE(rep.final_loss, 1e-10);
  for (double t : {0.5, 1.5, 3.5}) {
    const auto p = surface_point<2>(c.shape, t);
    EXPECT_LE(std::abs(trained.field.p_net.value(p.position)), 2e-5);
    EXPECT_LE(trained.field.u_s(p.position).norm(), 2e-5);
  }
}

TEST(Training, DeterministicForFixedSeed) {
  const auto c = case_ex1();
  NetConfig nets;
  nets.hidden_p = {12};
  nets.hidden_u = {12};
  nets.train_points = 60;
  const auto a = train_singular_part(c, nets, quick_config(300));
  const auto b = train_singular_part(c, nets, quick_config(300));
  EXPECT_EQ(a.reports[0].final_loss, b.reports[0].final_loss);
  EXPECT_EQ(a.reports[1].final_loss, b.reports[1].final_loss);
  const VectorXd pa = a.field.p_net.flatten(), pb = b.field.p_net.flatten();
  for (int i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i], pb[i]);
}

TEST(Training, UnreachableThresholdWarnsWithoutThrowing) {
  const auto c = case_ex1();
  NetConfig nets;
  nets.hidden_p = {4};
  nets.hidden_u = {4};
  nets.train_points = 40;
  LMConfig cfg = quick_config(3);  // far too few epochs
  const auto trained = train_singular_part(c, nets, cfg);
  EXPECT_FALSE(trained.all_reached_threshold);
  bool warned = false;
  for (const auto& rep : trained.reports) warned = warned || !rep.warning.empty();
  EXPECT_TRUE(warned);
}

}  // namespace
