#include <gtest/gtest.h>

#include <cmath>

#include "nnmac/cases.hpp"
#include "nnmac/singular_field.hpp"
#include "nnmac/trainer.hpp"

using namespace nnmac;

namespace {

// One trained Ex.1 field shared by every test in this file.
const TrainedSingular<2>& trained_ex1() {
  static const TrainedSingular<2> t = [] {
    NetConfig nets;
    nets.hidden_p = {50};
    nets.hidden_u = {50};
    nets.train_points = 400;
    LMConfig cfg;
    cfg.seed = 2;
    return train_singular_part(case_ex1(), nets, cfg);
  }();
  return t;
}

TEST(SingularField, HardZeroOutside) {
  const auto& f = trained_ex1().field;
  for (const Vec<2>& x : {Vec<2>(1.5, 0.0), Vec<2>(-1.2, 0.9), Vec<2>(0.8, 0.7)}) {
    ASSERT_FALSE(f.inside(x));
    EXPECT_EQ(f.p_s(x), 0.0);
    EXPECT_EQ(f.u_s(x).norm(), 0.0);
    EXPECT_EQ(f.grad_p_s(x).norm(), 0.0);
    EXPECT_EQ(f.laplacian_u_s(x).norm(), 0.0);
    EXPECT_EQ(f.div_u_s(x), 0.0);
  }
}

TEST(SingularField, InsideEqualsRawNetworks) {
  const auto& f = trained_ex1().field;
  for (const Vec<2>& x : {Vec<2>(0.0, 0.0), Vec<2>(0.5, -0.3), Vec<2>(-0.7, 0.1)}) {
    ASSERT_TRUE(f.inside(x));
    EXPECT_EQ(f.p_s(x), f.p_net.value(x));
    EXPECT_EQ(f.u_s(x)[0], f.u_nets[0].value(x));
    EXPECT_EQ(f.u_s(x)[1], f.u_nets[1].value(x));
  }
}

TEST(SingularField, NoBlendingAcrossGamma) {
  const auto& f = trained_ex1().field;
  // pointwise gating right at the interface: inner branch at phi <= 0
  const Vec<2> just_in(1.0 - 1e-9, 0.0), just_out(1.0 + 1e-9, 0.0);
  EXPECT_EQ(f.p_s(just_in), f.p_net.value(just_in));
  EXPECT_EQ(f.p_s(just_out), 0.0);
  const Vec<2> on_gamma(1.0, 0.0);
  EXPECT_EQ(f.p_s(on_gamma), f.p_net.value(on_gamma));  // phi = 0 maps to Omega-
}

TEST(SingularField, DerivativesMatchFiniteDifferencesInside) {
  const auto& f = trained_ex1().field;
  const double e = 1e-5;
  for (const Vec<2>& x : {Vec<2>(0.3, 0.2), Vec<2>(-0.4, -0.5), Vec<2>(0.1, 0.6)}) {
    Vec<2> fd_grad;
    for (int a = 0; a < 2; ++a) {
      Vec<2> xp = x, xm = x;
      xp[a] += e;
      xm[a] -= e;
      fd_grad[a] = (f.p_s(xp) - f.p_s(xm)) / (2 * e);
    }
    EXPECT_LE((f.grad_p_s(x) - fd_grad).norm(), 1e-6 * std::max(1.0, fd_grad.norm()));

    double fd_div = 0.0;
    for (int a = 0; a < 2; ++a) {
      Vec<2> xp = x, xm = x;
      xp[a] += e;
      xm[a] -= e;
      fd_div += (f.u_s(xp)[a] - f.u_s(xm)[a]) / (2 * e);
    }
    EXPECT_LE(std::abs(f.div_u_s(x) - fd_div), 1e-6 * std::max(1.0, std::abs(fd_div)));
  }
}

TEST(SingularField, PressureJumpRecoversNormalForce) {
  // [[p_s]] = (outer limit 0) - (inner limit P(X)) = F_n(X) = -cos^3(theta)
  // within trained tolerance; the inner limit is the raw network value by
  // continuity.
  const auto& t = trained_ex1();
  const double tol = std::sqrt(400.0 * t.reports[0].final_loss) + 1e-6;
  for (double th : {0.0, 0.7, 1.9, 3.3, 5.1}) {
    const auto p = surface_point<2>(case_ex1().shape, th);
    EXPECT_NEAR(-t.field.p_net.value(p.position), -std::pow(std::cos(th), 3), 10 * tol);
  }
}

TEST(SingularField, VelocityContinuityAndShearJump) {
  const auto& t = trained_ex1();
  const auto c = case_ex1();
  const auto pts = sample_interface(c.shape, 200, 9090);
  const double loss_u = std::max(t.reports[1].final_loss, t.reports[2].final_loss);
  const double cont_tol = std::sqrt(3.0 * 400.0 * loss_u) * 10 + 1e-8;
  for (const auto& p : pts) {
    // u_s continuous across Gamma: the inner branch vanishes on Gamma
    EXPECT_LE(t.field.u_s(p.position).norm(), cont_tol);
    // mu [[du_s/dn]] = mu(0 - dU/dn) = -F_tau
    const Vec<2> f = c.interfacial_force(p);
    const Vec<2> f_tau = f - f.dot(p.normal) * p.normal;
    for (int j = 0; j < 2; ++j) {
      const auto d = t.field.u_nets[j].eval_with_derivatives(p.position);
      const double dun = d.gradient.dot(p.normal);
      EXPECT_NEAR(t.field.mu * (0.0 - dun), -f_tau[j], 50 * cont_tol);
    }
  }
}

TEST(SingularField, MomentumConstraintOnGamma) {
  // third constraint: -grad P + mu lap U = [[g]] on Gamma, within tolerance
  const auto& t = trained_ex1();
  const auto c = case_ex1();
  for (double th : {0.4, 1.3, 2.6, 4.4}) {
    const auto p = surface_point<2>(c.shape, th);
    const Vec<2> gj = c.g_jump(p);
    const Vec<2> gp = t.field.p_net.eval_with_derivatives(p.position).gradient;
    for (int j = 0; j < 2; ++j) {
      const double lap = t.field.u_nets[j].eval_with_derivatives(p.position).laplacian;
      EXPECT_NEAR(-gp[j] + t.field.mu * lap, gj[j], 1e-3);
    }
  }
}

TEST(SingularField, BatchSampleMatchesPointwise) {
  const auto& f = trained_ex1().field;
  const std::vector<Vec<2>> pts = {Vec<2>(0.2, 0.1), Vec<2>(1.4, 1.4), Vec<2>(-0.6, 0.2)};
  int i = 0;
  f.sample_each(pts, [&](const SingularField<2>::Sample& s) {
    EXPECT_EQ(s.inside, f.inside(pts[i]));
    EXPECT_EQ(s.p, f.p_s(pts[i]));
    EXPECT_EQ(s.div_u, f.div_u_s(pts[i]));
    ++i;
  });
  EXPECT_EQ(i, 3);
}

}  // namespace
