#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <string>
#include <utility>
#include <vector>

#include "nnmac/cases.hpp"
#include "nnmac/geometry.hpp"
#include "nnmac/shallow_net.hpp"
#include "nnmac/singular_field.hpp"

namespace nnmac {

/// Interface training data: M surface points with the decomposed force and
/// the body-force jump. F_tau(X).n(X) = 0 at every point.
template <int D>
struct ConstraintDataset {
  std::vector<SurfacePoint<D>> points;
  Eigen::VectorXd f_n;                               // M
  Eigen::Matrix<double, Eigen::Dynamic, D> f_tau;    // M x D
  Eigen::Matrix<double, Eigen::Dynamic, D> g_jump;   // M x D
  double mu = 1.0;

  int size() const { return static_cast<int>(points.size()); }
};

template <int D>
ConstraintDataset<D> build_dataset(const CaseDefinition<D>& c, int m, std::uint64_t seed) {
  ConstraintDataset<D> d;
  d.points = sample_interface(c.shape, m, seed);
  d.mu = c.mu;
  d.f_n.resize(m);
  d.f_tau.resize(m, D);
  d.g_jump.resize(m, D);
  for (int i = 0; i < m; ++i) {
    const auto& p = d.points[i];
    const Vec<D> f = c.interfacial_force(p);
    d.f_n[i] = f.dot(p.normal);
    const Vec<D> tau = f - d.f_n[i] * p.normal;
    const Vec<D> gj = c.g_jump(p);
    for (int j = 0; j < D; ++j) {
      d.f_tau(i, j) = tau[j];
      d.g_jump(i, j) = gj[j];
    }
  }
  return d;
}

struct LMConfig {
  double loss_threshold = 1e-10;
  int max_epochs = 3000;
  double lambda0 = 1e-3;
  double lambda_up = 2.0;    // rejection multiplier (doubles on consecutive rejections)
  double lambda_down = 3.0;  // fastest per-step decrease is 1/lambda_down
  std::uint64_t seed = 1;
  // Step-control variants. The accelerated scheme (all three on) is required
  // for the velocity systems, whose valleys stall plain LM; the conservative
  // scheme (all off, factors 10/10) is used for P, where the slow damped path
  // lands on a smoother network and that smoothness is what makes the
  // downstream velocity systems trainable.
  bool diag_damping = true;
  bool gain_ratio = true;
  bool geodesic = true;
};

inline LMConfig conservative_lm(LMConfig cfg) {
  cfg.diag_damping = false;
  cfg.gain_ratio = false;
  cfg.geodesic = false;
  cfg.lambda_up = 10.0;
  cfg.lambda_down = 10.0;
  return cfg;
}

struct TrainingReport {
  double final_loss = 0.0;
  int epochs = 0;
  double wall_time_s = 0.0;
  std::vector<double> loss_history;  // retained loss after each epoch
  bool reached_threshold = false;
  std::string warning;
};

/// Damped Gauss-Newton iteration on loss = loss_scale * ||r(theta)||^2.
/// Each epoch solves (J^T J + lambda D) delta = -J^T r with D = diag(J^T J)
/// (Marquardt's scale-invariant damping), adds the geodesic-acceleration
/// half-step (second directional derivative of r along delta, by one extra
/// residual evaluation), and accepts the step iff the loss decreases. lambda
/// follows the gain-ratio schedule: shrink by 1 - (2 rho - 1)^3 (at most
/// 1/lambda_down) on acceptance, grow by a doubling multiplier on rejection.
/// Stops at loss <= threshold or the epoch cap; accepted and rejected trials
/// both count as epochs. J^T J and J^T r are reused across rejected trials.
template <class ResidualFn, class JacobianFn>
std::pair<Eigen::VectorXd, TrainingReport> levenberg_marquardt(ResidualFn&& residual,
                                                               JacobianFn&& jacobian,
                                                               Eigen::VectorXd theta,
                                                               double loss_scale,
                                                               const LMConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainingReport rep;

  Eigen::VectorXd r = residual(theta);
  double loss = loss_scale * r.squaredNorm();
  double lambda = cfg.lambda0;
  double reject_factor = cfg.lambda_up;

  const int p = static_cast<int>(theta.size());
  Eigen::MatrixXd j, jtj;
  Eigen::VectorXd jtr(p);
  bool have_normal_eqs = false;

  for (int epoch = 0; epoch < cfg.max_epochs && loss > cfg.loss_threshold; ++epoch) {
    if (!have_normal_eqs) {
      j = jacobian(theta);
      jtj.setZero(p, p);
      jtj.template selfadjointView<Eigen::Lower>().rankUpdate(j.transpose());
      jtj.template triangularView<Eigen::StrictlyUpper>() = jtj.transpose();
      jtr.noalias() = j.transpose() * r;
      have_normal_eqs = true;
    }

    const Eigen::VectorXd damping =
        cfg.diag_damping ? (lambda * jtj.diagonal().cwiseMax(1e-12)).eval()
                         : Eigen::VectorXd::Constant(p, lambda).eval();
    Eigen::MatrixXd damped = jtj;
    damped.diagonal() += damping;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
    Eigen::VectorXd velocity;
    bool solved = ldlt.info() == Eigen::Success;
    if (solved) {
      velocity = ldlt.solve(-jtr);
      solved = velocity.allFinite();
    }

    bool accepted = false;
    if (solved) {
      Eigen::VectorXd step = velocity;
      if (cfg.geodesic) {
        // geodesic acceleration: r'' along the step by forward difference
        constexpr double fd_h = 0.1;
        const Eigen::VectorXd r_half = residual(theta + fd_h * velocity);
        const Eigen::VectorXd curv = (2.0 / fd_h) * ((r_half - r) / fd_h - j * velocity);
        Eigen::VectorXd accel = ldlt.solve(-0.5 * (j.transpose() * curv));
        if (accel.allFinite() && 2.0 * accel.norm() <= 0.75 * velocity.norm()) step += accel;
      }

      const Eigen::VectorXd trial = theta + step;
      const Eigen::VectorXd r_trial = residual(trial);
      const double loss_trial = loss_scale * r_trial.squaredNorm();
      if (std::isfinite(loss_trial) && loss_trial < loss) {
        double shrink = 1.0 / cfg.lambda_down;
        if (cfg.gain_ratio) {
          const double predicted = 0.5 * velocity.dot(damping.cwiseProduct(velocity) - jtr);
          const double actual = 0.5 * (r.squaredNorm() - r_trial.squaredNorm());
          const double rho = actual / std::max(predicted, 1e-300);
          shrink = std::max(shrink, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        }
        theta = trial;
        r = r_trial;
        loss = loss_trial;
        lambda = std::max(lambda * shrink, 1e-14);
        reject_factor = cfg.lambda_up;
        have_normal_eqs = false;
        accepted = true;
      }
    }
    if (!accepted) {
      lambda *= reject_factor;
      if (cfg.gain_ratio) reject_factor *= 2.0;
      if (lambda > 1e14) {
        rep.warning = "levenberg_marquardt: normal-equations step failed at lambda > 1e14; "
                      "stopping at loss " + std::to_string(loss);
        rep.loss_history.push_back(loss);
        rep.epochs = epoch + 1;
        break;
      }
    }
    rep.loss_history.push_back(loss);
    rep.epochs = epoch + 1;
  }

  rep.final_loss = loss;
  rep.reached_threshold = loss <= cfg.loss_threshold;
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(theta), std::move(rep)};
}

// ---- residual systems of the interface constraints ---------------------------

/// r_i = P(X^i) + F_n(X^i); Loss_P = mean of squares.
template <int D>
Eigen::VectorXd residuals_P(const ShallowNet& p_net, const ConstraintDataset<D>& data) {
  const int m = data.size();
  Eigen::VectorXd r(m);
  for (int i = 0; i < m; ++i) r[i] = p_net.value(data.points[i].position) + data.f_n[i];
  return r;
}

template <int D>
Eigen::MatrixXd jacobian_P(const ShallowNet& p_net, const ConstraintDataset<D>& data) {
  const int m = data.size();
  Eigen::MatrixXd j(m, p_net.param_count());
  Eigen::RowVectorXd jv, jn, jl;
  const Eigen::VectorXd zero_dir = Eigen::VectorXd::Zero(D);
  for (int i = 0; i < m; ++i) {
    p_net.jacobian_rows(data.points[i].position, zero_dir, jv, jn, jl);
    j.row(i) = jv;
  }
  return j;
}

/// Stacked residuals for one velocity component (3M entries, family blocks):
///   (a) U_j(X^i)
///   (b) mu dU_j/dn(X^i) - F_tau_j(X^i)
///   (c) -dP/dx_j(X^i) + mu lap U_j(X^i) - [[g_j(X^i)]]
/// with the trained P frozen (its contribution enters as constants).
template <int D>
Eigen::VectorXd residuals_U(const ShallowNet& u_net, const ConstraintDataset<D>& data,
                            const ShallowNet& trained_p, int j) {
  const int m = data.size();
  Eigen::VectorXd r(3 * m);
  for (int i = 0; i < m; ++i) {
    const auto& pt = data.points[i];
    const auto du = u_net.eval_with_derivatives(pt.position);
    const double dp_j = trained_p.eval_with_derivatives(pt.position).gradient[j];
    r[i] = du.value;
    r[m + i] = data.mu * du.gradient.dot(pt.normal) - data.f_tau(i, j);
    r[2 * m + i] = -dp_j + data.mu * du.laplacian - data.g_jump(i, j);
  }
  return r;
}

template <int D>
Eigen::MatrixXd jacobian_U(const ShallowNet& u_net, const ConstraintDataset<D>& data) {
  const int m = data.size();
  Eigen::MatrixXd j(3 * m, u_net.param_count());
  Eigen::RowVectorXd jv, jn, jl;
  for (int i = 0; i < m; ++i) {
    u_net.jacobian_rows(data.points[i].position, data.points[i].normal, jv, jn, jl);
    j.row(i) = jv;
    j.row(m + i) = data.mu * jn;
    j.row(2 * m + i) = data.mu * jl;
  }
  return j;
}

// ---- full singular-part training ---------------------------------------------

struct NetConfig {
  std::vector<int> hidden_p{50};
  std::vector<int> hidden_u{50};
  int train_points = 400;
};

namespace detail {

/// Deterministic scan points filling Omega- (scaled radial shells of the
/// interface), used to score how wild a trained network's extension is away
/// from the training manifold.
template <int D>
std::vector<Vec<D>> interior_scan_points(const InterfaceShape<D>& shape) {
  std::vector<Vec<D>> pts;
  if constexpr (D == 2) {
    for (int ir = 1; ir <= 24; ++ir)
      for (int it = 0; it < 96; ++it) {
        const double rho = ir / 25.0;
        const double th = 2.0 * std::numbers::pi * it / 96.0;
        pts.push_back(shape.center + Vec<2>(rho * shape.semi_axes[0] * std::cos(th),
                                            rho * shape.semi_axes[1] * std::sin(th)));
      }
  } else {
    for (int ir = 1; ir <= 10; ++ir)
      for (int it = 0; it < 24; ++it)
        for (int ip = 0; ip < 12; ++ip) {
          const double rho = ir / 11.0;
          const double th = 2.0 * std::numbers::pi * it / 24.0;
          const double ph = std::numbers::pi * (ip + 0.5) / 12.0 - std::numbers::pi / 2.0;
          pts.push_back(shape.center +
                        Vec<3>(rho * shape.semi_axes[0] * std::cos(ph) * std::cos(th),
                               rho * shape.semi_axes[1] * std::cos(ph) * std::sin(th),
                               rho * shape.semi_axes[2] * std::sin(ph)));
        }
  }
  return pts;
}

/// Max |laplacian| of the network over the scan points. The composed solution
/// subtracts the network inside Omega-, so a wild extension inflates the
/// truncation constant of the regular solve even though the interface fit is
/// perfect; candidates are ranked by this bound relative to the constraint
/// scale.
template <int D>
double interior_laplacian_bound(const ShallowNet& net, const std::vector<Vec<D>>& pts) {
  double m = 0.0;
  for (const auto& x : pts) m = std::max(m, std::abs(net.eval_with_derivatives(x).laplacian));
  return m;
}

}  // namespace detail

template <int D>
struct TrainedSingular {
  SingularField<D> field;
  std::array<TrainingReport, D + 1> reports;  // P first, then U_1..U_D
  bool all_reached_threshold = false;
};

/// P is trained with the conservative schedule by default: the slow damped
/// path lands on smoother networks, and the smoothness of P is what keeps the
/// downstream velocity systems trainable and the grid-error constants small.
/// `conservative = false` switches to the accelerated scheme (used as a ladder
/// fallback when the conservative path stalls above the threshold).
template <int D>
std::pair<ShallowNet, TrainingReport> train_p_net(const ConstraintDataset<D>& data,
                                                  const std::vector<int>& hidden,
                                                  std::uint64_t init_seed, const LMConfig& cfg,
                                                  bool conservative = true) {
  std::vector<int> sizes{D};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  ShallowNet net = ShallowNet::init(sizes, init_seed);
  ShallowNet scratch = net;
  auto residual = [&](const Eigen::VectorXd& th) {
    scratch.set_params(th);
    return residuals_P(scratch, data);
  };
  auto jac = [&](const Eigen::VectorXd& th) {
    scratch.set_params(th);
    return jacobian_P(scratch, data);
  };
  auto [theta, rep] = levenberg_marquardt(residual, jac, net.flatten(), 1.0 / data.size(),
                                          conservative ? conservative_lm(cfg) : cfg);
  net.set_params(theta);
  return {std::move(net), std::move(rep)};
}

template <int D>
std::pair<ShallowNet, TrainingReport> train_u_net(const ConstraintDataset<D>& data,
                                                  const ShallowNet& trained_p, int component,
                                                  const std::vector<int>& hidden,
                                                  std::uint64_t init_seed, const LMConfig& cfg) {
  std::vector<int> sizes{D};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  ShallowNet net = ShallowNet::init(sizes, init_seed);
  ShallowNet scratch = net;
  auto residual = [&](const Eigen::VectorXd& th) {
    scratch.set_params(th);
    return residuals_U(scratch, data, trained_p, component);
  };
  auto jac = [&](const Eigen::VectorXd& th) {
    scratch.set_params(th);
    return jacobian_U(scratch, data);
  };
  auto [theta, rep] =
      levenberg_marquardt(residual, jac, net.flatten(), 1.0 / data.size(), cfg);
  net.set_params(theta);
  return {std::move(net), std::move(rep)};
}

/// Trains P first, then the D velocity components independently (they are
/// decoupled once P is frozen, so they run in parallel).
///
/// Per component, up to `max_attempts` deterministic initializations
/// (seed, seed + 100, seed + 200, ...) are trained. Candidates are ranked by
/// (reached threshold, interior tameness): among admissible networks the one
/// with the smallest interior Laplacian bound wins, and a candidate below the
/// tameness limit stops the ladder early. Components that miss the loss
/// threshold carry a non-fatal warning. Reported wall time accumulates over
/// attempts.
template <int D>
TrainedSingular<D> train_singular_part(const CaseDefinition<D>& c, const NetConfig& nets,
                                       const LMConfig& cfg) {
  constexpr int max_attempts = 4;
  // Interior |lap| relative to the constraint scale; the admissible roughness
  // grows with the interface's curvature scale 1/min(semi_axes)^2, since the
  // Laplacian data the network must match on Gamma varies on that scale.
  const double min_axis = c.shape.semi_axes.minCoeff();
  const double tame_limit = 8.0 / (min_axis * min_axis);
  const ConstraintDataset<D> data = build_dataset(c, nets.train_points, cfg.seed);
  const std::vector<Vec<D>> scan = detail::interior_scan_points(c.shape);
  TrainedSingular<D> out;
  out.field.shape = c.shape;
  out.field.mu = c.mu;

  auto with_retries = [&](auto&& train_once, std::uint64_t base_seed, double constraint_scale)
      -> std::pair<ShallowNet, TrainingReport> {
    ShallowNet best_net;
    TrainingReport best_rep;
    double best_wild = std::numeric_limits<double>::max();
    double elapsed = 0.0;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
      auto [net, rep] = train_once(base_seed + 100 * attempt);
      elapsed += rep.wall_time_s;
      const double wild =
          detail::interior_laplacian_bound(net, scan) / std::max(constraint_scale, 1.0);
      const bool better = attempt == 0 ||
                          (rep.reached_threshold && !best_rep.reached_threshold) ||
                          (rep.reached_threshold == best_rep.reached_threshold &&
                           (best_rep.reached_threshold ? wild < best_wild
                                                       : rep.final_loss < best_rep.final_loss));
      if (better) {
        best_net = std::move(net);
        best_rep = std::move(rep);
        best_wild = wild;
      }
      if (best_rep.reached_threshold && best_wild <= tame_limit) break;
    }
    best_rep.wall_time_s = elapsed;
    if (best_rep.reached_threshold && best_wild > tame_limit)
      best_rep.warning = "interior extension is rough (relative Laplacian bound " +
                         std::to_string(best_wild) + "); grid-error constants may inflate";
    return {std::move(best_net), std::move(best_rep)};
  };

  const double p_scale = data.f_n.cwiseAbs().maxCoeff();
  int p_attempt = 0;
  auto [p_net, p_rep] = with_retries(
      [&](std::uint64_t s) {
        // first half of the ladder conservative, second half accelerated
        return train_p_net(data, nets.hidden_p, s, cfg, p_attempt++ < max_attempts / 2);
      },
      cfg.seed + 1, p_scale);
  out.field.p_net = std::move(p_net);
  out.reports[0] = std::move(p_rep);

  std::array<std::future<std::pair<ShallowNet, TrainingReport>>, D> futures;
  for (int j = 0; j < D; ++j) {
    futures[j] = std::async(std::launch::async, [&, j] {
      // scale of the Laplacian constraint family for this component
      double scale = 0.0;
      for (int i = 0; i < data.size(); ++i) {
        const double dp_j =
            out.field.p_net.eval_with_derivatives(data.points[i].position).gradient[j];
        scale = std::max(scale, std::abs((dp_j + data.g_jump(i, j)) / data.mu));
      }
      return with_retries(
          [&](std::uint64_t s) {
            return train_u_net(data, out.field.p_net, j, nets.hidden_u, s, cfg);
          },
          cfg.seed + 2 + j, scale);
    });
  }
  out.all_reached_threshold = out.reports[0].reached_threshold;
  for (int j = 0; j < D; ++j) {
    auto [u_net, u_rep] = futures[j].get();
    out.field.u_nets[j] = std::move(u_net);
    out.reports[j + 1] = std::move(u_rep);
    out.all_reached_threshold = out.all_reached_threshold && out.reports[j + 1].reached_threshold;
  }
  for (auto& rep : out.reports) {
    if (!rep.reached_threshold && rep.warning.empty())
      rep.warning = "training stopped at loss " + std::to_string(rep.final_loss) +
                    " without reaching the threshold";
  }
  return out;
}

}  // namespace nnmac
