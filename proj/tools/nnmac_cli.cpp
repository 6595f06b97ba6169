// Command-line driver: train singular-part networks, run single solves,
// mesh-refinement studies, cross-section and quiver extracts. Emits CSV only.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "nnmac/cases.hpp"
#include "nnmac/refine.hpp"
#include "nnmac/trainer.hpp"

namespace fs = std::filesystem;
using namespace nnmac;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitThreshold = 3;
constexpr int kExitSolver = 4;

struct CaseDefaults {
  std::vector<int> grids;
  int p_neurons;
  int u_neurons;
  int u_layers;
  int points;
  std::uint64_t seed;
  double threshold;
};

CaseDefaults defaults_for(const std::string& id) {
  if (id == "ex1") return {{32, 64, 128, 256}, 50, 50, 1, 400, 2, 1e-10};
  if (id == "ex2") return {{32, 64, 128, 256}, 50, 50, 1, 400, 6, 1e-11};
  if (id == "ex3") return {{16, 32, 64}, 50, 100, 1, 1000, 2, 1e-10};
  if (id == "ex4") return {{32, 64}, 100, 30, 2, 1000, 2, 1e-10};
  throw CLI::ValidationError("--case", "unknown case '" + id + "'");
}

struct Options {
  std::string case_id;
  int grid = 0;
  std::vector<int> grids;
  int u_neurons = 0;
  int p_neurons = 0;
  int layers = 0;
  int points = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double threshold = 0.0;
  int max_epochs = 3000;
  std::string out_dir;
  std::string checkpoint_dir;
  bool retrain = false;
  // slice/quiver/reference extras
  std::string var = "u1";
  std::string line;
  std::string plane = "y=h/2";
  int nodes = 256;
};

std::string default_out_root() {
  if (const char* env = std::getenv("NNMAC_OUT")) return env;
  return "out";
}

void resolve(Options& o) {
  const CaseDefaults d = defaults_for(o.case_id);
  if (o.grids.empty()) o.grids = d.grids;
  if (o.grid == 0) o.grid = o.grids.back();
  if (o.u_neurons == 0) o.u_neurons = d.u_neurons;
  if (o.p_neurons == 0) o.p_neurons = d.p_neurons;
  if (o.layers == 0) o.layers = d.u_layers;
  if (o.points == 0) o.points = d.points;
  if (!o.seed_set) o.seed = d.seed;
  if (o.threshold == 0.0) o.threshold = d.threshold;
  if (o.out_dir.empty()) o.out_dir = default_out_root();
  if (o.checkpoint_dir.empty()) o.checkpoint_dir = (fs::path(o.out_dir) / "checkpoints").string();
}

NetConfig net_config(const Options& o) {
  NetConfig nets;
  nets.hidden_p = {o.p_neurons};
  nets.hidden_u.assign(o.layers, o.u_neurons);
  nets.train_points = o.points;
  return nets;
}

LMConfig lm_config(const Options& o) {
  LMConfig cfg;
  cfg.seed = o.seed;
  cfg.loss_threshold = o.threshold;
  cfg.max_epochs = o.max_epochs;
  return cfg;
}

// fixed formatting so repeated runs produce byte-identical files
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    write_row(header);
  }
  void write_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

private:
  std::ofstream out_;
};

std::string role_name(int index) { return index == 0 ? "P" : "U" + std::to_string(index); }

template <int D>
CaseDefinition<D> make_case(const std::string& id);
template <>
CaseDefinition<2> make_case<2>(const std::string& id) {
  return id == "ex1" ? case_ex1() : case_ex2();
}
template <>
CaseDefinition<3> make_case<3>(const std::string& id) {
  return id == "ex3" ? case_ex3() : case_ex4();
}

fs::path checkpoint_path(const Options& o, int index) {
  return fs::path(o.checkpoint_dir) / (o.case_id + "_" + role_name(index) + ".json");
}

/// Per-network training table in the layout of the paper's training tables.
template <int D>
void write_training_csv(const Options& o, const TrainedSingular<D>& tr) {
  fs::create_directories(o.out_dir);
  CsvWriter csv(fs::path(o.out_dir) / (o.case_id + "_training.csv"),
                {"component", "time_s", "final_loss", "epochs"});
  for (int i = 0; i < D + 1; ++i)
    csv.write_row({role_name(i), fmt(tr.reports[i].wall_time_s), fmt(tr.reports[i].final_loss),
                   std::to_string(tr.reports[i].epochs)});
}

template <int D>
TrainedSingular<D> train_case(const Options& o, const CaseDefinition<D>& c) {
  const auto tr = train_singular_part(c, net_config(o), lm_config(o));
  fs::create_directories(o.checkpoint_dir);
  for (int i = 0; i < D + 1; ++i) {
    CheckpointMeta meta;
    meta.seed = o.seed;
    meta.final_loss = tr.reports[i].final_loss;
    meta.epochs = tr.reports[i].epochs;
    meta.case_id = o.case_id;
    meta.role = role_name(i);
    const auto& hist = tr.reports[i].loss_history;
    const std::size_t tail = std::min<std::size_t>(hist.size(), 10);
    meta.loss_tail.assign(hist.end() - tail, hist.end());
    const ShallowNet& net = i == 0 ? tr.field.p_net : tr.field.u_nets[i - 1];
    net.save_checkpoint(checkpoint_path(o, i).string(), meta);
  }
  write_training_csv(o, tr);
  for (int i = 0; i < D + 1; ++i)
    if (!tr.reports[i].warning.empty())
      std::cerr << "warning (" << role_name(i) << "): " << tr.reports[i].warning << "\n";
  return tr;
}

/// Loads checkpoints when all are present, otherwise trains and saves them.
template <int D>
SingularField<D> load_or_train(const Options& o, const CaseDefinition<D>& c, bool* trained_ok) {
  bool all_present = !o.retrain;
  for (int i = 0; i < D + 1 && all_present; ++i) all_present = fs::exists(checkpoint_path(o, i));
  if (all_present) {
    SingularField<D> f;
    f.shape = c.shape;
    f.mu = c.mu;
    for (int i = 0; i < D + 1; ++i) {
      auto [net, meta] = ShallowNet::load_checkpoint(checkpoint_path(o, i).string());
      if (i == 0)
        f.p_net = std::move(net);
      else
        f.u_nets[i - 1] = std::move(net);
      if (meta.final_loss > o.threshold && trained_ok) *trained_ok = false;
    }
    return f;
  }
  const auto tr = train_case(o, c);
  if (trained_ok) *trained_ok = tr.all_reached_threshold;
  return tr.field;
}

template <int D>
void write_fields_csv(const Options& o, const CaseSolution<D>& sol) {
  fs::create_directories(o.out_dir);
  std::vector<std::string> header = {"component", "i", "j"};
  if constexpr (D == 3) header.push_back("k");
  header.push_back("x");
  header.push_back("y");
  if constexpr (D == 3) header.push_back("z");
  header.push_back("value");
  CsvWriter csv(
      fs::path(o.out_dir) / (o.case_id + "_N" + std::to_string(sol.grid.n) + "_fields.csv"),
      header);
  auto emit = [&](const std::string& name, const NdArray<D>& a, int component) {
    a.for_each_index([&](const std::array<int, D>& idx) {
      const Vec<D> x =
          component < 0 ? sol.grid.cell_center(idx) : sol.grid.face_position(component, idx);
      std::vector<std::string> row = {name};
      for (int axis = 0; axis < D; ++axis) row.push_back(std::to_string(idx[axis]));
      for (int axis = 0; axis < D; ++axis) row.push_back(fmt(x[axis]));
      row.push_back(fmt(a[idx]));
      csv.write_row(row);
    });
  };
  for (int k = 0; k < D; ++k) emit("u" + std::to_string(k + 1), sol.composed.u[k], k);
  emit("p", sol.composed.p, -1);
}

template <int D>
void write_summary_csv(const Options& o, const CaseSolution<D>& sol) {
  CsvWriter csv(
      fs::path(o.out_dir) / (o.case_id + "_N" + std::to_string(sol.grid.n) + "_summary.csv"),
      {"cg_iterations", "final_residual", "poisson_solve_count", "converged"});
  csv.write_row({std::to_string(sol.report.cg_iterations), fmt(sol.report.final_residual),
                 std::to_string(sol.report.poisson_solve_count),
                 sol.report.converged ? "1" : "0"});
}

template <int D>
int cmd_solve_impl(const Options& o) {
  const auto c = make_case<D>(o.case_id);
  bool ok = true;
  const auto field = load_or_train<D>(o, c, &ok);
  const auto sol = solve_case(c, field, o.grid);
  write_fields_csv(o, sol);
  write_summary_csv(o, sol);
  if (!sol.report.converged) {
    std::cerr << "solver failed: CG residual " << sol.report.final_residual << " after "
              << sol.report.cg_iterations << " iterations\n";
    return kExitSolver;
  }
  std::cout << "solved " << o.case_id << " at N=" << o.grid << " (cg=" << sol.report.cg_iterations
            << ", poisson solves=" << sol.report.poisson_solve_count << ")\n";
  return ok ? 0 : kExitThreshold;
}

template <int D>
int cmd_convergence_impl(const Options& o) {
  const auto c = make_case<D>(o.case_id);
  bool ok = true;
  const auto field = load_or_train<D>(o, c, &ok);
  const bool exact = c.has_exact;
  const auto rows =
      exact ? convergence_exact(c, field, o.grids) : convergence_successive(c, field, o.grids);
  fs::create_directories(o.out_dir);
  std::vector<std::string> header = {"N"};
  for (int k = 0; k < D; ++k) {
    header.push_back("e_u" + std::to_string(k + 1));
    header.push_back("rate_u" + std::to_string(k + 1));
  }
  header.push_back("e_p");
  header.push_back("rate_p");
  if (exact) header.push_back("e_div");
  CsvWriter csv(fs::path(o.out_dir) / (o.case_id + "_convergence.csv"), header);
  for (const auto& r : rows) {
    std::vector<std::string> row = {std::to_string(r.n)};
    for (int k = 0; k < D; ++k) {
      row.push_back(fmt(r.e_u[k]));
      row.push_back(std::isnan(r.rate_u[k]) ? "" : fmt(r.rate_u[k]));
    }
    row.push_back(fmt(r.e_p));
    row.push_back(std::isnan(r.rate_p) ? "" : fmt(r.rate_p));
    if (exact) row.push_back(fmt(r.e_div));
    csv.write_row(row);
    std::cout << "N=" << r.n;
    for (int k = 0; k < D; ++k) std::cout << "  e_u" << k + 1 << "=" << r.e_u[k];
    std::cout << "  e_p=" << r.e_p << "\n";
  }
  return ok ? 0 : kExitThreshold;
}

int cmd_slice_impl(const Options& o) {
  if (case_dimension(o.case_id) != 2) {
    std::cerr << "slice: only 2D cases have grid-line extracts\n";
    return kExitConfig;
  }
  const auto c = make_case<2>(o.case_id);
  bool ok = true;
  const auto field = load_or_train<2>(o, c, &ok);
  const auto sol = solve_case(c, field, o.grid);

  // parse "x=0", "y=h/2", "x=-0.5"
  const auto eq = o.line.find('=');
  if (eq == std::string::npos || (o.line[0] != 'x' && o.line[0] != 'y')) {
    std::cerr << "slice: --line must look like x=<value> or y=<value>\n";
    return kExitConfig;
  }
  const int axis = o.line[0] == 'x' ? 0 : 1;
  const std::string rhs = o.line.substr(eq + 1);
  const double h = sol.grid.h();
  double value = 0.0;
  if (rhs == "h/2")
    value = h / 2;
  else if (rhs == "-h/2")
    value = -h / 2;
  else if (rhs == "h")
    value = h;
  else
    value = std::stod(rhs);

  std::vector<SlicePoint> pts;
  try {
    pts = slice_line(sol, o.var, axis, value);
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }
  fs::create_directories(o.out_dir);
  std::string tag = o.line;
  for (char& ch : tag)
    if (ch == '=' || ch == '/') ch = '_';
  CsvWriter csv(fs::path(o.out_dir) / (o.case_id + "_N" + std::to_string(o.grid) + "_slice_" +
                                       o.var + "_" + tag + ".csv"),
                {axis == 0 ? "y" : "x", o.var});
  for (const auto& p : pts) csv.write_row({fmt(p.coordinate), fmt(p.value)});
  std::cout << "wrote " << pts.size() << " samples of " << o.var << " along " << o.line << "\n";
  return ok ? 0 : kExitThreshold;
}

int cmd_quiver_impl(const Options& o) {
  if (case_dimension(o.case_id) != 3) {
    std::cerr << "quiver: requires a 3D case\n";
    return kExitConfig;
  }
  const auto c = make_case<3>(o.case_id);
  bool ok = true;
  const auto field = load_or_train<3>(o, c, &ok);
  const auto sol = solve_case(c, field, o.grid);

  const auto eq = o.plane.find('=');
  if (eq == std::string::npos || o.plane[0] != 'y') {
    std::cerr << "quiver: --plane must look like y=<value> (e.g. y=h/2)\n";
    return kExitConfig;
  }
  const std::string rhs = o.plane.substr(eq + 1);
  const double h = sol.grid.h();
  const double value = rhs == "h/2" ? h / 2 : std::stod(rhs);

  std::vector<QuiverPoint> pts;
  try {
    pts = quiver_plane(sol, value);
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }
  fs::create_directories(o.out_dir);
  std::string tag = o.plane;
  for (char& ch : tag)
    if (ch == '=' || ch == '/') ch = '_';
  CsvWriter csv(fs::path(o.out_dir) / (o.case_id + "_N" + std::to_string(o.grid) + "_quiver_" +
                                       tag + ".csv"),
                {"x", "z", "u1", "u3", "magnitude"});
  for (const auto& q : pts)
    csv.write_row({fmt(q.x), fmt(q.z), fmt(q.u1), fmt(q.u3), fmt(q.magnitude)});
  std::cout << "wrote " << pts.size() << " quiver samples on " << o.plane << "\n";
  return ok ? 0 : kExitThreshold;
}

template <int D>
int cmd_divergence_impl(const Options& o) {
  const auto c = make_case<D>(o.case_id);
  bool ok = true;
  const auto field = load_or_train<D>(o, c, &ok);
  const auto sol = solve_case(c, field, o.grid);
  const double e = divergence_error(sol, field);
  fs::create_directories(o.out_dir);
  CsvWriter csv(
      fs::path(o.out_dir) / (o.case_id + "_N" + std::to_string(o.grid) + "_divergence.csv"),
      {"N", "e_div"});
  csv.write_row({std::to_string(o.grid), fmt(e)});
  std::cout << "e_inf(div u) = " << e << "\n";
  return ok ? 0 : kExitThreshold;
}

int cmd_reference_impl(const Options& o) {
  if (o.case_id != "ex2") {
    std::cerr << "reference: boundary-integral data exists only for ex2\n";
    return kExitConfig;
  }
  const auto c = case_ex2(o.nodes);
  const MacGrid<2> g(c.lo, c.hi, o.grid);
  fs::create_directories(o.out_dir);
  CsvWriter csv(fs::path(o.out_dir) / (o.case_id + "_ub_N" + std::to_string(o.grid) + "_q" +
                                       std::to_string(o.nodes) + ".csv"),
                {"component", "i", "j", "x", "y", "value"});
  for (int k = 0; k < 2; ++k) {
    NdArray<2> faces(g.face_dims(k));
    faces.for_each_index([&](const std::array<int, 2>& idx) {
      if (idx[k] != 0 && idx[k] != g.n) return;
      const Vec<2> x = g.face_position(k, idx);
      csv.write_row({"u" + std::to_string(k + 1), std::to_string(idx[0]), std::to_string(idx[1]),
                     fmt(x[0]), fmt(x[1]), fmt(c.boundary_velocity(x)[k])});
    });
  }
  std::cout << "wrote boundary data for N=" << o.grid << " with " << o.nodes
            << " quadrature nodes\n";
  return 0;
}

template <class Fn2, class Fn3>
int dispatch(const Options& o, Fn2&& two, Fn3&& three) {
  return case_dimension(o.case_id) == 2 ? two(o) : three(o);
}

void add_common(CLI::App* cmd, Options& o, bool wants_grid, bool wants_grids) {
  cmd->add_option("--case", o.case_id, "benchmark case id (ex1..ex4)")->required();
  if (wants_grid) cmd->add_option("--grid", o.grid, "cells per direction N");
  if (wants_grids)
    cmd->add_option("--grids", o.grids, "N list for the refinement study")->delimiter(',');
  cmd->add_option("--neurons", o.u_neurons, "hidden neurons per velocity network");
  cmd->add_option("--p-neurons", o.p_neurons, "hidden neurons of the pressure network");
  cmd->add_option("--layers", o.layers, "hidden layers of the velocity networks");
  cmd->add_option("--points", o.points, "training points M on the interface");
  cmd->add_option("--seed", o.seed, "base RNG seed")
      ->each([&](const std::string&) { o.seed_set = true; });
  cmd->add_option("--threshold", o.threshold, "training loss threshold");
  cmd->add_option("--max-epochs", o.max_epochs, "training epoch cap");
  cmd->add_option("--out", o.out_dir, "output directory (default $NNMAC_OUT or ./out)");
  cmd->add_option("--checkpoints", o.checkpoint_dir, "checkpoint directory");
  cmd->add_flag("--retrain", o.retrain, "ignore existing checkpoints");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid neural-network / MAC solver for Stokes interface problems"};
  app.require_subcommand(1);

  Options o;
  auto* train = app.add_subcommand("train", "train the singular-part networks");
  add_common(train, o, false, false);
  auto* solve = app.add_subcommand("solve", "solve one grid level and dump fields");
  add_common(solve, o, true, false);
  auto* conv = app.add_subcommand("convergence", "mesh refinement study");
  add_common(conv, o, false, true);
  auto* slice = app.add_subcommand("slice", "extract a variable along a grid line (2D)");
  add_common(slice, o, true, false);
  slice->add_option("--var", o.var, "u1, u2 or p");
  slice->add_option("--line", o.line, "x=<v> or y=<v>; <v> may be h/2")->required();
  auto* quiver = app.add_subcommand("quiver", "extract (u1,u3) on a plane (3D)");
  add_common(quiver, o, true, false);
  quiver->add_option("--plane", o.plane, "y=<v>; <v> may be h/2");
  auto* divergence = app.add_subcommand("divergence", "composed divergence diagnostic");
  add_common(divergence, o, true, false);
  auto* reference = app.add_subcommand("reference", "emit ex2 boundary-integral data");
  add_common(reference, o, true, false);
  reference->add_option("--nodes", o.nodes, "quadrature node count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : kExitConfig;
  }

  try {
    resolve(o);
    if (train->parsed()) {
      if (case_dimension(o.case_id) == 2) {
        const auto tr = train_case<2>(o, make_case<2>(o.case_id));
        return tr.all_reached_threshold ? 0 : kExitThreshold;
      }
      const auto tr = train_case<3>(o, make_case<3>(o.case_id));
      return tr.all_reached_threshold ? 0 : kExitThreshold;
    }
    if (solve->parsed())
      return dispatch(
          o, [](const Options& x) { return cmd_solve_impl<2>(x); },
          [](const Options& x) { return cmd_solve_impl<3>(x); });
    if (conv->parsed())
      return dispatch(
          o, [](const Options& x) { return cmd_convergence_impl<2>(x); },
          [](const Options& x) { return cmd_convergence_impl<3>(x); });
    if (slice->parsed()) return cmd_slice_impl(o);
    if (quiver->parsed()) return cmd_quiver_impl(o);
    if (divergence->parsed())
      return dispatch(
          o, [](const Options& x) { return cmd_divergence_impl<2>(x); },
          [](const Options& x) { return cmd_divergence_impl<3>(x); });
    if (reference->parsed()) return cmd_reference_impl(o);
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitSolver;
  }
  return kExitConfig;
}
