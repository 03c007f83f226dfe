#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "troop/baselines.hpp"
#include "troop/io.hpp"
#include "troop/objective.hpp"
#include "troop/optimizer.hpp"
#include "troop/projection.hpp"
#include "troop/system.hpp"

namespace troop::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using ModelPtr = std::shared_ptr<const system::QuadraticBilinearModel>;

// Echo of one invocation, written next to every output file.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  unsigned seed = 0;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write() const {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const json j{{"command", command}, {"argv", argv},     {"config", config},
                 {"inputs", inputs},   {"outputs", outputs}, {"seed", seed},
                 {"wall_clock_seconds", wall}};
    for (const std::string& out : outputs) io::write_text(out + ".manifest.json", j.dump(2) + "\n");
  }
};

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

ModelPtr resolve_model(const std::string& name) {
  if (name == "toy") return system::toy_model();
  return io::load_model(name);
}

// x(0) = u0 * B 1: the state reached by an impulse of size u0 on every input channel.
Vector impulse_state(const system::QuadraticBilinearModel& model, double u0) {
  if (model.input_dim() == 0) throw Error(ErrorKind::InvalidArgument, "model has no inputs to apply an impulse to");
  return u0 * model.b().rowwise().sum();
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, "not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, "empty amplitude list");
  return out;
}

// "0.5,1.0" or "random:N:lo,hi"
std::vector<double> parse_amplitudes(const std::string& text, unsigned seed) {
  if (text.rfind("random:", 0) != 0) return parse_list(text);
  const std::string rest = text.substr(7);
  const auto colon = rest.find(':');
  if (colon == std::string::npos) throw Error(ErrorKind::InvalidArgument, "expected random:N:lo,hi");
  int count = 0;
  try {
    count = std::stoi(rest.substr(0, colon));
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidArgument, "expected random:N:lo,hi");
  }
  const std::vector<double> range = parse_list(rest.substr(colon + 1));
  if (count < 1 || range.size() != 2 || !(range[0] <= range[1])) {
    throw Error(ErrorKind::InvalidArgument, "expected random:N:lo,hi with N >= 1 and lo <= hi");
  }
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(range[0], range[1]);
  std::vector<double> out(static_cast<std::size_t>(count));
  for (double& a : out) a = dist(rng);
  return out;
}

std::vector<double> sample_times(int samples, double horizon) {
  if (samples < 1) throw Error(ErrorKind::InvalidArgument, "--samples must be >= 1");
  if (!(horizon > 0.0)) throw Error(ErrorKind::InvalidArgument, "--horizon must be positive");
  std::vector<double> times(static_cast<std::size_t>(samples));
  for (int l = 0; l < samples; ++l) times[static_cast<std::size_t>(l)] = samples == 1 ? 0.0 : horizon * l / (samples - 1);
  return times;
}

int threads_default() {
  if (const char* env = std::getenv("TROOP_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    spdlog::warn("ignoring TROOP_THREADS='{}'", env);
  }
  return 1;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string model = "toy";
  std::string amplitudes = "0.5,1.0";
  int samples = 11;
  double horizon = 10.0;
  unsigned seed = 0;
  std::string out;
  std::string input = "none";
  int substeps = 200;
};

int cmd_generate(const GenerateArgs& a, RunManifest& manifest) {
  const ModelPtr model = resolve_model(a.model);
  const std::vector<double> amps = parse_amplitudes(a.amplitudes, a.seed);
  const std::vector<double> times = sample_times(a.samples, a.horizon);
  const system::InputSignal input = system::InputSignal::parse(a.input);
  std::vector<objective::Trajectory> trajectories;
  for (double u0 : amps) {
    objective::Trajectory t;
    t.label = "u0=" + fmt_double(u0);
    t.x0 = impulse_state(*model, u0);
    t.times = times;
    t.input = input;
    t.observations = objective::simulate_full_outputs(*model, t.x0, times, input, a.substeps);
    trajectories.push_back(std::move(t));
  }
  const objective::TrajectoryDataset data(model->state_dim(), model->output_dim(), std::move(trajectories));
  io::save_dataset(a.out, data);
  spdlog::info("wrote {} trajectories x {} samples to {}", data.size(), times.size(), a.out);

  manifest.seed = a.seed;
  manifest.config = {{"model", a.model}, {"amplitudes", a.amplitudes}, {"samples", a.samples},
                     {"horizon", a.horizon}, {"input", a.input}, {"substeps", a.substeps}};
  if (a.model != "toy") manifest.inputs.push_back(a.model);
  manifest.outputs.push_back(a.out);
  return kOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string model = "toy";
  int rank = 2;
  double gamma = 1e-3;
  std::string init = "bt";
  double c1 = 0.01;
  double c2 = 0.1;
  double tol = 1e-8;
  int max_iters = 500;
  std::string out;
  std::string trace;
  std::string transport = "exponential";
  std::string weighting = "mean";
  std::string objective = "sampled";
  bool no_normalize = false;
  int substeps = 200;
  std::string snapshots = "trajectory";
  double step = 0.005;
  int quadrature = 2;
  int threads = 1;
};

baselines::SnapshotSampling snapshot_sampling(const std::string& name) {
  return name == "samples" ? baselines::SnapshotSampling::samples : baselines::SnapshotSampling::trajectory;
}

manifold::RepresentativePair initial_pair(const std::string& init, const system::QuadraticBilinearModel& model,
                                          const objective::TrajectoryDataset& data, int rank, int substeps,
                                          baselines::SnapshotSampling sampling) {
  if (init == "bt") return baselines::bt_init_for(model, rank);
  if (init == "pod") return baselines::pod(baselines::collect_snapshots(model, data, substeps, sampling), rank);
  if (init.rfind("file:", 0) == 0) {
    const io::Checkpoint ckpt = io::load_checkpoint(init.substr(5));
    if (ckpt.pair.r() != rank || ckpt.pair.n() != model.state_dim()) {
      throw Error(ErrorKind::DimensionMismatch, "initial checkpoint does not match --rank / model dimension");
    }
    return ckpt.pair;
  }
  throw Error(ErrorKind::InvalidArgument, "--init must be bt, pod or file:<path>");
}

int cmd_train(const TrainArgs& a, RunManifest& manifest) {
  const ModelPtr model = resolve_model(a.model);
  const objective::TrajectoryDataset data = io::load_dataset(a.data);
  if (a.rank < 1 || a.rank >= model->state_dim()) {
    throw Error(ErrorKind::InvalidArgument, "--rank must satisfy 1 <= r < n");
  }

  objective::ObjectiveConfig ocfg;
  ocfg.gamma = a.gamma;
  ocfg.normalize_by_energy = !a.no_normalize;
  ocfg.weighting = a.weighting == "sum" ? objective::Weighting::sum : objective::Weighting::mean;
  ocfg.mode = a.objective == "integrated" ? objective::ObjectiveMode::integrated : objective::ObjectiveMode::sampled;
  ocfg.substeps = a.substeps;
  ocfg.integrated_step = a.step;
  ocfg.quadrature_order = a.quadrature;
  ocfg.threads = a.threads;
  ocfg.validate();

  optimizer::CgConfig cg;
  cg.c1 = a.c1;
  cg.c2 = a.c2;
  cg.eps = a.tol;
  cg.max_iters = a.max_iters;
  cg.transport = a.transport == "retraction" ? optimizer::TransportMode::retraction
                                             : optimizer::TransportMode::exponential;
  cg.validate();

  const manifold::RepresentativePair init =
      initial_pair(a.init, *model, data, a.rank, a.substeps, snapshot_sampling(a.snapshots));
  const std::string trace_path = a.trace.empty() ? a.out + ".trace.jsonl" : a.trace;

  manifest.config = {{"model", a.model},         {"rank", a.rank},           {"gamma", a.gamma},
                     {"init", a.init},           {"c1", a.c1},               {"c2", a.c2},
                     {"tol", a.tol},             {"max_iters", a.max_iters}, {"transport", a.transport},
                     {"weighting", a.weighting}, {"objective", a.objective}, {"normalize", !a.no_normalize},
                     {"substeps", a.substeps},   {"step", a.step},           {"quadrature", a.quadrature},
                     {"threads", a.threads},     {"snapshots", a.snapshots}};
  manifest.inputs.push_back(a.data);
  if (a.model != "toy") manifest.inputs.push_back(a.model);

  const auto log_iteration = [](std::size_t k, const optimizer::CgRecord& rec) {
    spdlog::info("iter {:4d}  J = {:.10e}  |grad| = {:.3e}  alpha = {:.3e}  evals = {}", k, rec.objective,
                 std::sqrt(rec.grad_norm_sq), rec.step_alpha, rec.line_search_evals);
  };

  optimizer::OptimizeResult result;
  try {
    result = optimizer::optimize(*model, init, data, ocfg, cg, log_iteration);
  } catch (const optimizer::LineSearchFailedError& e) {
    io::save_trace(trace_path, e.trace());
    manifest.outputs.push_back(trace_path);
    throw;
  }

  const optimizer::CgRecord& last = result.trace.back();
  io::Checkpoint ckpt{result.pair,
                      {a.gamma, static_cast<int>(result.trace.size()) - 1, last.objective,
                       std::sqrt(last.grad_norm_sq), "troop"}};
  io::save_checkpoint(a.out, ckpt);
  io::save_trace(trace_path, result.trace);
  manifest.outputs.push_back(a.out);
  manifest.outputs.push_back(trace_path);
  if (result.converged) {
    spdlog::info("converged after {} iterations; checkpoint written to {}", ckpt.meta.iterations, a.out);
  } else {
    spdlog::warn("stopped at --max-iters {} with |grad| = {:.3e}", a.max_iters, ckpt.meta.final_grad_norm);
  }
  return kOk;
}

// ---------------------------------------------------------------- baseline

struct BaselineArgs {
  std::string method;
  std::string model = "toy";
  std::string data;
  int rank = 2;
  std::string out;
  int substeps = 200;
  std::string snapshots = "trajectory";
};

int cmd_baseline(const BaselineArgs& a, RunManifest& manifest) {
  const ModelPtr model = resolve_model(a.model);
  manifest.config = {{"method", a.method}, {"model", a.model}, {"rank", a.rank}, {"substeps", a.substeps},
                     {"snapshots", a.snapshots}};
  if (a.model != "toy") manifest.inputs.push_back(a.model);
  io::Checkpoint ckpt;
  ckpt.meta.method = a.method;
  ckpt.meta.final_cost = std::numeric_limits<double>::quiet_NaN();
  ckpt.meta.final_grad_norm = std::numeric_limits<double>::quiet_NaN();
  if (a.method == "pod") {
    if (a.data.empty()) throw Error(ErrorKind::InvalidArgument, "pod needs --data");
    const objective::TrajectoryDataset data = io::load_dataset(a.data);
    manifest.inputs.push_back(a.data);
    const baselines::SnapshotMatrix snaps =
        baselines::collect_snapshots(*model, data, a.substeps, snapshot_sampling(a.snapshots));
    ckpt.pair = baselines::pod(snaps, a.rank);
  } else if (a.method == "bt") {
    ckpt.pair = baselines::bt_init_for(*model, a.rank);
  } else {
    throw Error(ErrorKind::InvalidArgument, "--method must be pod or bt");
  }
  io::save_checkpoint(a.out, ckpt);
  manifest.outputs.push_back(a.out);
  spdlog::info("{} pair of rank {} written to {}", a.method, a.rank, a.out);
  return kOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::vector<std::string> checkpoints;
  std::string model = "toy";
  std::string data;
  std::string out;
  std::string input;
  int samples = 101;
  double horizon = 10.0;
  int substeps = 200;
};

// "label=path" or a bare path labelled by its file stem.
std::pair<std::string, std::string> split_label(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq != std::string::npos && eq > 0) return {arg.substr(0, eq), arg.substr(eq + 1)};
  return {fs::path(arg).stem().string(), arg};
}

int cmd_evaluate(const EvaluateArgs& a, RunManifest& manifest) {
  const ModelPtr model = resolve_model(a.model);
  manifest.config = {{"model", a.model}, {"input", a.input}, {"samples", a.samples},
                     {"horizon", a.horizon}, {"substeps", a.substeps}};
  if (a.model != "toy") manifest.inputs.push_back(a.model);

  std::vector<objective::Trajectory> truth;
  if (!a.input.empty() && a.input != "none") {
    // Forced response from rest, simulated here with the full-order model.
    objective::Trajectory t;
    t.input = system::InputSignal::parse(a.input);
    t.label = a.input;
    t.x0 = Vector::Zero(model->state_dim());
    t.times = sample_times(a.samples, a.horizon);
    t.observations = objective::simulate_full_outputs(*model, t.x0, t.times, t.input, a.substeps);
    truth.push_back(std::move(t));
  } else {
    if (a.data.empty()) throw Error(ErrorKind::InvalidArgument, "evaluate needs --data or --input");
    const objective::TrajectoryDataset data = io::load_dataset(a.data);
    if (data.state_dim() != model->state_dim() || data.output_dim() != model->output_dim()) {
      throw Error(ErrorKind::DimensionMismatch, "dataset does not match the model");
    }
    manifest.inputs.push_back(a.data);
    truth = data.trajectories();
  }

  const Eigen::Index m = model->output_dim();
  std::ostringstream csv;
  csv << "model,trajectory,t";
  for (Eigen::Index k = 0; k < m; ++k) csv << ",y_true" << k;
  for (Eigen::Index k = 0; k < m; ++k) csv << ",y_pred" << k;
  csv << ",nse\n";

  struct Summary {
    std::string label;
    double sum = 0.0;
    double max = 0.0;
    std::size_t rows = 0;
    std::size_t diverged = 0;
  };
  std::vector<Summary> summary;

  for (const std::string& entry : a.checkpoints) {
    const auto [label, path] = split_label(entry);
    const io::Checkpoint ckpt = io::load_checkpoint(path);
    manifest.inputs.push_back(path);
    if (ckpt.pair.n() != model->state_dim()) {
      throw Error(ErrorKind::DimensionMismatch, "checkpoint " + path + " does not match the model dimension");
    }
    const projection::ReducedModel rom(*model, ckpt.pair);
    Summary s{label};
    for (const objective::Trajectory& t : truth) {
      Matrix pred;
      try {
        pred = objective::simulate_outputs(rom, t.x0, t.times, t.input, a.substeps);
      } catch (const BlowUpError&) {
        spdlog::warn("model '{}' diverges on trajectory '{}'", label, t.label);
        pred = Matrix::Constant(t.observations.rows(), m, std::numeric_limits<double>::infinity());
        ++s.diverged;
      }
      const double energy = t.energy();
      for (Eigen::Index l = 0; l < t.observations.rows(); ++l) {
        const double err = (pred.row(l) - t.observations.row(l)).squaredNorm();
        // All-zero outputs have no scale to normalize by; report the raw error.
        const double nse = energy > 0.0 ? err / energy : err;
        csv << label << ',' << t.label << ',' << fmt_double(t.times[static_cast<std::size_t>(l)]);
        for (Eigen::Index k = 0; k < m; ++k) csv << ',' << fmt_double(t.observations(l, k));
        for (Eigen::Index k = 0; k < m; ++k) csv << ',' << fmt_double(pred(l, k));
        csv << ',' << fmt_double(nse) << '\n';
        s.sum += nse;
        s.max = std::max(s.max, nse);
        ++s.rows;
      }
    }
    summary.push_back(s);
  }
  io::write_text(a.out, csv.str());
  manifest.outputs.push_back(a.out);

  const fs::path out_path(a.out);
  const std::string summary_path = (out_path.parent_path() / (out_path.stem().string() + ".summary.csv")).string();
  std::ostringstream table;
  table << "model,mean_nse,max_nse,rows,diverged\n";
  for (const Summary& s : summary) {
    const double mean = s.rows > 0 ? s.sum / static_cast<double>(s.rows) : 0.0;
    table << s.label << ',' << fmt_double(mean) << ',' << fmt_double(s.max) << ',' << s.rows << ',' << s.diverged
          << '\n';
  }
  io::write_text(summary_path, table.str());
  manifest.outputs.push_back(summary_path);
  std::cout << table.str();
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Trajectory-based optimization of oblique projections for model reduction"};
  app.require_subcommand(1);
  int threads = threads_default();

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "simulate impulse responses of the full-order model");
  g->add_option("--model", gen.model, "toy or a model JSON file");
  g->add_option("--amplitudes", gen.amplitudes, "comma list, or random:N:lo,hi");
  g->add_option("--samples", gen.samples, "samples per trajectory");
  g->add_option("--horizon", gen.horizon, "final sample time");
  g->add_option("--seed", gen.seed, "seed for random amplitudes");
  g->add_option("--input", gen.input, "none or sin:A:f");
  g->add_option("--substeps", gen.substeps, "RK4 steps per sampling interval");
  g->add_option("--out", gen.out, "dataset JSON")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "optimize a projection pair on a dataset");
  t->add_option("--data", tr.data, "dataset JSON")->required();
  t->add_option("--model", tr.model, "toy or a model JSON file");
  t->add_option("--rank", tr.rank, "reduced dimension r");
  t->add_option("--gamma", tr.gamma, "regularization weight");
  t->add_option("--init", tr.init, "bt, pod or file:<checkpoint>");
  t->add_option("--c1", tr.c1, "sufficient-decrease constant");
  t->add_option("--c2", tr.c2, "curvature constant");
  t->add_option("--tol", tr.tol, "stop when the squared gradient norm is <= tol");
  t->add_option("--max-iters", tr.max_iters, "iteration limit");
  t->add_option("--out", tr.out, "checkpoint JSON")->required();
  t->add_option("--trace", tr.trace, "trace JSON-lines (default <out>.trace.jsonl)");
  t->add_option("--transport", tr.transport, "exponential or retraction")
      ->check(CLI::IsMember({"exponential", "retraction"}));
  t->add_option("--weighting", tr.weighting, "mean or sum over trajectories")->check(CLI::IsMember({"mean", "sum"}));
  t->add_option("--objective", tr.objective, "sampled or integrated")
      ->check(CLI::IsMember({"sampled", "integrated"}));
  t->add_flag("--no-normalize", tr.no_normalize, "do not divide by per-trajectory output energy");
  t->add_option("--substeps", tr.substeps, "RK4 steps per sampling interval");
  t->add_option("--snapshots", tr.snapshots, "POD snapshots for --init pod: trajectory or samples")
      ->check(CLI::IsMember({"trajectory", "samples"}));
  t->add_option("--step", tr.step, "RK4 step of the integrated objective");
  t->add_option("--quadrature", tr.quadrature, "Gauss-Legendre points per step");
  t->add_option("--threads", threads, "worker threads (default: TROOP_THREADS or 1)");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "compare reduced models with reference trajectories");
  e->add_option("--checkpoint", ev.checkpoints, "checkpoint JSON, optionally label=path; repeatable")->required();
  e->add_option("--model", ev.model, "toy or a model JSON file");
  e->add_option("--data", ev.data, "dataset JSON");
  e->add_option("--out", ev.out, "CSV output")->required();
  e->add_option("--input", ev.input, "sin:A:f to evaluate the forced response from rest instead");
  e->add_option("--samples", ev.samples, "samples for --input runs");
  e->add_option("--horizon", ev.horizon, "horizon for --input runs");
  e->add_option("--substeps", ev.substeps, "RK4 steps per sampling interval");

  BaselineArgs bl;
  auto* b = app.add_subcommand("baseline", "build a POD or balanced-truncation pair");
  b->add_option("--method", bl.method, "pod or bt")->required()->check(CLI::IsMember({"pod", "bt"}));
  b->add_option("--model", bl.model, "toy or a model JSON file");
  b->add_option("--data", bl.data, "dataset JSON (pod)");
  b->add_option("--rank", bl.rank, "reduced dimension r");
  b->add_option("--out", bl.out, "checkpoint JSON")->required();
  b->add_option("--substeps", bl.substeps, "RK4 steps per sampling interval");
  b->add_option("--snapshots", bl.snapshots, "POD snapshots: trajectory (every RK4 node) or samples")
      ->check(CLI::IsMember({"trajectory", "samples"}));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kValidation;
  }

  RunManifest manifest;
  manifest.argv = args;
  try {
    int status = kOk;
    if (*g) {
      manifest.command = "generate";
      status = cmd_generate(gen, manifest);
    } else if (*t) {
      manifest.command = "train";
      tr.threads = threads;
      status = cmd_train(tr, manifest);
    } else if (*e) {
      manifest.command = "evaluate";
      status = cmd_evaluate(ev, manifest);
    } else if (*b) {
      manifest.command = "baseline";
      status = cmd_baseline(bl, manifest);
    }
    manifest.write();
    return status;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    if (!manifest.outputs.empty()) manifest.write();
    return err.is_numerical() ? kNumerical : kValidation;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kValidation;
  }
}

int run(int argc, const char* const* argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace troop::cli
