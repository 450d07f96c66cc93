#include "bgrape/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "bgrape/io.hpp"

#ifndef BGRAPE_VERSION
#define BGRAPE_VERSION "0.0.0"
#endif

namespace bgrape {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::unique_ptr<HamiltonianModel> make_model(const ExperimentConfig& config) {
  if (config.model == ModelKind::kThreeQubit) return std::make_unique<ThreeQubitCoupling>();
  const auto& noise = std::get<FourierNoise>(config.distribution);
  return std::make_unique<NoisyQubit>(noise.num_modes);
}

GateTarget make_gate(const ExperimentConfig& config) {
  GateTarget gate;
  switch (config.target) {
    case TargetKind::kToffoli: gate = toffoli_target(); break;
    case TargetKind::kRxPi: gate = rx_pi_target(); break;
    case TargetKind::kFile:
      gate = make_target(read_target(config.target_file), config.target_file.stem().string());
      break;
  }
  const Eigen::Index n = config.model == ModelKind::kThreeQubit ? 8 : 2;
  if (gate.matrix.rows() != n) {
    throw ConfigError("target '" + gate.label + "' is " + std::to_string(gate.matrix.rows()) +
                      "-dimensional but the model needs " + std::to_string(n));
  }
  return config.special_unitary ? special_unitary_representative(gate) : gate;
}

namespace {

std::string utc_stamp(std::chrono::system_clock::time_point t, const char* format) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, format);
  return os.str();
}

std::string iso_time(std::chrono::system_clock::time_point t) {
  return utc_stamp(t, "%Y-%m-%dT%H:%M:%SZ");
}

}  // namespace

fs::path prepare_output_dir(const fs::path& base, const std::string& command, bool force) {
  if (force) {
    fs::create_directories(base);
    return base;
  }
  fs::create_directories(base);
  const std::string stem =
      command + "-" + utc_stamp(std::chrono::system_clock::now(), "%Y%m%dT%H%M%SZ");
  fs::path dir = base / stem;
  for (int n = 2; !fs::create_directory(dir); ++n) {
    dir = base / (stem + "-" + std::to_string(n));
  }
  return dir;
}

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool force = false;
};

struct Run {
  ExperimentConfig config;
  std::unique_ptr<HamiltonianModel> model;
  GateTarget target;
  fs::path base;
  bool force = false;
  fs::path dir;
  std::chrono::system_clock::time_point started;
  std::vector<std::string> files;
  std::ostream* out = nullptr;

  LossOptions loss_options() const {
    return {config.optimizer.fidelity, config.threads};
  }

  /// Creates the output directory once all inputs have been validated.
  void open_output(const std::string& command) { dir = prepare_output_dir(base, command, force); }

  fs::path file(const std::string& name) {
    files.push_back(name);
    return dir / name;
  }

  UncertaintySample nominal() const {
    return UncertaintySample::Zero(sample_dim(config.distribution));
  }

  double nominal_infidelity(const ControlField& field) const {
    return infidelity(propagate(*model, field, nominal()), target, config.optimizer.fidelity);
  }

  void finish(const std::string& command, json results) {
    json manifest;
    manifest["command"] = command;
    manifest["version"] = BGRAPE_VERSION;
    manifest["seed"] = config.seed;
    manifest["started"] = iso_time(started);
    manifest["finished"] = iso_time(std::chrono::system_clock::now());
    manifest["model"] = to_string(config.model);
    manifest["target"] = target.label;
    manifest["fidelity"] = to_string(config.optimizer.fidelity);
    manifest["results"] = std::move(results);
    json inventory = json::array();
    for (const std::string& name : files) {
      inventory.push_back({{"name", name},
                           {"bytes", fs::file_size(dir / name)},
                           {"sha256", sha256_file(dir / name)}});
    }
    manifest["files"] = inventory;
    manifest["config"] = config.source_text;
    write_atomically(dir / "manifest.json", manifest.dump(2) + "\n");
    *out << dir.string() << '\n';
  }
};

Run start_run(const CommonFlags& flags, std::ostream& out) {
  Run run;
  run.started = std::chrono::system_clock::now();
  run.config = load_experiment_config(flags.config);
  if (flags.seed) {
    run.config.seed = *flags.seed;
    run.config.optimizer.seed = *flags.seed;
  }
  if (flags.threads) {
    if (*flags.threads < 1) throw ConfigError("--threads must be >= 1");
    run.config.threads = *flags.threads;
    run.config.optimizer.threads = *flags.threads;
  }
  run.model = make_model(run.config);
  run.target = make_gate(run.config);
  run.base = flags.out.empty() ? run.config.output_dir : fs::path(flags.out);
  run.force = flags.force;
  run.out = &out;
  return run;
}

ControlField load_field(const Run& run, const std::string& path) {
  ControlField f = read_field(path, run.config.duration, run.config.bound);
  run.model->check_field(f);
  return f;
}

json number_map(const std::vector<std::pair<double, double>>& entries) {
  json m = json::object();
  for (const auto& [k, v] : entries) m[format_number(k)] = v;
  return m;
}

int cmd_optimize(const CommonFlags& flags, std::ostream& out) {
  Run run = start_run(flags, out);
  const ExperimentConfig& c = run.config;
  ControlField initial = [&] {
    if (!c.initial_field.empty()) return load_field(run, c.initial_field.string());
    RandomSource rng(c.seed, streams::kInitialGuess);
    return random_initial_field(*run.model, c.segments, c.duration, c.bound, rng);
  }();
  run.open_output("optimize");
  write_field(run.file("field_initial.csv"), initial);

  BatchScheduler scheduler(c.batch_mode, c.batch_size, c.distribution,
                           RandomSource(c.seed, streams::kBatches));
  TraceWriter trace(run.file("trace.csv"));
  const OptimizationResult result =
      bgrape::run(*run.model, run.target, initial, scheduler, c.optimizer,
                  [&](const TraceRow& row) { trace.write(row); });
  write_field(run.file("field_final.csv"), result.final_field);
  write_field(run.file("field_best.csv"), result.best_field);

  json r;
  r["iterations"] = result.iterations;
  r["samples"] = result.samples;
  r["batch_mode"] = to_string(c.batch_mode);
  r["batch_size"] = scheduler.batch_size();
  r["learning_rate"] = c.optimizer.learning_rate;
  r["diverged"] = result.diverged;
  r["stop_loss_reached"] = result.stop_loss_reached;
  r["final_test_loss"] = result.final_test_loss;
  r["best_test_loss"] = result.best_test_loss;
  r["final_nominal_infidelity"] = run.nominal_infidelity(result.final_field);
  r["best_nominal_infidelity"] = run.nominal_infidelity(result.best_field);
  run.finish("optimize", r);
  return kExitOk;
}

int cmd_landscape(const CommonFlags& flags, const std::string& field_path,
                  std::optional<std::size_t> grid_points, std::optional<double> threshold,
                  std::ostream& out) {
  Run run = start_run(flags, out);
  if (run.model->uncertainty_dim() != 2) {
    throw ConfigError("landscape needs a model with two uncertainty parameters");
  }
  const ControlField field = load_field(run, field_path);
  GridSpec grid = run.config.grid;
  if (grid_points) {
    if (*grid_points < 2) throw ConfigError("--grid must be >= 2");
    grid.eps1.points = grid.eps2.points = *grid_points;
  }
  const double main_threshold = threshold.value_or(run.config.threshold);
  if (!(main_threshold > 0.0)) throw ConfigError("--threshold must be > 0");
  run.open_output("landscape");
  const RobustnessLandscape l =
      landscape(*run.model, field, run.target, grid, main_threshold, run.loss_options());
  write_landscape(run.file("landscape.csv"), l);

  std::vector<std::pair<double, double>> areas;
  for (double th : {1e-2, 1e-3, 1e-4}) areas.emplace_back(th, levelset_area(l, th));
  if (threshold && *threshold != 1e-2 && *threshold != 1e-3 && *threshold != 1e-4) {
    areas.emplace_back(*threshold, l.area);
  }
  json area;
  area["grid"] = {{"lo", grid.eps1.lo}, {"hi", grid.eps1.hi}, {"points", grid.eps1.points}};
  area["box_area"] = (grid.eps1.hi - grid.eps1.lo) * (grid.eps2.hi - grid.eps2.lo);
  area["areas"] = number_map(areas);
  write_atomically(run.file("area.json"), area.dump(2) + "\n");

  json r;
  r["field"] = fs::absolute(field_path).string();
  r["grid_points"] = grid.eps1.points;
  r["threshold"] = main_threshold;
  r["area"] = l.area;
  r["min_infidelity"] = l.values.minCoeff();
  r["max_infidelity"] = l.values.maxCoeff();
  run.finish("landscape", r);
  return kExitOk;
}

json error_summary(const ErrorDistribution& d) {
  json s;
  s["samples"] = d.errors.size();
  s["p_below"] = number_map({{1e-2, d.probability_below(1e-2)},
                             {1e-3, d.probability_below(1e-3)}});
  s["mean"] = d.mean;
  s["median"] = d.median;
  return s;
}

int cmd_distribution(const CommonFlags& flags, const std::string& field_path,
                     const std::string& baseline, std::optional<std::size_t> samples,
                     std::ostream& out) {
  if (field_path.empty() == baseline.empty()) {
    throw ConfigError("distribution: give exactly one of --field and --baseline");
  }
  Run run = start_run(flags, out);
  ControlField field = [&] {
    if (!field_path.empty()) return load_field(run, field_path);
    BaselineKind kind = BaselineKind::kRectangular;
    if (baseline == "gaussian") {
      kind = BaselineKind::kGaussian;
    } else if (baseline != "rectangular") {
      throw ConfigError("--baseline must be rectangular or gaussian");
    }
    if (run.model->num_controls() != 2) {
      throw ConfigError("baseline pulses need a two-channel model");
    }
    return baseline_pulse(kind, run.config.duration, run.config.segments,
                          run.config.gaussian_width);
  }();
  const std::size_t n = samples.value_or(run.config.eval_samples);
  if (n < 1) throw ConfigError("--samples must be >= 1");
  run.open_output("distribution");
  if (!baseline.empty()) write_field(run.file("field_baseline.csv"), field);
  RandomSource rng(run.config.seed, streams::kEvaluation);
  const ErrorDistribution d = error_distribution(*run.model, field, run.target,
                                                 run.config.distribution, n, rng,
                                                 run.loss_options());
  write_errors(run.file("errors.csv"), d);
  write_atomically(run.file("summary.json"), error_summary(d).dump(2) + "\n");

  json r = error_summary(d);
  r["source"] = baseline.empty() ? fs::absolute(field_path).string() : "baseline:" + baseline;
  run.finish("distribution", r);
  return kExitOk;
}

int cmd_baseline(const CommonFlags& flags, const std::string& kind_flag, std::ostream& out) {
  Run run = start_run(flags, out);
  BaselineKind kind = run.config.baseline;
  if (kind_flag == "gaussian") {
    kind = BaselineKind::kGaussian;
  } else if (kind_flag == "rectangular") {
    kind = BaselineKind::kRectangular;
  } else if (!kind_flag.empty()) {
    throw ConfigError("--kind must be rectangular or gaussian");
  }
  if (run.model->num_controls() != 2) throw ConfigError("baseline pulses need a two-channel model");
  const ControlField field =
      baseline_pulse(kind, run.config.duration, run.config.segments, run.config.gaussian_width);
  run.open_output("baseline");
  write_field(run.file("field_baseline.csv"), field);
  json r;
  r["kind"] = to_string(kind);
  r["nominal_infidelity"] = run.nominal_infidelity(field);
  run.finish("baseline", r);
  return kExitOk;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& field_path,
                 std::optional<std::size_t> samples, std::ostream& out) {
  Run run = start_run(flags, out);
  const ControlField field = load_field(run, field_path);
  const std::size_t n = samples.value_or(run.config.optimizer.test_set_size);
  if (n < 1) throw ConfigError("--samples must be >= 1");
  run.open_output("evaluate");
  RandomSource rng(run.config.seed, streams::kEvaluation);
  const auto set = draw_many(run.config.distribution, n, rng);
  json r;
  r["field"] = fs::absolute(field_path).string();
  r["samples"] = n;
  r["test_loss"] = test_loss(*run.model, field, run.target, set, run.loss_options());
  r["nominal_infidelity"] = run.nominal_infidelity(field);
  write_atomically(run.file("evaluation.json"), r.dump(2) + "\n");
  run.finish("evaluate", r);
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "Experiment config file")->required();
  cmd->add_option("--out", flags.out, "Output base directory (overrides output.dir)");
  cmd->add_option("--seed", flags.seed, "Override the config seed");
  cmd->add_option("--threads", flags.threads, "Worker threads");
  cmd->add_flag("--force", flags.force, "Write directly into the output directory");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Batch-based robust quantum control (b-GRAPE)", "bgrape"};
  app.set_version_flag("--version", BGRAPE_VERSION);
  app.require_subcommand(1);

  CommonFlags flags;
  std::string field_path, baseline, kind;
  std::optional<std::size_t> grid, samples;
  std::optional<double> threshold;

  CLI::App* optimize = app.add_subcommand("optimize", "Train a control field");
  add_common(optimize, flags);

  CLI::App* land = app.add_subcommand("landscape", "Infidelity over the uncertainty grid");
  add_common(land, flags);
  land->add_option("--field", field_path, "Field CSV")->required();
  land->add_option("--grid", grid, "Grid points per axis");
  land->add_option("--threshold", threshold, "Level-set threshold");

  CLI::App* dist = app.add_subcommand("distribution", "Monte-Carlo error distribution");
  add_common(dist, flags);
  dist->add_option("--field", field_path, "Field CSV");
  dist->add_option("--baseline", baseline, "rectangular or gaussian pi-pulse");
  dist->add_option("--samples", samples, "Number of noise samples");

  CLI::App* base = app.add_subcommand("baseline", "Write a textbook pi-pulse");
  add_common(base, flags);
  base->add_option("--kind", kind, "rectangular or gaussian");

  CLI::App* eval = app.add_subcommand("evaluate", "Held-out loss of a field");
  add_common(eval, flags);
  eval->add_option("--field", field_path, "Field CSV")->required();
  eval->add_option("--samples", samples, "Number of test samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << BGRAPE_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }

  try {
    if (optimize->parsed()) return cmd_optimize(flags, out);
    if (land->parsed()) return cmd_landscape(flags, field_path, grid, threshold, out);
    if (dist->parsed()) return cmd_distribution(flags, field_path, baseline, samples, out);
    if (base->parsed()) return cmd_baseline(flags, kind, out);
    if (eval->parsed()) return cmd_evaluate(flags, field_path, samples, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const ContractError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const IoError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << " (residual " << e.residual() << ")\n";
    return kExitNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace bgrape
