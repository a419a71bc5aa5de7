// scopegen: calibrate, predict, run experiments and serve the human-oracle
// endpoints on the synthetic world.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "scopegen/calibrator.hpp"
#include "scopegen/errors.hpp"
#include "scopegen/harness.hpp"
#include "scopegen/oracle_service.hpp"
#include "scopegen/predictor.hpp"

using nlohmann::json;
using namespace scopegen;

namespace {

/// Every config key has a flag; flags that were given win over the file.
struct ConfigFlags {
  std::string config_path;
  std::optional<std::string> method;
  std::optional<double> alpha;
  std::optional<std::string> nonconformity;
  std::optional<double> gamma;
  std::optional<std::size_t> n_calibration;
  std::optional<std::size_t> n_test;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> max;
  std::optional<Seed> seed;
  std::optional<double> p_lo;
  std::optional<double> p_hi;
  std::optional<std::int64_t> vocab;
  std::optional<std::string> output;
  std::optional<int> emphasis;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> clm_grid_points;
  std::optional<bool> record_time;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--method", method, "scope-gen | scope-gen-gen-only | scope-gen-flipped | clm | clm-reduced-max");
    app.add_option("--alpha", alpha, "Target risk level in (0, 1)");
    app.add_option("--nonconformity", nonconformity, "count | sum | max");
    app.add_option("--gamma", gamma, "Size penalty for sum/max");
    app.add_option("--n-calibration", n_calibration, "Calibration conditions per trial");
    app.add_option("--n-test", n_test, "Test conditions per trial");
    app.add_option("--trials", trials, "Repeated trials");
    app.add_option("--max", max, "Generation budget per calibration instance");
    app.add_option("--seed", seed, "Run seed");
    app.add_option("--p-lo", p_lo, "Lower end of the per-condition success chance");
    app.add_option("--p-hi", p_hi, "Upper end of the per-condition success chance");
    app.add_option("--vocab", vocab, "Token vocabulary size");
    app.add_option("--output", output, "Output path");
    app.add_option("--emphasis", emphasis, "Generation-stage weight M (0 = uniform split)");
    app.add_option("--workers", workers, "Worker threads");
    app.add_option("--clm-grid-points", clm_grid_points, "Grid points per CLM dimension");
    app.add_flag("--record-time,!--no-record-time", record_time, "Write calibration wall time");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (method) c.method = method_from_string(*method);
    if (alpha) c.alpha = *alpha;
    if (nonconformity) c.nonconformity = update_kind_from_string(*nonconformity);
    if (gamma) c.gamma = *gamma;
    if (n_calibration) c.n_calibration = *n_calibration;
    if (n_test) c.n_test = *n_test;
    if (trials) c.trials = *trials;
    if (max) c.max = *max;
    if (seed) c.seed = *seed;
    if (p_lo) c.world.p_lo = *p_lo;
    if (p_hi) c.world.p_hi = *p_hi;
    if (vocab) c.world.vocab = *vocab;
    if (output) c.output = *output;
    if (emphasis) c.emphasis = *emphasis;
    if (workers) c.workers = *workers;
    if (clm_grid_points) c.clm_grid_points = *clm_grid_points;
    if (record_time) c.record_time = *record_time;
    c.validate();
    return c;
  }
};

json lambdas_json(const std::vector<double>& lambdas) {
  json out = json::array();
  for (double l : lambdas) {
    if (std::isinf(l)) out.push_back("inf");
    else out.push_back(l);
  }
  return out;
}

std::vector<double> lambdas_from(const json& j) {
  std::vector<double> out;
  for (const auto& v : j) out.push_back(v.is_string() ? kInfinity : v.get<double>());
  return out;
}

json result_json(const ExperimentConfig& config, const CalibrationResult& result) {
  json folds = json::array();
  for (const auto& [b, e] : result.split.folds) folds.push_back({b, e});
  return {{"config", json::parse(to_json(config))},
          {"lambdas", lambdas_json(result.lambdas)},
          {"stage_alphas", result.risk.per_stage},
          {"rejected", result.rejected},
          {"rejected_stage", result.rejected_stage ? json(*result.rejected_stage) : json(nullptr)},
          {"query_count", result.query_count},
          {"m_effective", result.m_effective},
          {"folds", folds}};
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write {}", path));
  out << text << '\n';
}

void write_log(const std::string& path, const AdmissionOracle& oracle) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write {}", path));
  const auto log = oracle.log();
  write_ndjson(out, log);
}

ExperimentConfig require_scope_gen(ExperimentConfig c) {
  if (!c.seed) throw InvalidInput("a --seed (or config seed) is required");
  if (is_clm(c.method)) {
    throw InvalidInput("calibrate covers the scope-gen methods; use `experiment` for CLM");
  }
  return c;
}

int run_calibrate(const ConfigFlags& flags, const std::string& replay, const std::string& log_path) {
  const auto config = require_scope_gen(flags.resolve());
  const auto setup = prepare_trial(config, 0);
  const auto cc = scope_gen_config(config, *setup.world, setup.calibration_seed);

  std::unique_ptr<AdmissionOracle> oracle;
  if (replay.empty()) {
    oracle = std::make_unique<ExactMatchOracle>();
  } else {
    std::ifstream in(replay);
    if (!in) throw IoError(fmt::format("cannot read {}", replay));
    const auto records = read_ndjson(in);
    oracle = std::make_unique<ReplayOracle>(records);
  }
  auto run = cc;
  run.workers = config.workers;
  const auto result = calibrate(setup.calibration, setup.world, *oracle, run);
  write_log(log_path, *oracle);
  write_text(config.output, result_json(config, result).dump(2));
  spdlog::info("calibrated {} stages with {} oracle queries{}", result.lambdas.size(),
               result.query_count, result.rejected ? " (rejected)" : "");
  return 0;
}

int run_predict(const std::string& calibration_path, std::size_t count, const std::string& output) {
  std::ifstream in(calibration_path);
  if (!in) throw IoError(fmt::format("cannot read {}", calibration_path));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInput(fmt::format("{}: {}", calibration_path, e.what()));
  }
  auto config = parse_config(doc.at("config").dump());
  if (count > 0) config.n_test = count;
  config = require_scope_gen(config);
  const auto setup = prepare_trial(config, 0);
  const auto cc = scope_gen_config(config, *setup.world, setup.calibration_seed);
  CalibrationResult result;
  result.lambdas = lambdas_from(doc.at("lambdas"));
  result.rejected = doc.at("rejected").get<bool>();
  const auto pipeline = make_pipeline(setup.world, cc, result);

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!output.empty() && output != "-") {
    file.open(output, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError(fmt::format("cannot write {}", output));
    out = &file;
  }
  std::size_t hits = 0;
  for (const auto& example : setup.test) {
    const auto set = predict(example.condition, pipeline, instance_seed(setup.test_seed, example.condition.id));
    const bool admissible = setup.world->is_admissible(example, set);
    hits += admissible ? 1 : 0;
    json items = json::array();
    for (const auto& y : set.items) items.push_back(y.token);
    *out << json{{"condition_id", example.condition.id},
                 {"entire_space", set.entire_space},
                 {"items", items},
                 {"admissible", admissible}}
                .dump()
         << '\n';
  }
  spdlog::info("{} of {} prediction sets admissible", hits, setup.test.size());
  return 0;
}

int run_experiment_verb(const ConfigFlags& flags) {
  const auto config = flags.resolve();
  if (!config.seed) throw InvalidInput("experiment requires --seed");
  const auto rows = run_experiment(config);
  if (config.output.empty()) {
    std::cout << to_csv(rows);
  } else {
    emit_results(rows, config.output, config);
  }
  const auto s = summarize(rows);
  spdlog::info("{}: queries {:.3f}, set size {:.3f}, frac_reject {:.3f}, admissibility {:.4f}",
               to_string(config.method), s.queries_mean, s.set_size_mean, s.frac_reject,
               s.admissibility_empirical);
  return 0;
}

int run_serve(const ConfigFlags& flags, const std::string& bind, const std::string& checkpoint,
              double timeout_seconds, const std::string& log_path) {
  const auto config = require_scope_gen(flags.resolve());
  const auto setup = prepare_trial(config, 0);
  const auto cc = scope_gen_config(config, *setup.world, setup.calibration_seed);

  OracleQueue queue;
  OracleServer server(queue);
  const auto address = resolve_bind_address(bind);
  const int port = server.start(address);
  spdlog::info("waiting for verdicts on http://{}:{}", address.host, port);

  const auto timeout = std::chrono::milliseconds(static_cast<long long>(timeout_seconds * 1000));
  RemoteHumanOracle oracle(queue, timeout, checkpoint);
  try {
    const auto result = calibrate(setup.calibration, setup.world, oracle, cc);
    queue.set_stage("done");
    write_log(log_path, oracle);
    write_text(config.output, result_json(config, result).dump(2));
  } catch (const OracleTimeout& e) {
    queue.set_stage("timed out");
    spdlog::error("{}", e.what());
    if (!checkpoint.empty()) spdlog::error("rerun with --checkpoint {} to resume", checkpoint);
    return 3;
  }
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential conformal prediction sets for generative models"};
  app.require_subcommand(1);

  ConfigFlags calibrate_flags, predict_flags, experiment_flags, serve_flags;
  std::string replay, calibrate_log;
  auto* calibrate_cmd = app.add_subcommand("calibrate", "Calibrate a scope-gen pipeline");
  calibrate_flags.attach(*calibrate_cmd);
  calibrate_cmd->add_option("--replay", replay, "Serve verdicts from an NDJSON admission log")
      ->check(CLI::ExistingFile);
  calibrate_cmd->add_option("--oracle-log", calibrate_log, "Write the admission log as NDJSON");

  std::string calibration_path, predict_output;
  std::size_t predict_count = 0;
  auto* predict_cmd = app.add_subcommand("predict", "Prediction sets from a calibration file");
  predict_cmd->add_option("--calibration", calibration_path, "Output of `calibrate`")
      ->required()
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--count", predict_count, "Number of test conditions (default n_test)");
  predict_cmd->add_option("--output", predict_output, "NDJSON destination (default stdout)");

  auto* experiment_cmd = app.add_subcommand("experiment", "Repeated calibrate/evaluate trials");
  experiment_flags.attach(*experiment_cmd);

  std::string bind, checkpoint, serve_log;
  double timeout_seconds = 600.0;
  auto* serve_cmd = app.add_subcommand("serve-oracle", "Calibrate with verdicts from the HTTP labeling queue");
  serve_flags.attach(*serve_cmd);
  serve_cmd->add_option("--bind", bind, fmt::format("host:port (default ${} or 127.0.0.1:8765)", kBindEnvVar));
  serve_cmd->add_option("--checkpoint", checkpoint, "NDJSON file of verdicts; resumed if present");
  serve_cmd->add_option("--timeout", timeout_seconds, "Seconds to wait for each verdict");
  serve_cmd->add_option("--oracle-log", serve_log, "Write the admission log as NDJSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*calibrate_cmd) return run_calibrate(calibrate_flags, replay, calibrate_log);
    if (*predict_cmd) return run_predict(calibration_path, predict_count, predict_output);
    if (*experiment_cmd) return run_experiment_verb(experiment_flags);
    if (*serve_cmd) return run_serve(serve_flags, bind, checkpoint, timeout_seconds, serve_log);
  } catch (const InvalidInput& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
