#include "scopegen/harness.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "parallel.hpp"
#include "scopegen/calibrator.hpp"
#include "scopegen/clm.hpp"
#include "scopegen/errors.hpp"
#include "scopegen/oracle.hpp"
#include "scopegen/predictor.hpp"

namespace scopegen {

using nlohmann::json;

std::string_view to_string(Method method) {
  switch (method) {
    case Method::scope_gen:
      return "scope-gen";
    case Method::scope_gen_gen_only:
      return "scope-gen-gen-only";
    case Method::scope_gen_flipped:
      return "scope-gen-flipped";
    case Method::clm:
      return "clm";
    case Method::clm_reduced_max:
      return "clm-reduced-max";
  }
  return "scope-gen";
}

Method method_from_string(std::string_view text) {
  for (Method m : {Method::scope_gen, Method::scope_gen_gen_only, Method::scope_gen_flipped,
                   Method::clm, Method::clm_reduced_max}) {
    if (to_string(m) == text) return m;
  }
  throw InvalidInput(fmt::format("unknown method '{}'", text));
}

std::string_view to_string(UpdateKind kind) {
  switch (kind) {
    case UpdateKind::count:
      return "count";
    case UpdateKind::sum:
      return "sum";
    case UpdateKind::max:
      return "max";
    case UpdateKind::diversity:
      return "diversity";
    case UpdateKind::quality:
      return "quality";
  }
  return "count";
}

UpdateKind update_kind_from_string(std::string_view text) {
  if (text == "count") return UpdateKind::count;
  if (text == "sum") return UpdateKind::sum;
  if (text == "max") return UpdateKind::max;
  throw InvalidInput(fmt::format("unknown non-conformity '{}' (count|sum|max)", text));
}

void ExperimentConfig::validate() const {
  auto probability = [](double p, const char* name) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidInput(fmt::format("{} must lie in (0, 1), got {}", name, p));
  };
  probability(alpha, "alpha");
  if (nonconformity != UpdateKind::count) {
    if (!(gamma > 0.0)) throw InvalidInput("gamma must be > 0 for sum/max");
  }
  if (trials == 0) throw InvalidInput("trials must be >= 1");
  if (max == 0) throw InvalidInput("max must be >= 1");
  if (n_test == 0) throw InvalidInput("n_test must be >= 1");
  if (n_calibration < 3) throw InvalidInput("n_calibration must be >= 3");
  if (!(world.p_lo >= 0.0 && world.p_lo <= world.p_hi && world.p_hi <= 1.0)) {
    throw InvalidInput("world: need 0 <= p_lo <= p_hi <= 1");
  }
  if (world.vocab < 2) throw InvalidInput("world.vocab must be >= 2");
  if (emphasis != 0 && emphasis < 2) throw InvalidInput("emphasis must be 0 (uniform) or >= 2");
  if (workers == 0) throw InvalidInput("workers must be >= 1");
  if (clm_grid_points == 0) throw InvalidInput("clm_grid_points must be >= 1");
}

ExperimentConfig parse_config(std::string_view json_text) {
  const json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw InvalidInput("config: not a JSON object");
  ExperimentConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "method") c.method = method_from_string(value.get<std::string>());
      else if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "nonconformity") c.nonconformity = update_kind_from_string(value.get<std::string>());
      else if (key == "gamma") c.gamma = value.get<double>();
      else if (key == "n_calibration") c.n_calibration = value.get<std::size_t>();
      else if (key == "n_test") c.n_test = value.get<std::size_t>();
      else if (key == "trials") c.trials = value.get<std::size_t>();
      else if (key == "max") c.max = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<Seed>();
      else if (key == "output") c.output = value.get<std::string>();
      else if (key == "emphasis") c.emphasis = value.get<int>();
      else if (key == "workers") c.workers = value.get<std::size_t>();
      else if (key == "clm_grid_points") c.clm_grid_points = value.get<std::size_t>();
      else if (key == "record_time") c.record_time = value.get<bool>();
      else if (key == "world") {
        c.world.p_lo = value.value("p_lo", c.world.p_lo);
        c.world.p_hi = value.value("p_hi", c.world.p_hi);
        c.world.vocab = value.value("vocab", c.world.vocab);
      } else {
        throw InvalidInput(fmt::format("config: unknown key '{}'", key));
      }
    }
  } catch (const json::exception& e) {
    throw InvalidInput(fmt::format("config: {}", e.what()));
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read config {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string to_json(const ExperimentConfig& c) {
  json j = {{"method", to_string(c.method)},
            {"alpha", c.alpha},
            {"nonconformity", to_string(c.nonconformity)},
            {"gamma", c.gamma},
            {"n_calibration", c.n_calibration},
            {"n_test", c.n_test},
            {"trials", c.trials},
            {"max", c.max},
            {"output", c.output},
            {"emphasis", c.emphasis},
            {"workers", c.workers},
            {"clm_grid_points", c.clm_grid_points},
            {"record_time", c.record_time},
            {"world", {{"p_lo", c.world.p_lo}, {"p_hi", c.world.p_hi}, {"vocab", c.world.vocab}}}};
  if (c.seed) j["seed"] = *c.seed;
  return j.dump(2);
}

namespace {

UpdateRule generation_rule(const ExperimentConfig& config) {
  UpdateRule rule;
  switch (config.nonconformity) {
    case UpdateKind::count:
      rule = UpdateRule::count();
      break;
    case UpdateKind::sum:
      rule = UpdateRule::sum(config.gamma);
      break;
    case UpdateKind::max:
      rule = UpdateRule::max(config.gamma);
      break;
    default:
      throw InvalidInput("generation rule must be count, sum or max");
  }
  rule.clamp_quality = true;
  return rule;
}

StopScore stop_score(UpdateKind kind) {
  switch (kind) {
    case UpdateKind::count:
      return StopScore::count;
    case UpdateKind::max:
      return StopScore::max;
    default:
      return StopScore::sum;
  }
}

enum Stream : std::uint64_t { kCalibrationData = 1, kTestData = 2, kCalibration = 3, kTest = 4 };

}  // namespace

TrialSetup prepare_trial(const ExperimentConfig& config, std::size_t trial) {
  if (!config.seed) throw InvalidInput("experiment: a seed is required");
  config.validate();
  const Seed trial_seed = mix_seed(*config.seed, trial);
  TrialSetup setup;
  setup.world = std::make_shared<SyntheticWorld>(config.world);
  setup.calibration =
      setup.world->draw(config.n_calibration, mix_seed(trial_seed, kCalibrationData), 0);
  setup.test =
      setup.world->draw(config.n_test, mix_seed(trial_seed, kTestData), config.n_calibration);
  setup.calibration_seed = mix_seed(trial_seed, kCalibration);
  setup.test_seed = mix_seed(trial_seed, kTest);
  return setup;
}

bool is_clm(Method method) { return method == Method::clm || method == Method::clm_reduced_max; }

CalibrationConfig scope_gen_config(const ExperimentConfig& config, const SyntheticWorld& world,
                                   Seed seed) {
  if (is_clm(config.method)) throw InvalidInput("scope_gen_config: method is a CLM variant");
  CalibrationConfig cc;
  cc.generation_rule = generation_rule(config);
  const auto diversity = FilterSpec::diversity(world.distance_fn(), 1.0);
  const auto quality = FilterSpec::quality();
  if (config.method == Method::scope_gen) cc.filters = {diversity, quality};
  if (config.method == Method::scope_gen_flipped) cc.filters = {quality, diversity};
  cc.alpha = config.alpha;
  cc.emphasis = config.emphasis;
  cc.budget.max = config.max;
  cc.seed = seed;
  return cc;
}

MetricsRow run_trial(const ExperimentConfig& config, std::size_t trial) {
  const auto setup = prepare_trial(config, trial);
  const auto& world = setup.world;
  const auto& test = setup.test;
  ExactMatchOracle oracle;

  MetricsRow row;
  row.method = std::string(to_string(config.method));
  row.trial = trial;
  const Seed test_seed = setup.test_seed;
  const auto clock_start = std::chrono::steady_clock::now();
  std::function<PredictionSet(const Example&)> predictor;
  bool rejected = false;
  std::size_t queries = 0;

  if (is_clm(config.method)) {
    ClmOptions options;
    options.grid_points = config.clm_grid_points;
    options.stop = stop_score(config.nonconformity);
    options.similarity = [world](const Output& a, const Output& b) { return world->similarity(a, b); };
    options.budget.max = config.method == Method::clm_reduced_max ? 10 : config.max;
    options.seed = setup.calibration_seed;
    auto result = std::make_shared<ClmResult>(
        clm_calibrate_best(setup.calibration, *world, oracle, options, config.alpha));
    rejected = result->rejected;
    queries = result->query_count;
    predictor = [world, result, options, test_seed](const Example& e) {
      return clm_predict(e.condition, *world, *result, options, instance_seed(test_seed, e.condition.id));
    };
  } else {
    const auto cc = scope_gen_config(config, *world, setup.calibration_seed);
    const auto result = calibrate(setup.calibration, world, oracle, cc);
    rejected = result.rejected;
    queries = result.query_count;
    auto pipeline = std::make_shared<PredictPipeline>(make_pipeline(world, cc, result));
    predictor = [pipeline, test_seed](const Example& e) {
      return predict(e.condition, *pipeline, instance_seed(test_seed, e.condition.id));
    };
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - clock_start;

  row.queries_mean = static_cast<double>(queries) / static_cast<double>(config.n_calibration);
  row.time_seconds = config.record_time ? elapsed.count() : 0.0;
  row.frac_reject = rejected ? 1.0 : 0.0;
  if (rejected) {
    row.admissibility_empirical = 1.0;
    row.set_size_mean = std::nan("");
    return row;
  }
  std::size_t hits = 0;
  double size = 0.0;
  for (const auto& example : test) {
    const auto set = predictor(example);
    hits += world->is_admissible(example, set) ? 1 : 0;
    size += static_cast<double>(set.size());
  }
  row.admissibility_empirical = static_cast<double>(hits) / static_cast<double>(test.size());
  row.set_size_mean = size / static_cast<double>(test.size());
  return row;
}

std::vector<MetricsRow> run_experiment(const ExperimentConfig& config) {
  if (!config.seed) throw InvalidInput("experiment: a seed is required");
  config.validate();
  std::vector<MetricsRow> rows(config.trials);
  detail::parallel_for(config.trials, config.workers,
                       [&](std::size_t t) { rows[t] = run_trial(config, t); });
  return rows;
}

std::string to_csv(std::span<const MetricsRow> rows) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{}\n", r.method, r.trial, r.queries_mean, r.time_seconds,
                       r.set_size_mean, r.frac_reject, r.admissibility_empirical);
  }
  return out;
}

namespace {

double parse_double(std::string_view field) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw InvalidInput(fmt::format("csv: bad number '{}'", field));
  }
  return value;
}

}  // namespace

std::vector<MetricsRow> parse_csv(std::string_view text) {
  std::vector<MetricsRow> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw InvalidInput("csv: unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1)) {
      fields.push_back(rest.substr(0, pos));
    }
    fields.push_back(rest);
    if (fields.size() != 7) throw InvalidInput(fmt::format("csv: expected 7 fields in '{}'", line));
    MetricsRow r;
    r.method = std::string(fields[0]);
    r.trial = static_cast<std::size_t>(parse_double(fields[1]));
    r.queries_mean = parse_double(fields[2]);
    r.time_seconds = parse_double(fields[3]);
    r.set_size_mean = parse_double(fields[4]);
    r.frac_reject = parse_double(fields[5]);
    r.admissibility_empirical = parse_double(fields[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void emit_results(std::span<const MetricsRow> rows, const std::filesystem::path& path,
                  const ExperimentConfig& config) {
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write results to {}", path.string()));
    out << to_csv(rows);
    if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
  }
  auto sidecar = path;
  sidecar.replace_extension(".config.json");
  std::ofstream out(sidecar, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write config sidecar {}", sidecar.string()));
  out << to_json(config) << '\n';
}

std::vector<MetricsRow> read_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str());
}

MetricsSummary summarize(std::span<const MetricsRow> rows) {
  MetricsSummary s;
  std::size_t sized = 0;
  for (const auto& r : rows) {
    s.queries_mean += r.queries_mean;
    s.time_seconds += r.time_seconds;
    s.frac_reject += r.frac_reject;
    s.admissibility_empirical += r.admissibility_empirical;
    if (!std::isnan(r.set_size_mean)) {
      s.set_size_mean += r.set_size_mean;
      ++sized;
    }
  }
  const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
  s.queries_mean /= n;
  s.time_seconds /= n;
  s.frac_reject /= n;
  s.admissibility_empirical /= n;
  s.set_size_mean = sized ? s.set_size_mean / static_cast<double>(sized) : std::nan("");
  return s;
}

}  // namespace scopegen
