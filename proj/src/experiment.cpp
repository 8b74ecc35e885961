#include "ope/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "ope/csv.hpp"
#include "ope/stats.hpp"

namespace ope {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

int parse_arm(const std::string& text, const std::string& spec) {
  try {
    std::size_t used = 0;
    const int k = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return k;
  } catch (const std::exception&) {
    throw std::invalid_argument("target spec '" + spec + "': '" + text +
                                "' is not an arm index");
  }
}

std::string derived_dataset_id(const ExperimentSource& src) {
  switch (src.kind) {
    case ExperimentSource::Kind::kTableCsv:
    case ExperimentSource::Kind::kEnvJson: {
      const auto slash = src.path.find_last_of("/\\");
      std::string stem =
          slash == std::string::npos ? src.path : src.path.substr(slash + 1);
      const auto dot = stem.find_last_of('.');
      if (dot != std::string::npos) stem = stem.substr(0, dot);
      return stem.empty() ? "dataset" : stem;
    }
    case ExperimentSource::Kind::kSynthetic:
      return "synthetic-r" + std::to_string(src.rows) + "-k" +
             std::to_string(src.classes) + "-d" + std::to_string(src.table_dim) +
             "-s" + std::to_string(src.table_seed);
  }
  return "dataset";
}

TrainingSchedule parse_training(const std::string& text) {
  TrainingSchedule sched;
  if (text == "sequential") {
    sched.mode = TrainingSchedule::Mode::kSequential;
    return sched;
  }
  if (starts_with(text, "crosstime:")) {
    sched.mode = TrainingSchedule::Mode::kCrossTime;
    const std::string folds = text.substr(10);
    sched.folds = parse_arm(folds, text);
    if (sched.folds < 2) {
      throw std::invalid_argument("training '" + text + "': need at least 2 folds");
    }
    return sched;
  }
  throw std::invalid_argument("training must be 'sequential' or 'crosstime:F', got '" +
                              text + "'");
}

TrainingSchedule::Engine parse_engine(const std::string& text) {
  if (text == "linear") return TrainingSchedule::Engine::kLinear;
  if (text == "tree") return TrainingSchedule::Engine::kTree;
  throw std::invalid_argument("outcome model must be 'linear' or 'tree', got '" +
                              text + "'");
}

// Syntax-only pass; arm range checks need num_arms and happen in make_target.
void check_target_structure(const std::string& spec) {
  if (starts_with(spec, "arm:")) {
    parse_arm(spec.substr(4), spec);
    return;
  }
  if (spec == "uniform") return;
  if (starts_with(spec, "contrast:")) {
    std::string body = spec.substr(9);
    if (body.size() >= 2 && body.front() == '(' && body.back() == ')') {
      body = body.substr(1, body.size() - 2);
    }
    const auto comma = body.find_first_of(",:");
    if (comma == std::string::npos) {
      throw std::invalid_argument("target spec '" + spec +
                                  "': expected contrast:(k1,k2)");
    }
    parse_arm(body.substr(0, comma), spec);
    parse_arm(body.substr(comma + 1), spec);
    return;
  }
  if (starts_with(spec, "learned:")) {
    parse_engine(spec.substr(8));
    return;
  }
  throw std::invalid_argument("unknown target spec '" + spec + "'");
}

struct ResolvedSource {
  // Exactly one of table/env is populated.
  std::shared_ptr<const ClassificationTable> table;
  std::shared_ptr<const EnumerableEnvironment> env;
  std::shared_ptr<const FixedPolicy> env_logging;
};

ResolvedSource resolve_source(const ExperimentConfig& cfg) {
  ResolvedSource out;
  switch (cfg.source.kind) {
    case ExperimentSource::Kind::kTableCsv:
      out.table = std::make_shared<ClassificationTable>(
          load_table_csv(cfg.source.path));
      break;
    case ExperimentSource::Kind::kSynthetic:
      out.table = std::make_shared<ClassificationTable>(
          synthetic_table(cfg.source.rows, cfg.source.classes,
                          cfg.source.table_dim, cfg.source.table_seed,
                          cfg.source.spread, cfg.source.noise));
      break;
    case ExperimentSource::Kind::kEnvJson: {
      std::ifstream in(cfg.source.path);
      if (!in) {
        throw std::runtime_error(cfg.source.path + ": cannot open for reading");
      }
      std::string text((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
      auto env = std::make_shared<EnumerableEnvironment>(
          EnumerableEnvironment::from_json(text));
      env->validate();
      out.env = std::move(env);
      out.env_logging = std::make_shared<FixedPolicy>(cfg.source.logging_probs);
      if (out.env_logging->num_arms() != out.env->num_arms()) {
        throw std::invalid_argument("logging_probs has " +
                                    std::to_string(out.env_logging->num_arms()) +
                                    " arms, environment has " +
                                    std::to_string(out.env->num_arms()));
      }
      break;
    }
  }
  return out;
}

struct CellOutcome {
  bool failed = false;
  bool covered = false;
  double psi = 0.0;
  double width = 0.0;
  double floor_hits = 0.0;
  double seconds = 0.0;
};

}  // namespace

void ExperimentConfig::validate() const {
  if (replications < 1) throw std::invalid_argument("replications must be >= 1");
  if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  if (estimators.empty()) throw std::invalid_argument("no estimators configured");
  std::set<EstimatorKind> kinds(estimators.begin(), estimators.end());
  if (kinds.size() != estimators.size()) {
    throw std::invalid_argument("estimator kinds must be distinct per run");
  }
  if (targets.empty()) throw std::invalid_argument("no targets configured");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0, 1)");
  }
  if (!(variance_floor > 0.0)) {
    throw std::invalid_argument("variance_floor must be positive");
  }
  if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
  if (format != "csv" && format != "json") {
    throw std::invalid_argument("format must be 'csv' or 'json'");
  }
  if (agent_refit_every < 1) {
    throw std::invalid_argument("agent_refit_every must be >= 1");
  }
  if (learned_rounds < 1) throw std::invalid_argument("learned_rounds must be >= 1");
  const bool env_source = source.kind == ExperimentSource::Kind::kEnvJson;
  for (const std::string& spec : targets) {
    if (starts_with(spec, "learned:") && env_source) {
      throw std::invalid_argument(
          "learned targets need a classification table source");
    }
    check_target_structure(spec);
  }
  if (env_source && source.logging_probs.empty()) {
    throw std::invalid_argument("env sources need logging_probs");
  }
}

std::shared_ptr<const TargetFunctional> make_target(
    const std::string& spec, int num_arms, const ClassificationTable* table,
    std::int64_t learned_rounds, std::uint64_t seed) {
  if (starts_with(spec, "arm:")) {
    return target_arm(parse_arm(spec.substr(4), spec), num_arms);
  }
  if (spec == "uniform") {
    return std::make_shared<UniformTarget>(num_arms);
  }
  if (starts_with(spec, "contrast:")) {
    std::string body = spec.substr(9);
    if (body.size() >= 2 && body.front() == '(' && body.back() == ')') {
      body = body.substr(1, body.size() - 2);
    }
    const auto comma = body.find_first_of(",:");
    if (comma == std::string::npos) {
      throw std::invalid_argument("target spec '" + spec +
                                  "': expected contrast:(k1,k2)");
    }
    const int k1 = parse_arm(body.substr(0, comma), spec);
    const int k2 = parse_arm(body.substr(comma + 1), spec);
    return std::make_shared<ContrastTarget>(k1, k2, num_arms);
  }
  if (starts_with(spec, "learned:")) {
    if (table == nullptr) {
      throw std::invalid_argument(
          "learned targets need a classification table source");
    }
    const auto engine = parse_engine(spec.substr(8));
    return target_learned(*table, learned_rounds, engine, seed);
  }
  throw std::invalid_argument("unknown target spec '" + spec + "'");
}

ExperimentConfig config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("config: expected an object");

  static const std::set<std::string> known = {
      "source",      "rounds",        "replications",      "estimators",
      "targets",     "training",      "outcome_model",     "refit_every",
      "tree",        "alpha",         "variance_floor",    "burn_in",
      "seed",        "parallelism",   "output",            "format",
      "agent",       "learned_rounds", "dataset_id",       "timing"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }

  ExperimentConfig cfg;
  try {
    const json& src = doc.at("source");
    if (src.contains("table_csv")) {
      cfg.source.kind = ExperimentSource::Kind::kTableCsv;
      cfg.source.path = src.at("table_csv").get<std::string>();
    } else if (src.contains("synthetic")) {
      const json& s = src.at("synthetic");
      cfg.source.kind = ExperimentSource::Kind::kSynthetic;
      cfg.source.rows = s.at("rows").get<std::int64_t>();
      cfg.source.classes = s.at("classes").get<int>();
      cfg.source.table_dim = s.at("dim").get<int>();
      cfg.source.table_seed = s.value("seed", std::uint64_t{0});
      cfg.source.spread = s.value("spread", 2.0);
      cfg.source.noise = s.value("noise", 1.0);
    } else if (src.contains("env_json")) {
      cfg.source.kind = ExperimentSource::Kind::kEnvJson;
      cfg.source.path = src.at("env_json").get<std::string>();
      cfg.source.logging_probs =
          src.at("logging_probs").get<std::vector<double>>();
    } else {
      throw std::invalid_argument(
          "config: source needs table_csv, synthetic, or env_json");
    }

    cfg.rounds = doc.at("rounds").get<std::int64_t>();
    cfg.replications = doc.at("replications").get<std::int64_t>();
    for (const auto& name : doc.at("estimators")) {
      cfg.estimators.push_back(estimator_kind_from_string(name.get<std::string>()));
    }
    cfg.targets = doc.at("targets").get<std::vector<std::string>>();
    cfg.training = parse_training(doc.value("training", std::string("sequential")));
    cfg.training.engine = parse_engine(doc.value("outcome_model", std::string("linear")));
    cfg.training.refit_every = doc.value("refit_every", std::int64_t{1});
    if (cfg.training.refit_every < 1) {
      throw std::invalid_argument("config: refit_every must be >= 1");
    }
    if (doc.contains("tree")) {
      cfg.training.tree.max_depth = doc["tree"].value("max_depth", -1);
      cfg.training.tree.min_samples_split = doc["tree"].value("min_samples_split", 2);
    }
    cfg.alpha = doc.value("alpha", 0.05);
    cfg.variance_floor = doc.value("variance_floor", 1e-4);
    cfg.burn_in = doc.value("burn_in", std::int64_t{-1});
    cfg.seed = doc.value("seed", std::uint64_t{0});
    cfg.parallelism = doc.value("parallelism", 1);
    cfg.output = doc.value("output", std::string());
    cfg.format = doc.value("format", std::string("csv"));
    if (doc.contains("agent")) {
      const json& agent = doc["agent"];
      cfg.agent_eps.c = agent.value("eps_c", 0.01);
      cfg.agent_eps.exponent = agent.value("eps_exponent", 1.0 / 3.0);
      cfg.agent_engine =
          parse_engine(agent.value("engine", std::string("tree")));
      cfg.agent_refit_every = agent.value("refit_every", std::int64_t{1});
    }
    cfg.learned_rounds = doc.value("learned_rounds", std::int64_t{500});
    cfg.dataset_id = doc.value("dataset_id", std::string());
    cfg.timing = doc.value("timing", true);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument(path + ": cannot open for reading");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  ExperimentConfig cfg = config_from_json(text);
  // Relative source paths are anchored at the config file, not the cwd.
  if (!cfg.source.path.empty()) {
    const std::filesystem::path src(cfg.source.path);
    if (src.is_relative()) {
      cfg.source.path =
          (std::filesystem::path(path).parent_path() / src).string();
    }
  }
  if (const char* env_seed = std::getenv("OPE_SEED")) {
    try {
      std::size_t used = 0;
      cfg.seed = std::stoull(env_seed, &used);
      if (used != std::string(env_seed).size()) {
        throw std::invalid_argument(env_seed);
      }
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("OPE_SEED='") + env_seed +
                                  "' is not an unsigned integer");
    }
  }
  return cfg;
}

std::vector<CoverageRow> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const ResolvedSource source = resolve_source(cfg);
  const std::string dataset_id =
      cfg.dataset_id.empty() ? derived_dataset_id(cfg.source) : cfg.dataset_id;
  const int num_arms =
      source.table ? source.table->num_arms : source.env->num_arms();

  // Targets and their ground truth are fixed across replications.
  std::vector<std::shared_ptr<const TargetFunctional>> targets;
  std::vector<double> psi0;
  for (const std::string& spec : cfg.targets) {
    auto gstar = make_target(spec, num_arms, source.table.get(),
                             cfg.learned_rounds, cfg.seed);
    psi0.push_back(source.table ? true_value(*source.table, *gstar)
                                : true_value_enumerable(*source.env, *gstar));
    targets.push_back(std::move(gstar));
  }

  const std::size_t num_targets = targets.size();
  const std::size_t num_estimators = cfg.estimators.size();
  const std::size_t cells = num_targets * num_estimators;
  const std::int64_t R = cfg.replications;

  // Outcomes indexed by [replication][target * num_estimators + estimator].
  std::vector<std::vector<CellOutcome>> outcomes(
      static_cast<std::size_t>(R), std::vector<CellOutcome>(cells));

  const bool share_uniform =
      std::any_of(cfg.estimators.begin(), cfg.estimators.end(), [](EstimatorKind k) {
        return k == EstimatorKind::kDM || k == EstimatorKind::kDR ||
               k == EstimatorKind::kADR || k == EstimatorKind::kCADR;
      });
  const std::size_t sigma_passes =
      static_cast<std::size_t>(
          std::count_if(cfg.estimators.begin(), cfg.estimators.end(),
                        [](EstimatorKind k) {
                          return k == EstimatorKind::kCADR ||
                                 k == EstimatorKind::kCAMRDR;
                        })) *
      num_targets;

  auto run_replication = [&](std::int64_t r) {
    LoggedDataset ds =
        source.table
            ? simulate_bandit(*source.table, cfg.rounds, cfg.agent_eps,
                              cfg.agent_engine, cfg.seed,
                              static_cast<std::uint64_t>(r),
                              cfg.agent_refit_every, cfg.training.tree)
            : simulate_env_fixed(*source.env, source.env_logging, cfg.rounds,
                                 cfg.seed, static_cast<std::uint64_t>(r));
    // Each sigma pass reads the full lower cross triangle; from the second
    // pass on, evaluating policies per read costs more than storing the
    // matrix once. The values are identical either way.
    if (sigma_passes >= 2) ds = ds.materialized();

    // The uniform-weighted model sequence ignores the target, so one fitting
    // pass per replication serves every uniform-weighted estimator under
    // every target; MRDR and CAMRDR refit under their own weightings.
    std::vector<OutcomeModelSnapshot> uniform_snaps;
    if (share_uniform) {
      TrainingSchedule uniform = cfg.training;
      uniform.weighting = TrainingSchedule::Weighting::kUniform;
      uniform.is_reference = nullptr;
      uniform_snaps = schedule_snapshots(ds, uniform, *targets[0]);
    }

    for (std::size_t ti = 0; ti < num_targets; ++ti) {
      const TargetFunctional& gstar = *targets[ti];
      for (std::size_t ei = 0; ei < num_estimators; ++ei) {
        const EstimatorKind kind = cfg.estimators[ei];
        EstimatorConfig ecfg;
        ecfg.kind = kind;
        ecfg.alpha = cfg.alpha;
        ecfg.variance_floor = cfg.variance_floor;
        ecfg.burn_in = cfg.burn_in;
        ecfg.training = cfg.training;

        CellOutcome& cell = outcomes[static_cast<std::size_t>(r)]
                                    [ti * num_estimators + ei];
        const auto start = std::chrono::steady_clock::now();
        try {
          const bool uniform_kind =
              kind == EstimatorKind::kDM || kind == EstimatorKind::kDR ||
              kind == EstimatorKind::kADR || kind == EstimatorKind::kCADR;
          const EstimateReport report =
              uniform_kind ? estimate(ds, gstar, ecfg, uniform_snaps)
                           : estimate(ds, gstar, ecfg);
          cell.psi = report.psi_hat;
          cell.width = report.ci_hi - report.ci_lo;
          cell.floor_hits = static_cast<double>(report.diagnostics.floor_hits);
          cell.covered = report.ci_lo <= psi0[ti] && psi0[ti] <= report.ci_hi;
        } catch (const std::exception&) {
          cell.failed = true;
        }
        if (cfg.timing) {
          cell.seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
        }
      }
    }
  };

  const int workers =
      static_cast<int>(std::min<std::int64_t>(cfg.parallelism, R));
  if (workers <= 1) {
    for (std::int64_t r = 0; r < R; ++r) run_replication(r);
  } else {
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          const std::int64_t r = next.fetch_add(1);
          if (r >= R) return;
          run_replication(r);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  // Ordered reduction over replications; identical for any worker count.
  std::vector<CoverageRow> rows;
  rows.reserve(cells);
  for (std::size_t ti = 0; ti < num_targets; ++ti) {
    for (std::size_t ei = 0; ei < num_estimators; ++ei) {
      CoverageRow row;
      row.dataset = dataset_id;
      row.target = cfg.targets[ti];
      row.estimator = cfg.estimators[ei];
      row.replications = R;
      std::int64_t covered = 0;
      std::int64_t failures = 0;
      NeumaierSum width_sum, psi_sum, sq_sum, floor_sum, seconds_sum;
      for (std::int64_t r = 0; r < R; ++r) {
        const CellOutcome& cell = outcomes[static_cast<std::size_t>(r)]
                                          [ti * num_estimators + ei];
        seconds_sum.add(cell.seconds);
        if (cell.failed) {
          ++failures;
          continue;
        }
        covered += cell.covered ? 1 : 0;
        width_sum.add(cell.width);
        psi_sum.add(cell.psi);
        const double dev = cell.psi - psi0[ti];
        sq_sum.add(dev * dev);
        floor_sum.add(cell.floor_hits);
      }
      const std::int64_t successes = R - failures;
      row.failures = failures;
      row.coverage = static_cast<double>(covered) / static_cast<double>(R);
      row.coverage_se =
          std::sqrt(row.coverage * (1.0 - row.coverage) / static_cast<double>(R));
      const double inv =
          successes > 0 ? 1.0 / static_cast<double>(successes)
                        : std::numeric_limits<double>::quiet_NaN();
      row.mean_width = width_sum.value() * inv;
      row.bias = psi_sum.value() * inv - psi0[ti];
      row.rmse = std::sqrt(sq_sum.value() * inv);
      row.floor_hits = floor_sum.value() * inv;
      row.seconds = seconds_sum.value();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string results_csv(std::span<const CoverageRow> rows) {
  std::string out =
      "dataset,target,estimator,R,coverage,coverage_se,mean_width,bias,rmse,"
      "floor_hits,failures,seconds\r\n";
  for (const CoverageRow& row : rows) {
    out += row.dataset + ',' + row.target + ',' + to_string(row.estimator) +
           ',' + std::to_string(row.replications) + ',' +
           format_double(row.coverage) + ',' + format_double(row.coverage_se) +
           ',' + format_double(row.mean_width) + ',' + format_double(row.bias) +
           ',' + format_double(row.rmse) + ',' + format_double(row.floor_hits) +
           ',' + std::to_string(row.failures) + ',' +
           format_double(row.seconds) + "\r\n";
  }
  return out;
}

std::string results_json(std::span<const CoverageRow> rows) {
  ordered_json arr = ordered_json::array();
  for (const CoverageRow& row : rows) {
    ordered_json r;
    r["dataset"] = row.dataset;
    r["target"] = row.target;
    r["estimator"] = to_string(row.estimator);
    r["R"] = row.replications;
    r["coverage"] = row.coverage;
    r["coverage_se"] = row.coverage_se;
    r["mean_width"] = row.mean_width;
    r["bias"] = row.bias;
    r["rmse"] = row.rmse;
    r["floor_hits"] = row.floor_hits;
    r["failures"] = row.failures;
    r["seconds"] = row.seconds;
    arr.push_back(std::move(r));
  }
  return arr.dump(2) + "\n";
}

std::vector<CoverageRow> results_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("results: ") + e.what());
  }
  std::vector<CoverageRow> rows;
  try {
    for (const json& r : doc) {
      CoverageRow row;
      row.dataset = r.at("dataset").get<std::string>();
      row.target = r.at("target").get<std::string>();
      row.estimator = estimator_kind_from_string(r.at("estimator").get<std::string>());
      row.replications = r.at("R").get<std::int64_t>();
      row.coverage = r.at("coverage").get<double>();
      row.coverage_se = r.at("coverage_se").get<double>();
      row.mean_width = r.at("mean_width").get<double>();
      row.bias = r.at("bias").get<double>();
      row.rmse = r.at("rmse").get<double>();
      row.floor_hits = r.at("floor_hits").get<double>();
      row.failures = r.at("failures").get<std::int64_t>();
      row.seconds = r.at("seconds").get<double>();
      rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("results: ") + e.what());
  }
  return rows;
}

void emit_results(std::span<const CoverageRow> rows, const std::string& format,
                  const std::string& path) {
  if (rows.empty()) throw std::invalid_argument("no result rows to write");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  if (format == "csv") {
    out << results_csv(rows);
  } else if (format == "json") {
    out << results_json(rows);
  } else {
    throw std::invalid_argument("format must be 'csv' or 'json'");
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace ope
