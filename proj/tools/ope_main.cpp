#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ope/csv.hpp"
#include "ope/environments.hpp"
#include "ope/experiment.hpp"
#include "ope/types.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct SimulateArgs {
  std::string table;
  std::int64_t rounds = 0;
  double eps_c = 0.01;
  double eps_exp = 1.0 / 3.0;
  std::uint64_t seed = 0;
  std::uint64_t replication = 0;
  std::string agent = "tree";
  std::int64_t agent_refit_every = 1;
  std::string out;
};

int run_simulate(const SimulateArgs& args) {
  const ope::ClassificationTable table = ope::load_table_csv(args.table);
  ope::EpsilonSchedule sched{args.eps_c, args.eps_exp};
  if (const auto warning = ope::exploration_warning(sched)) {
    std::cerr << "warning: " << *warning << "\n";
  }
  const auto engine = args.agent == "linear"
                          ? ope::TrainingSchedule::Engine::kLinear
                          : ope::TrainingSchedule::Engine::kTree;
  if (args.agent != "linear" && args.agent != "tree") {
    throw std::invalid_argument("--agent must be linear or tree");
  }
  const ope::LoggedDataset ds =
      ope::simulate_bandit(table, args.rounds, sched, engine, args.seed,
                           args.replication, args.agent_refit_every);
  ope::save_dataset(ds, args.out);
  std::cout << "wrote " << args.out << " (" << ds.rounds() << " rounds, "
            << ds.num_arms() << " arms)\n";
  return 0;
}

struct EstimateArgs {
  std::string dataset;
  std::string target;
  std::string estimators;
  std::string outcome_model = "linear";
  std::string training = "sequential";
  std::int64_t refit_every = 1;
  double alpha = 0.05;
  double variance_floor = 1e-4;
  std::int64_t burn_in = -1;
  bool materialize_dprime = false;
  std::string table;
  std::int64_t learned_rounds = 500;
  std::uint64_t seed = 0;
  std::string out;
};

int run_estimate(const EstimateArgs& args) {
  const ope::LoggedDataset ds = ope::load_dataset(args.dataset);
  const auto violations = ope::validate_dataset(ds);
  if (!violations.empty()) {
    throw std::runtime_error(args.dataset + ": " + violations.front().rule +
                             ": " + violations.front().detail);
  }

  std::unique_ptr<ope::ClassificationTable> table;
  if (!args.table.empty()) {
    table = std::make_unique<ope::ClassificationTable>(
        ope::load_table_csv(args.table));
  }
  const auto gstar =
      ope::make_target(args.target, ds.num_arms(), table.get(),
                       args.learned_rounds, args.seed);

  ope::EstimatorConfig cfg;
  cfg.alpha = args.alpha;
  cfg.variance_floor = args.variance_floor;
  cfg.burn_in = args.burn_in;
  cfg.materialize_dprime = args.materialize_dprime;
  if (args.training == "sequential") {
    cfg.training.mode = ope::TrainingSchedule::Mode::kSequential;
  } else if (args.training.rfind("crosstime:", 0) == 0) {
    cfg.training.mode = ope::TrainingSchedule::Mode::kCrossTime;
    cfg.training.folds = std::stoi(args.training.substr(10));
  } else {
    throw std::invalid_argument("--training must be sequential or crosstime:F");
  }
  if (args.outcome_model == "linear") {
    cfg.training.engine = ope::TrainingSchedule::Engine::kLinear;
  } else if (args.outcome_model == "tree") {
    cfg.training.engine = ope::TrainingSchedule::Engine::kTree;
  } else {
    throw std::invalid_argument("--outcome-model must be linear or tree");
  }
  cfg.training.refit_every = args.refit_every;

  nlohmann::ordered_json reports = nlohmann::ordered_json::array();
  for (const std::string& name : split_list(args.estimators)) {
    cfg.kind = ope::estimator_kind_from_string(name);
    const ope::EstimateReport report = ope::estimate(ds, *gstar, cfg);
    reports.push_back(nlohmann::ordered_json::parse(report.to_json()));
  }
  if (reports.empty()) throw std::invalid_argument("--estimators is empty");

  const std::string text = reports.dump(2) + "\n";
  if (args.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(args.out, std::ios::binary);
    if (!out) throw std::runtime_error(args.out + ": cannot open for writing");
    out << text;
    if (!out) throw std::runtime_error(args.out + ": write failed");
    std::cout << "wrote " << args.out << "\n";
  }
  return 0;
}

struct BenchArgs {
  std::string config;
  std::string out;
  int parallel = 0;
  std::string format;
};

int run_bench(const BenchArgs& args) {
  ope::ExperimentConfig cfg = ope::load_config(args.config);
  if (args.parallel > 0) cfg.parallelism = args.parallel;
  if (!args.out.empty()) cfg.output = args.out;
  if (!args.format.empty()) cfg.format = args.format;
  cfg.validate();
  if (cfg.output.empty()) {
    throw std::invalid_argument("no output path (config.output or --out)");
  }
  const auto rows = ope::run_experiment(cfg);
  ope::emit_results(rows, cfg.format, cfg.output);
  std::cout << "wrote " << cfg.output << " (" << rows.size() << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"off-policy evaluation for adaptively logged bandit data"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "log an epsilon-greedy bandit run over a labeled table");
  simulate->add_option("--table", sim.table, "classification table csv")
      ->required();
  simulate->add_option("--t", sim.rounds, "number of rounds")->required();
  simulate->add_option("--eps-c", sim.eps_c, "exploration scale c");
  simulate->add_option("--eps-exp", sim.eps_exp, "exploration decay exponent");
  simulate->add_option("--seed", sim.seed, "master seed");
  simulate->add_option("--replication", sim.replication, "replication stream");
  simulate->add_option("--agent", sim.agent, "agent model: linear|tree");
  simulate->add_option("--agent-refit-every", sim.agent_refit_every,
                       "agent refit cadence");
  simulate->add_option("--out", sim.out, "output dataset directory")
      ->required();

  EstimateArgs est;
  CLI::App* estimate = app.add_subcommand(
      "estimate", "estimate a target policy's value from a logged dataset");
  estimate->add_option("--dataset", est.dataset, "dataset directory")
      ->required();
  estimate->add_option("--target", est.target,
                       "arm:k | uniform | contrast:(k1,k2) | learned:ENGINE")
      ->required();
  estimate->add_option("--estimators", est.estimators,
                       "comma list: cadr,dr,ipw,dm,mrdr,adr,camrdr")
      ->required();
  estimate->add_option("--outcome-model", est.outcome_model, "linear|tree");
  estimate->add_option("--training", est.training, "sequential|crosstime:F");
  estimate->add_option("--refit-every", est.refit_every,
                       "sequential refit cadence");
  estimate->add_option("--alpha", est.alpha, "CI level is 1-alpha");
  estimate->add_option("--variance-floor", est.variance_floor,
                       "lower bound on sigma_t^2");
  estimate->add_option("--burn-in", est.burn_in,
                       "rounds with sigma_t = 1 (-1: max(10, K+1))");
  estimate->add_flag("--materialize-dprime", est.materialize_dprime,
                     "precompute the full gradient table (more memory)");
  estimate->add_option("--table", est.table,
                       "classification table csv (learned targets only)");
  estimate->add_option("--learned-rounds", est.learned_rounds,
                       "rollout length for learned targets");
  estimate->add_option("--seed", est.seed, "seed for learned-target rollouts");
  estimate->add_option("--out", est.out, "report path (default: stdout)");

  BenchArgs bench;
  CLI::App* bench_cmd = app.add_subcommand(
      "bench", "run a replicated coverage experiment from a config file");
  bench_cmd->add_option("--config", bench.config, "experiment config json")
      ->required();
  bench_cmd->add_option("--out", bench.out, "results path");
  bench_cmd->add_option("--parallel", bench.parallel, "worker threads");
  bench_cmd->add_option("--format", bench.format, "csv|json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (simulate->parsed()) return run_simulate(sim);
    if (estimate->parsed()) return run_estimate(est);
    return run_bench(bench);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
