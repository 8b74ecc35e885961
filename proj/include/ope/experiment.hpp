#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ope/enumerable.hpp"
#include "ope/environments.hpp"
#include "ope/estimators.hpp"
#include "ope/schedules.hpp"

namespace ope {

// Where replication datasets come from.
struct ExperimentSource {
  enum class Kind { kTableCsv, kSynthetic, kEnvJson };

  Kind kind = Kind::kSynthetic;
  std::string path;  // table csv or environment json

  // kSynthetic parameters.
  std::int64_t rows = 200;
  int classes = 3;
  int table_dim = 4;
  std::uint64_t table_seed = 0;
  double spread = 2.0;
  double noise = 1.0;

  // kEnvJson logging policy (one probability per arm).
  std::vector<double> logging_probs;
};

struct ExperimentConfig {
  ExperimentSource source;
  std::int64_t rounds = 1000;
  std::int64_t replications = 1;
  std::vector<EstimatorKind> estimators;
  std::vector<std::string> targets;  // arm:k | learned:linear | learned:tree |
                                     // contrast:(k1,k2) | uniform
  TrainingSchedule training;         // engine, mode, cadence for the estimators
  double alpha = 0.05;
  double variance_floor = 1e-4;
  std::int64_t burn_in = -1;
  std::uint64_t seed = 0;
  int parallelism = 1;
  std::string output;
  std::string format = "csv";  // csv | json

  // Bandit sources only.
  EpsilonSchedule agent_eps;
  TrainingSchedule::Engine agent_engine = TrainingSchedule::Engine::kTree;
  std::int64_t agent_refit_every = 1;
  std::int64_t learned_rounds = 500;  // rollout size for learned targets

  // Row label in the results; derived from the source when empty.
  std::string dataset_id;
  // When false the seconds column is written as 0 so result files are
  // byte-identical across runs.
  bool timing = true;

  // Throws std::invalid_argument on contradictions (no estimators, duplicate
  // kinds, R < 1, malformed target specs, learned targets on env sources).
  void validate() const;
};

// Parses the JSON configuration document. Unknown keys are errors.
ExperimentConfig config_from_json(const std::string& text);
// Reads the file, applies the OPE_SEED environment override, validates.
ExperimentConfig load_config(const std::string& path);

struct CoverageRow {
  std::string dataset;
  std::string target;
  EstimatorKind estimator = EstimatorKind::kDR;
  std::int64_t replications = 0;
  double coverage = 0.0;     // covering replications / R (failures never cover)
  double coverage_se = 0.0;  // sqrt(cov (1-cov) / R)
  double mean_width = 0.0;   // over successful replications
  double bias = 0.0;         // mean psi_hat - psi0 over successes
  double rmse = 0.0;
  double floor_hits = 0.0;   // mean over successes
  std::int64_t failures = 0;
  double seconds = 0.0;      // estimation wall time summed over replications
};

// One row per (target, estimator) in configuration order. Replications run
// in disjoint RNG streams; results are identical for any parallelism.
std::vector<CoverageRow> run_experiment(const ExperimentConfig& cfg);

// `dataset,target,estimator,R,coverage,coverage_se,mean_width,bias,rmse,
// floor_hits,failures,seconds`, RFC-4180 (CRLF line ends, one header row).
std::string results_csv(std::span<const CoverageRow> rows);
std::string results_json(std::span<const CoverageRow> rows);
std::vector<CoverageRow> results_from_json(const std::string& text);
void emit_results(std::span<const CoverageRow> rows, const std::string& format,
                  const std::string& path);

// Builds the target a spec names. `table` may be null when no learned target
// is requested; learned targets replay the rollout stream of `seed`.
std::shared_ptr<const TargetFunctional> make_target(
    const std::string& spec, int num_arms, const ClassificationTable* table,
    std::int64_t learned_rounds, std::uint64_t seed);

}  // namespace ope
