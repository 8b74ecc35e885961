#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "ope/outcome_models.hpp"
#include "ope/types.hpp"

namespace ope {

// How the per-round outcome-model sequence is produced.
struct TrainingSchedule {
  enum class Mode { kSequential, kCrossTime };
  enum class Engine { kLinear, kTree };
  enum class Weighting { kUniform, kMRDR, kImportanceSampled };

  Mode mode = Mode::kSequential;
  std::int64_t refit_every = 1;  // Sequential: refit when (t-1) % refit_every == 0
  int folds = 4;                 // CrossTime
  Engine engine = Engine::kLinear;
  Weighting weighting = Weighting::kUniform;
  // ImportanceSampled numerator; when null the estimand's target is used.
  std::shared_ptr<const TargetFunctional> is_reference;
  TreeOptions tree;
};

// Training weight of observation s (1-based) under the schedule's weighting.
// Uniform: 1. MRDR: g*(A|X)(1-g_s(A|X))/g_s(A|X)^2. ImportanceSampled:
// ref(A|X)/g_s(A|X). Rows whose weight is not strictly positive are dropped
// from training sets.
double training_row_weight(const TrainingSchedule& schedule,
                           const TargetFunctional& gstar,
                           const LoggedDataset& ds, std::int64_t s);

// Element t-1 is the model in force at round t, fitted only on rounds
// 1..t-1 and refreshed every refit_every rounds; element 0 predicts zero.
std::vector<OutcomeModelSnapshot> sequential_snapshots(
    const LoggedDataset& ds, const TrainingSchedule& schedule,
    const TargetFunctional& gstar);

// Rounds are cut into `folds` contiguous blocks (the last absorbs the
// remainder); the model for fold f trains on every fold except f and
// min(f+1, folds), and element t-1 is the model of t's fold. Rounds in
// folds with an empty training set get the zero-prediction snapshot.
std::vector<OutcomeModelSnapshot> crosstime_snapshots(
    const LoggedDataset& ds, const TrainingSchedule& schedule,
    const TargetFunctional& gstar);

// Dispatch on schedule.mode.
std::vector<OutcomeModelSnapshot> schedule_snapshots(
    const LoggedDataset& ds, const TrainingSchedule& schedule,
    const TargetFunctional& gstar);

// Streaming variant: invokes fn(t, snapshot) for t = 1..T in round order
// without retaining the whole sequence (sequential tree fits at large T
// would otherwise hold every tree in memory at once).
void for_each_snapshot(
    const LoggedDataset& ds, const TrainingSchedule& schedule,
    const TargetFunctional& gstar,
    const std::function<void(std::int64_t, const OutcomeModelSnapshot&)>& fn);

}  // namespace ope
