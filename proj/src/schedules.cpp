#include "ope/schedules.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace ope {

namespace {

const char* weighting_tag(TrainingSchedule::Weighting w) {
  switch (w) {
    case TrainingSchedule::Weighting::kUniform: return "uniform";
    case TrainingSchedule::Weighting::kMRDR: return "mrdr";
    case TrainingSchedule::Weighting::kImportanceSampled: return "is";
  }
  return "unknown";
}

OutcomeModelSnapshot fit_with(const TrainingSchedule& schedule,
                              std::span<const TrainingRow> rows, int num_arms,
                              int dim) {
  if (rows.empty()) {
    return zero_snapshot();
  }
  OutcomeModelSnapshot snap =
      schedule.engine == TrainingSchedule::Engine::kLinear
          ? fit_linear(rows, num_arms, dim)
          : fit_tree(rows, num_arms, dim, schedule.tree);
  snap.tag += std::string("+") + weighting_tag(schedule.weighting);
  return snap;
}

// Training rows in round order with weights applied and non-positive
// weights dropped; boundary[t] rows have round <= t.
struct WeightedRows {
  std::vector<TrainingRow> rows;
  std::vector<std::size_t> boundary;  // indexed 0..T
};

WeightedRows collect_rows(const LoggedDataset& ds,
                          const TrainingSchedule& schedule,
                          const TargetFunctional& gstar) {
  WeightedRows out;
  const std::int64_t n = ds.rounds();
  out.rows.reserve(static_cast<std::size_t>(n));
  out.boundary.resize(static_cast<std::size_t>(n) + 1, 0);
  for (std::int64_t s = 1; s <= n; ++s) {
    const double w = training_row_weight(schedule, gstar, ds, s);
    if (w > 0.0) {
      const Observation& o = ds.obs(s);
      out.rows.push_back({o.context, o.arm, o.reward, w});
    }
    out.boundary[static_cast<std::size_t>(s)] = out.rows.size();
  }
  return out;
}

void check_schedule(const TrainingSchedule& schedule) {
  if (schedule.mode == TrainingSchedule::Mode::kSequential &&
      schedule.refit_every < 1) {
    throw std::invalid_argument("TrainingSchedule: refit_every must be >= 1");
  }
  if (schedule.mode == TrainingSchedule::Mode::kCrossTime && schedule.folds < 2) {
    throw std::invalid_argument("TrainingSchedule: folds must be >= 2");
  }
}

}  // namespace

double training_row_weight(const TrainingSchedule& schedule,
                           const TargetFunctional& gstar,
                           const LoggedDataset& ds, std::int64_t s) {
  switch (schedule.weighting) {
    case TrainingSchedule::Weighting::kUniform:
      return 1.0;
    case TrainingSchedule::Weighting::kMRDR: {
      const Observation& o = ds.obs(s);
      const double gs = ds.logged_propensity(s);
      return gstar.weight(o.arm, o.context) * (1.0 - gs) / (gs * gs);
    }
    case TrainingSchedule::Weighting::kImportanceSampled: {
      const Observation& o = ds.obs(s);
      const double gs = ds.logged_propensity(s);
      const TargetFunctional& ref =
          schedule.is_reference ? *schedule.is_reference : gstar;
      return ref.weight(o.arm, o.context) / gs;
    }
  }
  throw std::logic_error("training_row_weight: bad weighting");
}

void for_each_snapshot(
    const LoggedDataset& ds, const TrainingSchedule& schedule,
    const TargetFunctional& gstar,
    const std::function<void(std::int64_t, const OutcomeModelSnapshot&)>& fn) {
  check_schedule(schedule);
  const std::int64_t n = ds.rounds();
  const int K = ds.num_arms();
  const int dim = ds.dim();

  if (schedule.mode == TrainingSchedule::Mode::kSequential) {
    const WeightedRows wr = collect_rows(ds, schedule, gstar);
    OutcomeModelSnapshot current = zero_snapshot();
    for (std::int64_t t = 1; t <= n; ++t) {
      if ((t - 1) % schedule.refit_every == 0) {
        const std::size_t count = wr.boundary[static_cast<std::size_t>(t - 1)];
        current = fit_with(schedule,
                           std::span<const TrainingRow>(wr.rows.data(), count),
                           K, dim);
      }
      fn(t, current);
    }
    return;
  }

  // CrossTime
  const int F = schedule.folds;
  if (n < F) {
    throw std::invalid_argument("crosstime: fewer rounds than folds");
  }
  const std::int64_t base = n / F;
  const auto fold_of = [&](std::int64_t t) {
    return static_cast<int>(std::min<std::int64_t>((t - 1) / base + 1, F));
  };
  const WeightedRows wr = collect_rows(ds, schedule, gstar);
  // Round index of each kept row, for fold filtering.
  std::vector<std::int64_t> row_round;
  row_round.reserve(wr.rows.size());
  {
    std::size_t k = 0;
    for (std::int64_t s = 1; s <= n; ++s) {
      while (k < wr.boundary[static_cast<std::size_t>(s)]) {
        row_round.push_back(s);
        ++k;
      }
    }
  }
  std::vector<OutcomeModelSnapshot> models;
  models.reserve(static_cast<std::size_t>(F));
  for (int f = 1; f <= F; ++f) {
    const int excluded_next = std::min(f + 1, F);
    std::vector<TrainingRow> train;
    for (std::size_t i = 0; i < wr.rows.size(); ++i) {
      const int rf = fold_of(row_round[i]);
      if (rf != f && rf != excluded_next) {
        train.push_back(wr.rows[i]);
      }
    }
    models.push_back(fit_with(schedule, train, K, dim));
  }
  for (std::int64_t t = 1; t <= n; ++t) {
    fn(t, models[static_cast<std::size_t>(fold_of(t) - 1)]);
  }
}

std::vector<OutcomeModelSnapshot> sequential_snapshots(
    const LoggedDataset& ds, const TrainingSchedule& schedule,
    const TargetFunctional& gstar) {
  TrainingSchedule s = schedule;
  s.mode = TrainingSchedule::Mode::kSequential;
  std::vector<OutcomeModelSnapshot> out;
  out.reserve(static_cast<std::size_t>(ds.rounds()));
  for_each_snapshot(ds, s, gstar,
                    [&](std::int64_t, const OutcomeModelSnapshot& snap) {
                      out.push_back(snap);
                    });
  return out;
}

std::vector<OutcomeModelSnapshot> crosstime_snapshots(
    const LoggedDataset& ds, const TrainingSchedule& schedule,
    const TargetFunctional& gstar) {
  TrainingSchedule s = schedule;
  s.mode = TrainingSchedule::Mode::kCrossTime;
  std::vector<OutcomeModelSnapshot> out;
  out.reserve(static_cast<std::size_t>(ds.rounds()));
  for_each_snapshot(ds, s, gstar,
                    [&](std::int64_t, const OutcomeModelSnapshot& snap) {
                      out.push_back(snap);
                    });
  return out;
}

std::vector<OutcomeModelSnapshot> schedule_snapshots(
    const LoggedDataset& ds, const TrainingSchedule& schedule,
    const TargetFunctional& gstar) {
  return schedule.mode == TrainingSchedule::Mode::kSequential
             ? sequential_snapshots(ds, schedule, gstar)
             : crosstime_snapshots(ds, schedule, gstar);
}

}  // namespace ope
