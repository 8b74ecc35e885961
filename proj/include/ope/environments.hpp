#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ope/outcome_models.hpp"
#include "ope/schedules.hpp"
#include "ope/types.hpp"

namespace ope {

// Classification rows turned into a K-armed bandit: pulling the arm equal to
// the row's label pays N(1, 1), any other arm pays N(0, 1).
struct ClassificationTable {
  std::vector<std::vector<double>> contexts;
  std::vector<int> labels;  // 1..num_arms
  int num_arms = 0;

  std::int64_t num_rows() const { return static_cast<std::int64_t>(labels.size()); }
  int dim() const { return contexts.empty() ? 0 : static_cast<int>(contexts[0].size()); }

  // Throws std::invalid_argument on empty tables, ragged contexts, or labels
  // outside [1, num_arms].
  void validate() const;
};

// Gaussian class blobs: class k is centered at spread * e_{(k-1) mod dim}.
ClassificationTable synthetic_table(std::int64_t rows, int num_classes, int dim,
                                    std::uint64_t seed, double spread = 2.0,
                                    double noise = 1.0);

// Exploration rate eps_t = c * t^{-exponent}, clamped into (0, 1].
struct EpsilonSchedule {
  double c = 0.01;
  double exponent = 1.0 / 3.0;

  double epsilon(std::int64_t t) const;
};

// Non-empty iff the schedule decays faster than t^{-1/2}, in which case the
// per-arm exploration floor eps_t / K shrinks too quickly for the stabilized
// estimator's variance guarantees. Callers print the message once per run.
std::optional<std::string> exploration_warning(const EpsilonSchedule& sched);

// Uniform over the arms not pulled yet; zero mass elsewhere. Used for the
// first K rounds of a bandit simulation.
class RoundRobinPolicy final : public Policy {
 public:
  RoundRobinPolicy(std::vector<int> remaining, int num_arms);
  int num_arms() const override { return num_arms_; }
  double propensity(int arm, std::span<const double>) const override;
  const std::vector<int>& remaining() const { return remaining_; }

 private:
  std::vector<int> remaining_;
  int num_arms_;
};

// eps/K on every arm plus 1 - eps on the frozen model's greedy arm.
class EpsilonGreedyPolicy final : public Policy {
 public:
  EpsilonGreedyPolicy(std::shared_ptr<const OutcomeModel> model, double epsilon,
                      int num_arms);
  int num_arms() const override { return num_arms_; }
  double propensity(int arm, std::span<const double> x) const override;
  // Ties break toward the lowest arm index.
  int greedy_arm(std::span<const double> x) const;
  double epsilon() const { return epsilon_; }
  const std::shared_ptr<const OutcomeModel>& model() const { return model_; }

 private:
  std::shared_ptr<const OutcomeModel> model_;
  double epsilon_;
  int num_arms_;
};

// Adaptive epsilon-greedy logging run. Rounds 1..K pull each arm once in a
// seed-determined random order (logged propensity 1/#remaining); from round
// K+1 on, the agent refits its reward model on all past rounds every
// agent_refit_every rounds and explores at eps_t. Every round stores a
// replayable snapshot of the policy actually sampled from.
LoggedDataset simulate_bandit(const ClassificationTable& table,
                              std::int64_t rounds, const EpsilonSchedule& sched,
                              TrainingSchedule::Engine agent_engine,
                              std::uint64_t seed, std::uint64_t replication = 0,
                              std::int64_t agent_refit_every = 1,
                              const TreeOptions& tree = {});

// Deterministic policy that plays the frozen model's greedy arm.
class LearnedTarget final : public TargetFunctional {
 public:
  LearnedTarget(std::shared_ptr<const OutcomeModel> model, int num_arms);
  int num_arms() const override { return num_arms_; }
  double weight(int arm, std::span<const double> x) const override;
  Kind kind() const override { return Kind::kPolicy; }
  double bound() const override { return 1.0; }
  int chosen_arm(std::span<const double> x) const;
  const std::shared_ptr<const OutcomeModel>& model() const { return model_; }

 private:
  std::shared_ptr<const OutcomeModel> model_;
  int num_arms_;
};

// Point-mass target on arm k.
std::shared_ptr<const TargetFunctional> target_arm(int k, int num_arms);

// Rolls out `rounds` draws from the table under the uniform policy, fits the
// chosen engine on them, and freezes the greedy policy of that model.
std::shared_ptr<const LearnedTarget> target_learned(
    const ClassificationTable& table, std::int64_t rounds,
    TrainingSchedule::Engine engine, std::uint64_t seed,
    const TreeOptions& tree = {});

// Exact target value: contexts are uniform over rows and E[Y | a, x_i] is
// the label indicator, so the value is the row average of g*(L_i | x_i).
double true_value(const ClassificationTable& table, const TargetFunctional& gstar);

}  // namespace ope
