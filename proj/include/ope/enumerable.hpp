#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ope/types.hpp"

namespace ope {

// Same arm distribution at every context.
class FixedPolicy final : public Policy {
 public:
  explicit FixedPolicy(std::vector<double> probs);
  int num_arms() const override { return static_cast<int>(probs_.size()); }
  double propensity(int arm, std::span<const double>) const override {
    return probs_[static_cast<std::size_t>(arm - 1)];
  }
  const std::vector<double>& probs() const { return probs_; }

 private:
  std::vector<double> probs_;
};

struct RewardAtom {
  double value = 0.0;
  double prob = 0.0;
};

// Fully enumerable bandit environment: finitely many contexts, arms, and
// reward values. Everything of interest (policy values, gradient moments)
// reduces to finite sums, so this is the substrate for exact oracles.
struct EnumerableEnvironment {
  std::vector<std::vector<double>> contexts;
  std::vector<double> context_probs;
  // atoms[c][a-1]: reward distribution at (contexts[c], arm a).
  std::vector<std::vector<std::vector<RewardAtom>>> atoms;

  int num_contexts() const { return static_cast<int>(contexts.size()); }
  int num_arms() const {
    return atoms.empty() ? 0 : static_cast<int>(atoms[0].size());
  }
  int dim() const {
    return contexts.empty() ? 0 : static_cast<int>(contexts[0].size());
  }

  // Exact conditional mean reward.
  double qbar0(int context_index, int arm) const;

  // Throws std::invalid_argument when probabilities do not sum to 1, any
  // probability is negative, or shapes are ragged.
  void validate() const;

  std::string to_json() const;
  static EnumerableEnvironment from_json(const std::string& text);
};

// Exact policy value: sum over contexts, arms, and reward atoms.
double true_value_enumerable(const EnumerableEnvironment& env,
                             const TargetFunctional& gstar);

// T rounds logged under a fixed policy; all snapshots share the policy.
LoggedDataset simulate_env_fixed(const EnumerableEnvironment& env,
                                 std::shared_ptr<const Policy> policy,
                                 std::int64_t rounds, std::uint64_t seed,
                                 std::uint64_t replication);

}  // namespace ope
