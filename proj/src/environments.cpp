#include "ope/environments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ope/rng.hpp"
#include "ope/stats.hpp"

namespace ope {

void ClassificationTable::validate() const {
  if (labels.empty()) throw std::invalid_argument("table has no rows");
  if (contexts.size() != labels.size()) {
    throw std::invalid_argument("table has " + std::to_string(contexts.size()) +
                                " contexts for " + std::to_string(labels.size()) +
                                " labels");
  }
  if (num_arms < 1) throw std::invalid_argument("table needs at least one class");
  const std::size_t d = contexts[0].size();
  if (d == 0) throw std::invalid_argument("table contexts are empty vectors");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (contexts[i].size() != d) {
      throw std::invalid_argument("row " + std::to_string(i + 1) +
                                  " has context length " +
                                  std::to_string(contexts[i].size()) +
                                  ", expected " + std::to_string(d));
    }
    for (double x : contexts[i]) {
      if (!std::isfinite(x)) {
        throw std::invalid_argument("row " + std::to_string(i + 1) +
                                    " has a non-finite context coordinate");
      }
    }
    if (labels[i] < 1 || labels[i] > num_arms) {
      throw std::invalid_argument("row " + std::to_string(i + 1) + " has label " +
                                  std::to_string(labels[i]) + " outside [1, " +
                                  std::to_string(num_arms) + "]");
    }
  }
}

ClassificationTable synthetic_table(std::int64_t rows, int num_classes, int dim,
                                    std::uint64_t seed, double spread,
                                    double noise) {
  if (rows < 1) throw std::invalid_argument("synthetic table needs rows >= 1");
  if (num_classes < 1 || dim < 1) {
    throw std::invalid_argument("synthetic table needs num_classes >= 1 and dim >= 1");
  }
  StreamRng rng = StreamRng::substream(seed, 0, rng_purpose::kTable);
  ClassificationTable table;
  table.num_arms = num_classes;
  table.contexts.reserve(static_cast<std::size_t>(rows));
  table.labels.reserve(static_cast<std::size_t>(rows));
  for (std::int64_t i = 0; i < rows; ++i) {
    const int label = rng.next_index(num_classes) + 1;
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) {
      x[static_cast<std::size_t>(j)] = noise * rng.next_normal();
    }
    x[static_cast<std::size_t>((label - 1) % dim)] += spread;
    table.contexts.push_back(std::move(x));
    table.labels.push_back(label);
  }
  table.validate();
  return table;
}

double EpsilonSchedule::epsilon(std::int64_t t) const {
  if (t < 1) throw std::invalid_argument("epsilon schedule is defined for t >= 1");
  if (!(c > 0.0)) throw std::invalid_argument("epsilon schedule needs c > 0");
  const double eps = c * std::pow(static_cast<double>(t), -exponent);
  return std::min(eps, 1.0);
}

std::optional<std::string> exploration_warning(const EpsilonSchedule& sched) {
  if (sched.exponent > 0.5) {
    return "exploration rate c*t^-" + std::to_string(sched.exponent) +
           " decays faster than t^-1/2; variance estimates may be unstable";
  }
  return std::nullopt;
}

RoundRobinPolicy::RoundRobinPolicy(std::vector<int> remaining, int num_arms)
    : remaining_(std::move(remaining)), num_arms_(num_arms) {
  if (remaining_.empty()) {
    throw std::invalid_argument("round-robin policy needs a non-empty arm pool");
  }
  for (int a : remaining_) {
    if (a < 1 || a > num_arms_) {
      throw std::invalid_argument("round-robin arm " + std::to_string(a) +
                                  " outside [1, " + std::to_string(num_arms_) + "]");
    }
  }
}

double RoundRobinPolicy::propensity(int arm, std::span<const double>) const {
  const bool live = std::find(remaining_.begin(), remaining_.end(), arm) !=
                    remaining_.end();
  return live ? 1.0 / static_cast<double>(remaining_.size()) : 0.0;
}

EpsilonGreedyPolicy::EpsilonGreedyPolicy(std::shared_ptr<const OutcomeModel> model,
                                         double epsilon, int num_arms)
    : model_(std::move(model)), epsilon_(epsilon), num_arms_(num_arms) {
  if (model_ == nullptr) throw std::invalid_argument("epsilon-greedy needs a model");
  if (!(epsilon_ > 0.0) || epsilon_ > 1.0) {
    throw std::invalid_argument("epsilon must lie in (0, 1]");
  }
  if (num_arms_ < 1) throw std::invalid_argument("epsilon-greedy needs arms");
}

int EpsilonGreedyPolicy::greedy_arm(std::span<const double> x) const {
  int best = 1;
  double best_value = model_->predict(1, x);
  for (int a = 2; a <= num_arms_; ++a) {
    const double v = model_->predict(a, x);
    if (v > best_value) {
      best = a;
      best_value = v;
    }
  }
  return best;
}

double EpsilonGreedyPolicy::propensity(int arm, std::span<const double> x) const {
  const double base = epsilon_ / static_cast<double>(num_arms_);
  return arm == greedy_arm(x) ? 1.0 - epsilon_ + base : base;
}

namespace {

OutcomeModelSnapshot fit_agent(std::span<const TrainingRow> rows, int num_arms,
                               int dim, TrainingSchedule::Engine engine,
                               const TreeOptions& tree) {
  if (engine == TrainingSchedule::Engine::kLinear) {
    return fit_linear(rows, num_arms, dim);
  }
  return fit_tree(rows, num_arms, dim, tree);
}

}  // namespace

LoggedDataset simulate_bandit(const ClassificationTable& table,
                              std::int64_t rounds, const EpsilonSchedule& sched,
                              TrainingSchedule::Engine agent_engine,
                              std::uint64_t seed, std::uint64_t replication,
                              std::int64_t agent_refit_every,
                              const TreeOptions& tree) {
  table.validate();
  const int K = table.num_arms;
  const int d = table.dim();
  if (rounds < K) {
    throw std::invalid_argument("need at least " + std::to_string(K) +
                                " rounds to pull every arm once, got " +
                                std::to_string(rounds));
  }
  if (agent_refit_every < 1) {
    throw std::invalid_argument("agent_refit_every must be positive");
  }

  StreamRng ctx_rng = StreamRng::substream(seed, replication, rng_purpose::kContext);
  StreamRng arm_rng = StreamRng::substream(seed, replication, rng_purpose::kArm);
  StreamRng reward_rng = StreamRng::substream(seed, replication, rng_purpose::kReward);
  StreamRng init_rng = StreamRng::substream(seed, replication, rng_purpose::kInitOrder);

  // Arm pulled at initial round t is pull_order[t-1] + 1.
  const std::vector<int> pull_order = init_rng.shuffled_indices(K);

  std::vector<Observation> obs;
  std::vector<double> logged;
  std::vector<PolicySnapshot> snaps;
  std::vector<TrainingRow> history;
  obs.reserve(static_cast<std::size_t>(rounds));
  logged.reserve(static_cast<std::size_t>(rounds));
  snaps.reserve(static_cast<std::size_t>(rounds));
  history.reserve(static_cast<std::size_t>(rounds));

  std::shared_ptr<const OutcomeModel> agent_model;
  std::vector<double> probs(static_cast<std::size_t>(K));

  for (std::int64_t t = 1; t <= rounds; ++t) {
    const int row = ctx_rng.next_index(static_cast<int>(table.num_rows()));
    const std::vector<double>& x = table.contexts[static_cast<std::size_t>(row)];
    const int label = table.labels[static_cast<std::size_t>(row)];

    int arm = 0;
    double g_logged = 0.0;
    std::shared_ptr<const Policy> policy;
    double floor = 0.0;
    if (t <= K) {
      std::vector<int> remaining(pull_order.begin() + (t - 1), pull_order.end());
      for (int& a : remaining) ++a;
      std::sort(remaining.begin(), remaining.end());
      arm = pull_order[static_cast<std::size_t>(t - 1)] + 1;
      g_logged = 1.0 / static_cast<double>(remaining.size());
      floor = g_logged;
      policy = std::make_shared<RoundRobinPolicy>(std::move(remaining), K);
    } else {
      if ((t - K - 1) % agent_refit_every == 0) {
        agent_model = fit_agent(history, K, d, agent_engine, tree).model;
      }
      const double eps = sched.epsilon(t);
      auto greedy = std::make_shared<EpsilonGreedyPolicy>(agent_model, eps, K);
      const int best = greedy->greedy_arm(x);
      const double base = eps / static_cast<double>(K);
      for (int a = 1; a <= K; ++a) {
        probs[static_cast<std::size_t>(a - 1)] =
            a == best ? 1.0 - eps + base : base;
      }
      arm = arm_rng.next_categorical(probs) + 1;
      g_logged = probs[static_cast<std::size_t>(arm - 1)];
      floor = base;
      policy = std::move(greedy);
    }

    const double mean = arm == label ? 1.0 : 0.0;
    const double y = mean + reward_rng.next_normal();
    obs.push_back({t, x, arm, y});
    logged.push_back(g_logged);
    snaps.push_back({std::move(policy), t, floor});
    history.push_back({obs.back().context, arm, y, 1.0});
  }

  return LoggedDataset(K, d, std::move(obs), std::move(logged), std::move(snaps));
}

LearnedTarget::LearnedTarget(std::shared_ptr<const OutcomeModel> model,
                             int num_arms)
    : model_(std::move(model)), num_arms_(num_arms) {
  if (model_ == nullptr) throw std::invalid_argument("learned target needs a model");
  if (num_arms_ < 1) throw std::invalid_argument("learned target needs arms");
}

int LearnedTarget::chosen_arm(std::span<const double> x) const {
  int best = 1;
  double best_value = model_->predict(1, x);
  for (int a = 2; a <= num_arms_; ++a) {
    const double v = model_->predict(a, x);
    if (v > best_value) {
      best = a;
      best_value = v;
    }
  }
  return best;
}

double LearnedTarget::weight(int arm, std::span<const double> x) const {
  return arm == chosen_arm(x) ? 1.0 : 0.0;
}

std::shared_ptr<const TargetFunctional> target_arm(int k, int num_arms) {
  return std::make_shared<ArmTarget>(k, num_arms);
}

std::shared_ptr<const LearnedTarget> target_learned(
    const ClassificationTable& table, std::int64_t rounds,
    TrainingSchedule::Engine engine, std::uint64_t seed,
    const TreeOptions& tree) {
  table.validate();
  if (rounds < 1) throw std::invalid_argument("target rollout needs rounds >= 1");
  const int K = table.num_arms;
  StreamRng rng = StreamRng::substream(seed, 0, rng_purpose::kTargetRollout);

  std::vector<TrainingRow> rows;
  rows.reserve(static_cast<std::size_t>(rounds));
  for (std::int64_t t = 1; t <= rounds; ++t) {
    const int row = rng.next_index(static_cast<int>(table.num_rows()));
    const std::vector<double>& x = table.contexts[static_cast<std::size_t>(row)];
    const int label = table.labels[static_cast<std::size_t>(row)];
    const int arm = rng.next_index(K) + 1;
    const double y = (arm == label ? 1.0 : 0.0) + rng.next_normal();
    rows.push_back({std::span<const double>(x), arm, y, 1.0});
  }

  OutcomeModelSnapshot fit = engine == TrainingSchedule::Engine::kLinear
                                 ? fit_linear(rows, K, table.dim())
                                 : fit_tree(rows, K, table.dim(), tree);
  return std::make_shared<LearnedTarget>(fit.model, K);
}

double true_value(const ClassificationTable& table, const TargetFunctional& gstar) {
  table.validate();
  if (gstar.num_arms() != table.num_arms) {
    throw std::invalid_argument("target is defined for " +
                                std::to_string(gstar.num_arms()) +
                                " arms, table has " +
                                std::to_string(table.num_arms));
  }
  NeumaierSum total;
  for (std::size_t i = 0; i < table.labels.size(); ++i) {
    total.add(gstar.weight(table.labels[i], table.contexts[i]));
  }
  return total.value() / static_cast<double>(table.num_rows());
}

}  // namespace ope
