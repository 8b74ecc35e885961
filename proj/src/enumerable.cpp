#include "ope/enumerable.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "ope/rng.hpp"
#include "ope/stats.hpp"

namespace ope {

FixedPolicy::FixedPolicy(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) {
    throw std::invalid_argument("FixedPolicy: empty probability vector");
  }
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("FixedPolicy: bad probability");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("FixedPolicy: probabilities must sum to 1");
  }
}

double EnumerableEnvironment::qbar0(int context_index, int arm) const {
  const auto& dist =
      atoms[static_cast<std::size_t>(context_index)][static_cast<std::size_t>(arm - 1)];
  double mean = 0.0;
  for (const RewardAtom& atom : dist) {
    mean += atom.prob * atom.value;
  }
  return mean;
}

void EnumerableEnvironment::validate() const {
  if (contexts.empty() || contexts.size() != context_probs.size() ||
      contexts.size() != atoms.size()) {
    throw std::invalid_argument("EnumerableEnvironment: ragged shape");
  }
  const std::size_t d = contexts[0].size();
  const std::size_t K = atoms[0].size();
  if (K == 0) {
    throw std::invalid_argument("EnumerableEnvironment: no arms");
  }
  double cp = 0.0;
  for (std::size_t c = 0; c < contexts.size(); ++c) {
    if (contexts[c].size() != d) {
      throw std::invalid_argument("EnumerableEnvironment: ragged contexts");
    }
    if (!(context_probs[c] >= 0.0) || !std::isfinite(context_probs[c])) {
      throw std::invalid_argument("EnumerableEnvironment: bad context probability");
    }
    cp += context_probs[c];
    if (atoms[c].size() != K) {
      throw std::invalid_argument("EnumerableEnvironment: ragged arm table");
    }
    for (const auto& dist : atoms[c]) {
      if (dist.empty()) {
        throw std::invalid_argument("EnumerableEnvironment: empty reward support");
      }
      double rp = 0.0;
      for (const RewardAtom& atom : dist) {
        if (!(atom.prob >= 0.0) || !std::isfinite(atom.prob) ||
            !std::isfinite(atom.value)) {
          throw std::invalid_argument("EnumerableEnvironment: bad reward atom");
        }
        rp += atom.prob;
      }
      if (std::abs(rp - 1.0) > 1e-9) {
        throw std::invalid_argument(
            "EnumerableEnvironment: reward probabilities must sum to 1");
      }
    }
  }
  if (std::abs(cp - 1.0) > 1e-9) {
    throw std::invalid_argument(
        "EnumerableEnvironment: context probabilities must sum to 1");
  }
}

double true_value_enumerable(const EnumerableEnvironment& env,
                             const TargetFunctional& gstar) {
  NeumaierSum total;
  for (int c = 0; c < env.num_contexts(); ++c) {
    const auto& x = env.contexts[static_cast<std::size_t>(c)];
    for (int a = 1; a <= env.num_arms(); ++a) {
      total.add(env.context_probs[static_cast<std::size_t>(c)] *
                gstar.weight(a, x) * env.qbar0(c, a));
    }
  }
  return total.value();
}

LoggedDataset simulate_env_fixed(const EnumerableEnvironment& env,
                                 std::shared_ptr<const Policy> policy,
                                 std::int64_t rounds, std::uint64_t seed,
                                 std::uint64_t replication) {
  env.validate();
  if (rounds < 1) {
    throw std::invalid_argument("simulate_env_fixed: need at least one round");
  }
  const int K = env.num_arms();
  if (policy->num_arms() != K) {
    throw std::invalid_argument("simulate_env_fixed: policy arm count mismatch");
  }
  StreamRng ctx_rng = StreamRng::substream(seed, replication, rng_purpose::kContext);
  StreamRng arm_rng = StreamRng::substream(seed, replication, rng_purpose::kArm);
  StreamRng reward_rng = StreamRng::substream(seed, replication, rng_purpose::kReward);

  double policy_floor = 1.0;
  for (const auto& x : env.contexts) {
    for (int a = 1; a <= K; ++a) {
      policy_floor = std::min(policy_floor, policy->propensity(a, x));
    }
  }

  std::vector<Observation> obs;
  std::vector<double> logged;
  std::vector<PolicySnapshot> snaps;
  obs.reserve(static_cast<std::size_t>(rounds));
  std::vector<double> arm_probs(static_cast<std::size_t>(K));
  for (std::int64_t t = 1; t <= rounds; ++t) {
    const int c = ctx_rng.next_categorical(env.context_probs);
    const auto& x = env.contexts[static_cast<std::size_t>(c)];
    for (int a = 1; a <= K; ++a) {
      arm_probs[static_cast<std::size_t>(a - 1)] = policy->propensity(a, x);
    }
    const int arm = 1 + arm_rng.next_categorical(arm_probs);
    const auto& dist =
        env.atoms[static_cast<std::size_t>(c)][static_cast<std::size_t>(arm - 1)];
    std::vector<double> reward_probs;
    reward_probs.reserve(dist.size());
    for (const RewardAtom& atom : dist) reward_probs.push_back(atom.prob);
    const double y = dist[static_cast<std::size_t>(
                              reward_rng.next_categorical(reward_probs))]
                         .value;
    obs.push_back({t, x, arm, y});
    logged.push_back(arm_probs[static_cast<std::size_t>(arm - 1)]);
    snaps.push_back({policy, t, policy_floor});
  }
  return LoggedDataset(K, env.dim(), std::move(obs), std::move(logged),
                       std::move(snaps));
}

std::string EnumerableEnvironment::to_json() const {
  nlohmann::ordered_json j;
  j["contexts"] = contexts;
  j["context_probs"] = context_probs;
  nlohmann::ordered_json all = nlohmann::ordered_json::array();
  for (const auto& per_ctx : atoms) {
    nlohmann::ordered_json arms_j = nlohmann::ordered_json::array();
    for (const auto& dist : per_ctx) {
      nlohmann::ordered_json dist_j = nlohmann::ordered_json::array();
      for (const RewardAtom& atom : dist) {
        dist_j.push_back({{"value", atom.value}, {"prob", atom.prob}});
      }
      arms_j.push_back(std::move(dist_j));
    }
    all.push_back(std::move(arms_j));
  }
  j["atoms"] = std::move(all);
  return j.dump(2);
}

EnumerableEnvironment EnumerableEnvironment::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  EnumerableEnvironment env;
  env.contexts = j.at("contexts").get<std::vector<std::vector<double>>>();
  env.context_probs = j.at("context_probs").get<std::vector<double>>();
  for (const auto& per_ctx : j.at("atoms")) {
    std::vector<std::vector<RewardAtom>> arms_v;
    for (const auto& dist : per_ctx) {
      std::vector<RewardAtom> dist_v;
      for (const auto& atom : dist) {
        dist_v.push_back(
            {atom.at("value").get<double>(), atom.at("prob").get<double>()});
      }
      arms_v.push_back(std::move(dist_v));
    }
    env.atoms.push_back(std::move(arms_v));
  }
  env.validate();
  return env;
}

}  // namespace ope
