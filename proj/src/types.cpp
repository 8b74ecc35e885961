#include "ope/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace ope {

ArmTarget::ArmTarget(int arm, int num_arms) : arm_(arm), num_arms_(num_arms) {
  if (arm < 1 || arm > num_arms) {
    throw std::invalid_argument("ArmTarget: arm out of range");
  }
}

ContrastTarget::ContrastTarget(int arm_hi, int arm_lo, int num_arms)
    : arm_hi_(arm_hi), arm_lo_(arm_lo), num_arms_(num_arms) {
  if (arm_hi < 1 || arm_hi > num_arms || arm_lo < 1 || arm_lo > num_arms ||
      arm_hi == arm_lo) {
    throw std::invalid_argument("ContrastTarget: bad arm pair");
  }
}

TabularTarget::TabularTarget(std::vector<double> weights, Kind kind)
    : weights_(std::move(weights)), kind_(kind), bound_(0.0) {
  if (weights_.empty()) {
    throw std::invalid_argument("TabularTarget: empty weight vector");
  }
  for (double w : weights_) {
    if (!std::isfinite(w)) {
      throw std::invalid_argument("TabularTarget: non-finite weight");
    }
    bound_ = std::max(bound_, std::abs(w));
  }
}

CrossPropensityMatrix::CrossPropensityMatrix(std::int64_t rounds)
    : rounds_(rounds) {
  if (rounds < 0) {
    throw std::invalid_argument("CrossPropensityMatrix: negative size");
  }
  const std::size_t n =
      static_cast<std::size_t>(rounds) * static_cast<std::size_t>(rounds + 1) / 2;
  values_.assign(n, 0.0);
  present_.assign(n, false);
}

std::size_t CrossPropensityMatrix::index(std::int64_t t, std::int64_t s) const {
  if (t < 1 || t > rounds_ || s < 1 || s > t) {
    throw std::out_of_range("CrossPropensityMatrix: index out of range");
  }
  return static_cast<std::size_t>(t * (t - 1) / 2 + (s - 1));
}

double CrossPropensityMatrix::at(std::int64_t t, std::int64_t s) const {
  const std::size_t i = index(t, s);
  if (!present_[i]) {
    throw std::runtime_error("cross-propensity missing at (t=" + std::to_string(t) +
                             ", s=" + std::to_string(s) + ")");
  }
  return values_[i];
}

void CrossPropensityMatrix::set(std::int64_t t, std::int64_t s, double value) {
  const std::size_t i = index(t, s);
  values_[i] = value;
  present_[i] = true;
}

bool CrossPropensityMatrix::is_set(std::int64_t t, std::int64_t s) const {
  return present_[index(t, s)];
}

bool CrossPropensityMatrix::complete() const {
  return std::all_of(present_.begin(), present_.end(), [](bool b) { return b; });
}

std::pair<std::int64_t, std::int64_t> CrossPropensityMatrix::first_missing() const {
  for (std::int64_t t = 1; t <= rounds_; ++t) {
    for (std::int64_t s = 1; s <= t; ++s) {
      if (!present_[static_cast<std::size_t>(t * (t - 1) / 2 + (s - 1))]) {
        return {t, s};
      }
    }
  }
  return {0, 0};
}

LoggedDataset::LoggedDataset(int num_arms, int dim,
                             std::vector<Observation> observations,
                             std::vector<double> logged_propensities,
                             std::vector<PolicySnapshot> policies)
    : num_arms_(num_arms),
      dim_(dim),
      observations_(std::move(observations)),
      logged_propensities_(std::move(logged_propensities)),
      policies_(std::move(policies)) {
  if (logged_propensities_.size() != observations_.size()) {
    throw std::invalid_argument("LoggedDataset: propensity count mismatch");
  }
  if (std::get<std::vector<PolicySnapshot>>(policies_).size() !=
      observations_.size()) {
    throw std::invalid_argument("LoggedDataset: snapshot count mismatch");
  }
}

LoggedDataset::LoggedDataset(int num_arms, int dim,
                             std::vector<Observation> observations,
                             std::vector<double> logged_propensities,
                             CrossPropensityMatrix cross)
    : num_arms_(num_arms),
      dim_(dim),
      observations_(std::move(observations)),
      logged_propensities_(std::move(logged_propensities)),
      policies_(std::move(cross)) {
  if (logged_propensities_.size() != observations_.size()) {
    throw std::invalid_argument("LoggedDataset: propensity count mismatch");
  }
  if (std::get<CrossPropensityMatrix>(policies_).rounds() !=
      static_cast<std::int64_t>(observations_.size())) {
    throw std::invalid_argument("LoggedDataset: cross matrix size mismatch");
  }
}

bool LoggedDataset::has_snapshots() const {
  return std::holds_alternative<std::vector<PolicySnapshot>>(policies_);
}

const PolicySnapshot& LoggedDataset::snapshot(std::int64_t t) const {
  return std::get<std::vector<PolicySnapshot>>(policies_)[static_cast<std::size_t>(t - 1)];
}

const CrossPropensityMatrix& LoggedDataset::cross_matrix() const {
  return std::get<CrossPropensityMatrix>(policies_);
}

double LoggedDataset::cross_propensity(std::int64_t t, std::int64_t s) const {
  if (has_snapshots()) {
    const Observation& o = obs(s);
    return snapshot(t).policy->propensity(o.arm, o.context);
  }
  return cross_matrix().at(t, s);
}

LoggedDataset LoggedDataset::materialized() const {
  const std::int64_t n = rounds();
  CrossPropensityMatrix cross(n);
  for (std::int64_t t = 1; t <= n; ++t) {
    for (std::int64_t s = 1; s <= t; ++s) {
      cross.set(t, s, cross_propensity(t, s));
    }
  }
  return LoggedDataset(num_arms_, dim_, observations_, logged_propensities_,
                       std::move(cross));
}

namespace {

std::string round_detail(std::int64_t t, const std::string& what) {
  return "round " + std::to_string(t) + ": " + what;
}

}  // namespace

std::vector<Violation> validate_dataset(const LoggedDataset& dataset) {
  std::vector<Violation> out;
  const std::int64_t n = dataset.rounds();
  const int K = dataset.num_arms();
  const int d = dataset.dim();

  if (K < 1) {
    out.push_back({0, "arm-count", "num_arms must be at least 1"});
  }
  if (d < 0) {
    out.push_back({0, "context-dim", "dimension must be non-negative"});
  }

  for (std::int64_t t = 1; t <= n; ++t) {
    const Observation& o = dataset.obs(t);
    if (o.round != t) {
      out.push_back({t, "round-order",
                     round_detail(t, "observation carries round index " +
                                         std::to_string(o.round))});
    }
    if (o.arm < 1 || o.arm > K) {
      out.push_back({t, "arm-range",
                     round_detail(t, "arm " + std::to_string(o.arm) +
                                         " outside [1, " + std::to_string(K) + "]")});
    }
    if (static_cast<int>(o.context.size()) != d) {
      out.push_back({t, "context-dim",
                     round_detail(t, "context has " +
                                         std::to_string(o.context.size()) +
                                         " coordinates, expected " +
                                         std::to_string(d))});
    }
    for (double x : o.context) {
      if (!std::isfinite(x)) {
        out.push_back({t, "finite-context", round_detail(t, "non-finite context coordinate")});
        break;
      }
    }
    if (!std::isfinite(o.reward)) {
      out.push_back({t, "finite-reward", round_detail(t, "non-finite reward")});
    }
    const double g = dataset.logged_propensity(t);
    if (!(g > 0.0) || !std::isfinite(g) || g > 1.0) {
      out.push_back({t, "positive-propensity",
                     round_detail(t, "logged propensity " + std::to_string(g) +
                                         " outside (0, 1]")});
    }
  }

  if (dataset.has_snapshots()) {
    for (std::int64_t t = 1; t <= n; ++t) {
      const Observation& o = dataset.obs(t);
      const Policy* policy = dataset.snapshot(t).policy.get();
      if (policy == nullptr) {
        out.push_back({t, "missing-policy", round_detail(t, "null policy snapshot")});
        continue;
      }
      if (o.arm >= 1 && o.arm <= K &&
          static_cast<int>(o.context.size()) == d) {
        double total = 0.0;
        bool bad_mass = false;
        for (int a = 1; a <= K; ++a) {
          const double p = policy->propensity(a, o.context);
          if (!(p >= 0.0) || !std::isfinite(p)) bad_mass = true;
          total += p;
        }
        if (bad_mass) {
          out.push_back({t, "policy-mass", round_detail(t, "negative or non-finite propensity")});
        } else if (std::abs(total - 1.0) > 1e-9) {
          out.push_back({t, "policy-sum",
                         round_detail(t, "propensities sum to " + std::to_string(total))});
        }
        const double here = policy->propensity(o.arm, o.context);
        if (std::abs(here - dataset.logged_propensity(t)) > 1e-9) {
          out.push_back({t, "logged-mismatch",
                         round_detail(t, "snapshot propensity disagrees with logged value")});
        }
      }
    }
  } else {
    const CrossPropensityMatrix& cross = dataset.cross_matrix();
    if (!cross.complete()) {
      auto [mt, ms] = cross.first_missing();
      out.push_back({mt, "cross-missing",
                     "pair (t=" + std::to_string(mt) + ", s=" + std::to_string(ms) +
                         ") absent from cross-propensity table"});
    } else {
      for (std::int64_t t = 1; t <= n; ++t) {
        if (std::abs(cross.at(t, t) - dataset.logged_propensity(t)) > 1e-9) {
          out.push_back({t, "cross-diagonal",
                         round_detail(t, "diagonal entry disagrees with logged propensity")});
        }
        for (std::int64_t s = 1; s <= t; ++s) {
          // Off-diagonal zeros are legal: a policy may place no mass on a past
          // action (the estimator errors only if such an entry is consumed).
          const double v = cross.at(t, s);
          const bool ok = s == t ? (v > 0.0 && v <= 1.0) : (v >= 0.0 && v <= 1.0);
          if (!ok || !std::isfinite(v)) {
            out.push_back({t, "cross-range",
                           "entry (t=" + std::to_string(t) + ", s=" + std::to_string(s) +
                               ") out of range"});
          }
        }
      }
    }
  }

  return out;
}

const char* to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kDM: return "dm";
    case EstimatorKind::kIPW: return "ipw";
    case EstimatorKind::kDR: return "dr";
    case EstimatorKind::kMRDR: return "mrdr";
    case EstimatorKind::kADR: return "adr";
    case EstimatorKind::kCADR: return "cadr";
    case EstimatorKind::kCAMRDR: return "camrdr";
  }
  return "unknown";
}

EstimatorKind estimator_kind_from_string(const std::string& name) {
  if (name == "dm") return EstimatorKind::kDM;
  if (name == "ipw") return EstimatorKind::kIPW;
  if (name == "dr") return EstimatorKind::kDR;
  if (name == "mrdr") return EstimatorKind::kMRDR;
  if (name == "adr") return EstimatorKind::kADR;
  if (name == "cadr") return EstimatorKind::kCADR;
  if (name == "camrdr") return EstimatorKind::kCAMRDR;
  throw std::invalid_argument("unknown estimator: " + name);
}

std::string EstimateReport::to_json() const {
  nlohmann::ordered_json j;
  j["estimator"] = to_string(estimator);
  j["psi_hat"] = psi_hat;
  j["scale"] = scale;
  j["ci_lo"] = ci_lo;
  j["ci_hi"] = ci_hi;
  j["alpha"] = alpha;
  j["T"] = rounds;
  j["diagnostics"] = {
      {"floor_hits", diagnostics.floor_hits},
      {"sigma_min", diagnostics.sigma_min},
      {"sigma_max", diagnostics.sigma_max},
      {"burn_in", diagnostics.burn_in},
  };
  return j.dump(2);
}

}  // namespace ope
