#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ope {

// One logged round. Rounds are 1-based and arms are 1-based contiguous
// integers in [1, K].
struct Observation {
  std::int64_t round = 0;
  std::vector<double> context;
  int arm = 0;
  double reward = 0.0;
};

// A logging policy frozen at one round: evaluable propensities over arms at
// any context. Implementations are immutable and shareable across threads.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual int num_arms() const = 0;
  virtual double propensity(int arm, std::span<const double> context) const = 0;
};

struct PolicySnapshot {
  std::shared_ptr<const Policy> policy;
  std::int64_t round = 0;
  // Smallest propensity this snapshot can assign anywhere (its exploration
  // floor); 0 for degenerate phases such as the initial arm sweep.
  double min_propensity = 0.0;
};

// Uniform over arms, any context.
class UniformPolicy final : public Policy {
 public:
  explicit UniformPolicy(int num_arms) : num_arms_(num_arms) {}
  int num_arms() const override { return num_arms_; }
  double propensity(int, std::span<const double>) const override {
    return 1.0 / static_cast<double>(num_arms_);
  }

 private:
  int num_arms_;
};

// The fixed bounded weight function g*(a|x) that defines the estimand.
class TargetFunctional {
 public:
  enum class Kind { kPolicy, kContrast, kSubgroup };

  virtual ~TargetFunctional() = default;
  virtual int num_arms() const = 0;
  virtual double weight(int arm, std::span<const double> context) const = 0;
  virtual Kind kind() const = 0;
  // G such that |g*(a|x)| <= G everywhere.
  virtual double bound() const = 0;
};

// Point mass on one arm.
class ArmTarget final : public TargetFunctional {
 public:
  ArmTarget(int arm, int num_arms);
  int num_arms() const override { return num_arms_; }
  double weight(int arm, std::span<const double>) const override {
    return arm == arm_ ? 1.0 : 0.0;
  }
  Kind kind() const override { return Kind::kPolicy; }
  double bound() const override { return 1.0; }
  int arm() const { return arm_; }

 private:
  int arm_;
  int num_arms_;
};

// Uniform target policy.
class UniformTarget final : public TargetFunctional {
 public:
  explicit UniformTarget(int num_arms) : num_arms_(num_arms) {}
  int num_arms() const override { return num_arms_; }
  double weight(int, std::span<const double>) const override {
    return 1.0 / static_cast<double>(num_arms_);
  }
  Kind kind() const override { return Kind::kPolicy; }
  double bound() const override { return 1.0; }

 private:
  int num_arms_;
};

// Difference of two point-mass policies: value is the effect of playing
// arm_hi instead of arm_lo.
class ContrastTarget final : public TargetFunctional {
 public:
  ContrastTarget(int arm_hi, int arm_lo, int num_arms);
  int num_arms() const override { return num_arms_; }
  double weight(int arm, std::span<const double>) const override {
    if (arm == arm_hi_) return 1.0;
    if (arm == arm_lo_) return -1.0;
    return 0.0;
  }
  Kind kind() const override { return Kind::kContrast; }
  double bound() const override { return 1.0; }
  int arm_hi() const { return arm_hi_; }
  int arm_lo() const { return arm_lo_; }

 private:
  int arm_hi_;
  int arm_lo_;
  int num_arms_;
};

// Context-independent weight vector, e.g. read from a target CSV.
class TabularTarget final : public TargetFunctional {
 public:
  TabularTarget(std::vector<double> weights, Kind kind);
  int num_arms() const override { return static_cast<int>(weights_.size()); }
  double weight(int arm, std::span<const double>) const override {
    return weights_[static_cast<std::size_t>(arm - 1)];
  }
  Kind kind() const override { return kind_; }
  double bound() const override { return bound_; }

 private:
  std::vector<double> weights_;
  Kind kind_;
  double bound_;
};

// Lower-triangular table of g_t evaluated at past rounds' realized
// (action, context) pairs: at(t, s) = g_t(A(s)|X(s)) for 1 <= s <= t <= T.
// This is the wire representation of the logging policies; external datasets
// cannot ship executable snapshots.
class CrossPropensityMatrix {
 public:
  CrossPropensityMatrix() = default;
  explicit CrossPropensityMatrix(std::int64_t rounds);

  std::int64_t rounds() const { return rounds_; }
  double at(std::int64_t t, std::int64_t s) const;
  void set(std::int64_t t, std::int64_t s, double value);
  bool is_set(std::int64_t t, std::int64_t s) const;
  bool complete() const;
  // First unset (t, s) pair, or (0, 0) when complete.
  std::pair<std::int64_t, std::int64_t> first_missing() const;

 private:
  std::size_t index(std::int64_t t, std::int64_t s) const;

  std::int64_t rounds_ = 0;
  std::vector<double> values_;
  std::vector<bool> present_;
};

// Immutable container for one adaptively logged dataset. Policies are held
// either as per-round evaluable snapshots (simulation) or as a cross-
// propensity matrix (ingestion); a dataset never mixes the two.
class LoggedDataset {
 public:
  LoggedDataset(int num_arms, int dim, std::vector<Observation> observations,
                std::vector<double> logged_propensities,
                std::vector<PolicySnapshot> policies);
  LoggedDataset(int num_arms, int dim, std::vector<Observation> observations,
                std::vector<double> logged_propensities,
                CrossPropensityMatrix cross);

  int num_arms() const { return num_arms_; }
  int dim() const { return dim_; }
  std::int64_t rounds() const { return static_cast<std::int64_t>(observations_.size()); }

  // 1-based round access.
  const Observation& obs(std::int64_t t) const {
    return observations_[static_cast<std::size_t>(t - 1)];
  }
  std::span<const Observation> observations() const { return observations_; }

  // g_t(A(t)|X(t)) as logged.
  double logged_propensity(std::int64_t t) const {
    return logged_propensities_[static_cast<std::size_t>(t - 1)];
  }
  std::span<const double> logged_propensities() const { return logged_propensities_; }

  bool has_snapshots() const;
  const PolicySnapshot& snapshot(std::int64_t t) const;
  const CrossPropensityMatrix& cross_matrix() const;

  // g_t(A(s)|X(s)) for s <= t, from whichever representation is present.
  double cross_propensity(std::int64_t t, std::int64_t s) const;

  // Replays snapshots into a matrix-backed dataset (identical values).
  LoggedDataset materialized() const;

 private:
  int num_arms_;
  int dim_;
  std::vector<Observation> observations_;
  std::vector<double> logged_propensities_;
  std::variant<std::vector<PolicySnapshot>, CrossPropensityMatrix> policies_;
};

// A failed dataset invariant. round is 0 for dataset-level violations.
struct Violation {
  std::int64_t round = 0;
  std::string rule;
  std::string detail;
};

// Returns one record per violated invariant; empty means the dataset is
// well formed. Violations are data, not exceptions.
std::vector<Violation> validate_dataset(const LoggedDataset& dataset);

enum class EstimatorKind { kDM, kIPW, kDR, kMRDR, kADR, kCADR, kCAMRDR };

const char* to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& name);

struct Diagnostics {
  std::int64_t floor_hits = 0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  std::int64_t burn_in = 0;
};

// Point estimate with its confidence interval. scale is Gamma_T for the
// stabilized estimators and the plug-in standard error times sqrt(T) for the
// baselines, so that ci = psi_hat +/- z_{1-alpha/2} * scale / sqrt(T) in both
// cases.
struct EstimateReport {
  double psi_hat = 0.0;
  double scale = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double alpha = 0.05;
  EstimatorKind estimator = EstimatorKind::kDR;
  std::int64_t rounds = 0;
  Diagnostics diagnostics;

  std::string to_json() const;
};

}  // namespace ope
