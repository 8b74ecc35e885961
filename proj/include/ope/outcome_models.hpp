#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ope {

// Per-arm regression model: a total function over (arm, context).
class OutcomeModel {
 public:
  virtual ~OutcomeModel() = default;
  virtual double predict(int arm, std::span<const double> context) const = 0;
  virtual std::string engine() const = 0;
  // Self-describing dump; throws for non-serializable models.
  virtual std::string to_json() const = 0;
};

std::shared_ptr<const OutcomeModel> model_from_json(const std::string& text);

class ZeroModel final : public OutcomeModel {
 public:
  double predict(int, std::span<const double>) const override { return 0.0; }
  std::string engine() const override { return "zero"; }
  std::string to_json() const override;
};

class ConstantModel final : public OutcomeModel {
 public:
  explicit ConstantModel(double value) : value_(value) {}
  double predict(int, std::span<const double>) const override { return value_; }
  std::string engine() const override { return "constant"; }
  std::string to_json() const override;
  double value() const { return value_; }

 private:
  double value_;
};

// Arbitrary evaluable model for tests and frozen oracles; not serializable.
class LambdaModel final : public OutcomeModel {
 public:
  using Fn = std::function<double(int, std::span<const double>)>;
  explicit LambdaModel(Fn fn) : fn_(std::move(fn)) {}
  double predict(int arm, std::span<const double> x) const override {
    return fn_(arm, x);
  }
  std::string engine() const override { return "lambda"; }
  std::string to_json() const override;

 private:
  Fn fn_;
};

// Per-arm affine fit: prediction = coef[0] + coef[1:] . x. Arms without
// training rows predict the fallback constant.
class LinearModel final : public OutcomeModel {
 public:
  LinearModel(std::vector<std::optional<std::vector<double>>> coefs,
              double fallback, int dim);
  double predict(int arm, std::span<const double> x) const override;
  std::string engine() const override { return "linear"; }
  std::string to_json() const override;

  int num_arms() const { return static_cast<int>(coefs_.size()); }
  int dim() const { return dim_; }
  const std::optional<std::vector<double>>& coefs(int arm) const {
    return coefs_[static_cast<std::size_t>(arm - 1)];
  }
  double fallback() const { return fallback_; }

 private:
  std::vector<std::optional<std::vector<double>>> coefs_;
  double fallback_;
  int dim_;
};

// Axis-aligned binary regression tree. Nodes are stored in preorder;
// feature = -1 marks a leaf.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  double value = 0.0;
  int left = -1;
  int right = -1;
};

class TreeModel final : public OutcomeModel {
 public:
  TreeModel(std::vector<std::optional<std::vector<TreeNode>>> trees,
            double fallback, int dim);
  double predict(int arm, std::span<const double> x) const override;
  std::string engine() const override { return "tree"; }
  std::string to_json() const override;

  int num_arms() const { return static_cast<int>(trees_.size()); }
  int dim() const { return dim_; }
  const std::optional<std::vector<TreeNode>>& tree(int arm) const {
    return trees_[static_cast<std::size_t>(arm - 1)];
  }
  double fallback() const { return fallback_; }

 private:
  std::vector<std::optional<std::vector<TreeNode>>> trees_;
  double fallback_;
  int dim_;
};

// Evaluable model plus provenance. predict() is total (see fallback rules).
struct OutcomeModelSnapshot {
  std::shared_ptr<const OutcomeModel> model;
  std::int64_t fitted_on = 0;
  std::string tag;

  double predict(int arm, std::span<const double> x) const {
    return model->predict(arm, x);
  }
};

// The snapshot used when no training data exists yet: predicts 0 everywhere.
OutcomeModelSnapshot zero_snapshot();

// One training example. Context views must outlive the fit call; weight
// must be strictly positive.
struct TrainingRow {
  std::span<const double> context;
  int arm = 0;
  double reward = 0.0;
  double weight = 1.0;
};

struct TreeOptions {
  int max_depth = -1;        // -1: unlimited
  int min_samples_split = 2;
};

// Weighted least squares of reward on [1, context], fit separately per arm
// with a rank-revealing solve (minimum-norm coefficients on deficiency).
// Arms with no rows fall back to the mean of all training rewards.
OutcomeModelSnapshot fit_linear(std::span<const TrainingRow> rows, int num_arms,
                                int dim);

// Per-arm CART: greedy axis-aligned splits minimizing weighted squared
// error, leaves predict the weighted mean. Ties in gain break toward the
// lowest feature index, then the lowest threshold.
OutcomeModelSnapshot fit_tree(std::span<const TrainingRow> rows, int num_arms,
                              int dim, const TreeOptions& options = {});

}  // namespace ope
