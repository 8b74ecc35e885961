#include "ope/outcome_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "json.hpp"

namespace ope {

namespace {

void check_rows(std::span<const TrainingRow> rows, int num_arms, int dim) {
  if (rows.empty()) {
    throw std::invalid_argument("fit: no training rows");
  }
  for (const TrainingRow& r : rows) {
    if (static_cast<int>(r.context.size()) != dim) {
      throw std::invalid_argument("fit: context dimension mismatch");
    }
    for (double x : r.context) {
      if (!std::isfinite(x)) throw std::invalid_argument("fit: non-finite context");
    }
    if (r.arm < 1 || r.arm > num_arms) {
      throw std::invalid_argument("fit: arm out of range");
    }
    if (!std::isfinite(r.reward)) throw std::invalid_argument("fit: non-finite reward");
    if (!(r.weight > 0.0) || !std::isfinite(r.weight)) {
      throw std::invalid_argument("fit: weights must be positive");
    }
  }
}

double mean_reward(std::span<const TrainingRow> rows) {
  double sum = 0.0;
  for (const TrainingRow& r : rows) sum += r.reward;
  return sum / static_cast<double>(rows.size());
}

std::vector<std::vector<int>> rows_by_arm(std::span<const TrainingRow> rows,
                                          int num_arms) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(num_arms));
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
    out[static_cast<std::size_t>(rows[i].arm - 1)].push_back(i);
  }
  return out;
}

}  // namespace

LinearModel::LinearModel(std::vector<std::optional<std::vector<double>>> coefs,
                         double fallback, int dim)
    : coefs_(std::move(coefs)), fallback_(fallback), dim_(dim) {
  for (const auto& c : coefs_) {
    if (c && static_cast<int>(c->size()) != dim_ + 1) {
      throw std::invalid_argument("LinearModel: coefficient length mismatch");
    }
  }
}

double LinearModel::predict(int arm, std::span<const double> x) const {
  const auto& c = coefs_[static_cast<std::size_t>(arm - 1)];
  if (!c) return fallback_;
  double out = (*c)[0];
  for (int j = 0; j < dim_; ++j) {
    out += (*c)[static_cast<std::size_t>(j + 1)] * x[static_cast<std::size_t>(j)];
  }
  return out;
}

TreeModel::TreeModel(std::vector<std::optional<std::vector<TreeNode>>> trees,
                     double fallback, int dim)
    : trees_(std::move(trees)), fallback_(fallback), dim_(dim) {}

double TreeModel::predict(int arm, std::span<const double> x) const {
  const auto& t = trees_[static_cast<std::size_t>(arm - 1)];
  if (!t) return fallback_;
  const std::vector<TreeNode>& nodes = *t;
  int i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const TreeNode& n = nodes[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

OutcomeModelSnapshot zero_snapshot() {
  static const auto zero = std::make_shared<const ZeroModel>();
  return {zero, 0, "zero"};
}

OutcomeModelSnapshot fit_linear(std::span<const TrainingRow> rows, int num_arms,
                                int dim) {
  check_rows(rows, num_arms, dim);
  const double fallback = mean_reward(rows);
  const auto groups = rows_by_arm(rows, num_arms);

  std::vector<std::optional<std::vector<double>>> coefs(
      static_cast<std::size_t>(num_arms));
  for (int a = 1; a <= num_arms; ++a) {
    const auto& g = groups[static_cast<std::size_t>(a - 1)];
    if (g.empty()) continue;
    const int n = static_cast<int>(g.size());
    Eigen::MatrixXd A(n, dim + 1);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
      const TrainingRow& r = rows[static_cast<std::size_t>(g[static_cast<std::size_t>(i)])];
      const double sw = std::sqrt(r.weight);
      A(i, 0) = sw;
      for (int j = 0; j < dim; ++j) {
        A(i, j + 1) = sw * r.context[static_cast<std::size_t>(j)];
      }
      b(i) = sw * r.reward;
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    const Eigen::VectorXd beta = cod.solve(b);
    coefs[static_cast<std::size_t>(a - 1)] =
        std::vector<double>(beta.data(), beta.data() + beta.size());
  }
  return {std::make_shared<const LinearModel>(std::move(coefs), fallback, dim),
          static_cast<std::int64_t>(rows.size()), "linear"};
}

namespace {

struct SplitChoice {
  bool found = false;
  double cost = 0.0;  // SSE_left + SSE_right, lower is better
  int feature = -1;
  double threshold = 0.0;
};

// Grows one tree over the given row indices. Splits are scanned per feature
// in sorted order with prefix sums shifted by the node mean; candidates sit
// at midpoints between distinct adjacent values.
class TreeBuilder {
 public:
  TreeBuilder(std::span<const TrainingRow> rows, int dim, const TreeOptions& opt)
      : rows_(rows), dim_(dim), opt_(opt) {}

  std::vector<TreeNode> build(std::vector<int> idx) {
    nodes_.clear();
    grow(std::move(idx), 0);
    return std::move(nodes_);
  }

 private:
  double value_at(int i, int j) const {
    return rows_[static_cast<std::size_t>(i)].context[static_cast<std::size_t>(j)];
  }

  double weighted_mean(const std::vector<int>& idx) const {
    double sw = 0.0, swy = 0.0;
    for (int i : idx) {
      const TrainingRow& r = rows_[static_cast<std::size_t>(i)];
      sw += r.weight;
      swy += r.weight * r.reward;
    }
    return swy / sw;
  }

  int make_leaf(const std::vector<int>& idx) {
    TreeNode n;
    n.feature = -1;
    n.value = weighted_mean(idx);
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  SplitChoice best_split(const std::vector<int>& idx, double mean) const {
    SplitChoice best;
    const int n = static_cast<int>(idx.size());
    std::vector<int> order(idx);
    for (int j = 0; j < dim_; ++j) {
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double va = value_at(a, j), vb = value_at(b, j);
        if (va != vb) return va < vb;
        return a < b;
      });
      // totals of w, w*z, w*z^2 with z = y - mean
      double tw = 0.0, twz = 0.0, twzz = 0.0;
      for (int i : order) {
        const TrainingRow& r = rows_[static_cast<std::size_t>(i)];
        const double z = r.reward - mean;
        tw += r.weight;
        twz += r.weight * z;
        twzz += r.weight * z * z;
      }
      double lw = 0.0, lwz = 0.0, lwzz = 0.0;
      for (int k = 0; k + 1 < n; ++k) {
        const TrainingRow& r = rows_[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
        const double z = r.reward - mean;
        lw += r.weight;
        lwz += r.weight * z;
        lwzz += r.weight * z * z;
        const double lo = value_at(order[static_cast<std::size_t>(k)], j);
        const double hi = value_at(order[static_cast<std::size_t>(k + 1)], j);
        if (lo == hi) continue;
        const double rw = tw - lw, rwz = twz - lwz, rwzz = twzz - lwzz;
        const double cost = (lwzz - lwz * lwz / lw) + (rwzz - rwz * rwz / rw);
        double thr = lo + (hi - lo) / 2.0;
        if (thr == lo) thr = hi;  // guard against midpoint rounding down
        const bool better =
            !best.found || cost < best.cost ||
            (cost == best.cost &&
             (j < best.feature || (j == best.feature && thr < best.threshold)));
        if (better) {
          best.found = true;
          best.cost = cost;
          best.feature = j;
          best.threshold = thr;
        }
      }
    }
    return best;
  }

  int grow(std::vector<int> idx, int depth) {
    const int n = static_cast<int>(idx.size());
    bool constant = true;
    const double y0 = rows_[static_cast<std::size_t>(idx[0])].reward;
    for (int i : idx) {
      if (rows_[static_cast<std::size_t>(i)].reward != y0) {
        constant = false;
        break;
      }
    }
    if (n < opt_.min_samples_split || constant ||
        (opt_.max_depth >= 0 && depth >= opt_.max_depth)) {
      return make_leaf(idx);
    }
    const double mean = weighted_mean(idx);
    const SplitChoice split = best_split(idx, mean);
    if (!split.found) {
      return make_leaf(idx);
    }
    std::vector<int> left, right;
    for (int i : idx) {
      (value_at(i, split.feature) < split.threshold ? left : right).push_back(i);
    }
    TreeNode node;
    node.feature = split.feature;
    node.threshold = split.threshold;
    nodes_.push_back(node);
    const int self = static_cast<int>(nodes_.size()) - 1;
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    nodes_[static_cast<std::size_t>(self)].left = l;
    nodes_[static_cast<std::size_t>(self)].right = r;
    return self;
  }

  std::span<const TrainingRow> rows_;
  int dim_;
  TreeOptions opt_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

OutcomeModelSnapshot fit_tree(std::span<const TrainingRow> rows, int num_arms,
                              int dim, const TreeOptions& options) {
  check_rows(rows, num_arms, dim);
  const double fallback = mean_reward(rows);
  const auto groups = rows_by_arm(rows, num_arms);

  std::vector<std::optional<std::vector<TreeNode>>> trees(
      static_cast<std::size_t>(num_arms));
  for (int a = 1; a <= num_arms; ++a) {
    const auto& g = groups[static_cast<std::size_t>(a - 1)];
    if (g.empty()) continue;
    TreeBuilder builder(rows, dim, options);
    trees[static_cast<std::size_t>(a - 1)] = builder.build(g);
  }
  return {std::make_shared<const TreeModel>(std::move(trees), fallback, dim),
          static_cast<std::int64_t>(rows.size()), "tree"};
}

std::string ZeroModel::to_json() const {
  return nlohmann::ordered_json{{"engine", "zero"}}.dump();
}

std::string ConstantModel::to_json() const {
  return nlohmann::ordered_json{{"engine", "constant"}, {"value", value_}}.dump();
}

std::string LambdaModel::to_json() const {
  throw std::logic_error("LambdaModel is not serializable");
}

std::string LinearModel::to_json() const {
  nlohmann::ordered_json j;
  j["engine"] = "linear";
  j["dim"] = dim_;
  j["fallback"] = fallback_;
  nlohmann::ordered_json arms = nlohmann::ordered_json::array();
  for (const auto& c : coefs_) {
    if (c) {
      arms.push_back(*c);
    } else {
      arms.push_back(nullptr);
    }
  }
  j["arms"] = std::move(arms);
  return j.dump();
}

std::string TreeModel::to_json() const {
  nlohmann::ordered_json j;
  j["engine"] = "tree";
  j["dim"] = dim_;
  j["fallback"] = fallback_;
  nlohmann::ordered_json arms = nlohmann::ordered_json::array();
  for (const auto& t : trees_) {
    if (!t) {
      arms.push_back(nullptr);
      continue;
    }
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const TreeNode& n : *t) {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"value", n.value},
                       {"left", n.left},
                       {"right", n.right}});
    }
    arms.push_back(std::move(nodes));
  }
  j["arms"] = std::move(arms);
  return j.dump();
}

std::shared_ptr<const OutcomeModel> model_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  const std::string engine = j.at("engine").get<std::string>();
  if (engine == "zero") {
    return std::make_shared<const ZeroModel>();
  }
  if (engine == "constant") {
    return std::make_shared<const ConstantModel>(j.at("value").get<double>());
  }
  if (engine == "linear") {
    std::vector<std::optional<std::vector<double>>> coefs;
    for (const auto& c : j.at("arms")) {
      if (c.is_null()) {
        coefs.emplace_back(std::nullopt);
      } else {
        coefs.emplace_back(c.get<std::vector<double>>());
      }
    }
    return std::make_shared<const LinearModel>(
        std::move(coefs), j.at("fallback").get<double>(), j.at("dim").get<int>());
  }
  if (engine == "tree") {
    std::vector<std::optional<std::vector<TreeNode>>> trees;
    for (const auto& t : j.at("arms")) {
      if (t.is_null()) {
        trees.emplace_back(std::nullopt);
        continue;
      }
      std::vector<TreeNode> nodes;
      for (const auto& n : t) {
        TreeNode node;
        node.feature = n.at("feature").get<int>();
        node.threshold = n.at("threshold").get<double>();
        node.value = n.at("value").get<double>();
        node.left = n.at("left").get<int>();
        node.right = n.at("right").get<int>();
        nodes.push_back(node);
      }
      trees.emplace_back(std::move(nodes));
    }
    return std::make_shared<const TreeModel>(
        std::move(trees), j.at("fallback").get<double>(), j.at("dim").get<int>());
  }
  throw std::invalid_argument("model_from_json: unknown engine " + engine);
}

}  // namespace ope
