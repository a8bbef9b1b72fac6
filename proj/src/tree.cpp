#include "amtl/tree.hpp"

#include "amtl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace amtl {

TreeModel::TreeModel(std::vector<Node> nodes, TreeParams params)
    : nodes_(std::move(nodes)), params_(params) {
  if (nodes_.empty()) throw FitError("tree: no nodes");
}

int TreeModel::depth() const {
  std::vector<int> level(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes_[i].is_leaf()) {
      level[static_cast<std::size_t>(nodes_[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes_[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

int TreeModel::leaf_count() const {
  return static_cast<int>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

bool TreeModel::same_structure(const TreeModel& other) const {
  if (nodes_.size() != other.nodes_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& a = nodes_[i];
    const Node& b = other.nodes_[i];
    if (a.feature != b.feature || a.left != b.left || a.right != b.right) return false;
    if (a.is_leaf() ? a.value != b.value : a.threshold != b.threshold) return false;
  }
  return true;
}

namespace {

struct Candidate {
  int feature = -1;
  double threshold = 0.0;
  std::size_t left_count = 0;  // position in the sorted order
  double proxy = 0.0;
};

class Grower {
 public:
  Grower(const InputMatrix& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w, const TreeParams& p)
      : x_(x), y_(y), w_(w), params_(p) {}

  std::vector<TreeModel::Node> grow() {
    std::vector<Index> rows(static_cast<std::size_t>(y_.size()));
    std::iota(rows.begin(), rows.end(), Index{0});
    build(rows, 0);
    return std::move(nodes_);
  }

 private:
  // Sums are taken on targets centered at the node's smallest target value.
  // That keeps cancellation small and leaves exactly representable inputs
  // exactly representable, so duplicated rows and integer weights agree.
  struct Moments {
    double weight = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    double sse() const { return weight > 0.0 ? std::max(0.0, s2 - s1 * s1 / weight) : 0.0; }
  };

  int build(std::vector<Index>& rows, int depth) {
    const double ref = min_target(rows);
    Moments total;
    bool constant = true;
    double first_y = 0.0;
    bool seen = false;
    for (Index r : rows) {
      const double wi = w_(r);
      const double d = y_(r) - ref;
      total.weight += wi;
      total.s1 += wi * d;
      total.s2 += wi * d * d;
      if (wi > 0.0) {
        if (seen && y_(r) != first_y) constant = false;
        if (!seen) first_y = y_(r);
        seen = true;
      }
    }

    const int id = static_cast<int>(nodes_.size());
    TreeModel::Node node;
    node.value = ref + total.s1 / total.weight;
    node.impurity = constant ? 0.0 : total.sse();
    node.weight = total.weight;
    node.samples = static_cast<int>(rows.size());
    nodes_.push_back(node);

    const bool depth_reached = params_.max_depth && depth >= *params_.max_depth;
    const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_samples_leaf));
    if (constant || depth_reached || rows.size() < 2 * min_leaf) return id;

    const auto best = find_split(rows, ref, total, min_leaf);
    if (!best) return id;

    std::vector<Index> left;
    std::vector<Index> right;
    for (Index r : rows) (x_(r, best->feature) >= best->threshold ? right : left).push_back(r);

    const double parent_sse = node.impurity;
    nodes_[static_cast<std::size_t>(id)].feature = best->feature;
    nodes_[static_cast<std::size_t>(id)].threshold = best->threshold;
    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;

    const double child_sse = nodes_[static_cast<std::size_t>(l)].impurity + nodes_[static_cast<std::size_t>(r)].impurity;
    if (child_sse > parent_sse + 1e-9 * (1.0 + parent_sse)) {
      throw FitError("tree: split increased impurity");
    }
    return id;
  }

  double min_target(const std::vector<Index>& rows) const {
    double m = y_(rows.front());
    for (Index r : rows) m = std::min(m, y_(r));
    return m;
  }

  std::optional<Candidate> find_split(std::vector<Index>& rows, double ref, const Moments& total,
                                      std::size_t min_leaf) const {
    std::optional<Candidate> best;
    // Any accepted candidate must beat the incumbent by more than rounding
    // noise; near-ties therefore resolve to the earliest feature/threshold.
    const double tol = 1e-12 * (total.s2 + std::abs(total.s1 * total.s1 / total.weight));
    const std::size_t n = rows.size();
    for (int f = 0; f < kNumInputs; ++f) {
      std::stable_sort(rows.begin(), rows.end(), [&](Index a, Index b) { return x_(a, f) < x_(b, f); });
      Moments left;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const Index r = rows[i];
        const double d = y_(r) - ref;
        left.weight += w_(r);
        left.s1 += w_(r) * d;
        left.s2 += w_(r) * d * d;
        const double lo = x_(r, f);
        const double hi = x_(rows[i + 1], f);
        if (!(lo < hi)) continue;
        if (i + 1 < min_leaf || n - (i + 1) < min_leaf) continue;
        const double right_weight = total.weight - left.weight;
        if (!(left.weight > 0.0) || !(right_weight > 0.0)) continue;
        const double right_s1 = total.s1 - left.s1;
        const double proxy = left.s1 * left.s1 / left.weight + right_s1 * right_s1 / right_weight;
        if (!best || proxy > best->proxy + tol) {
          double threshold = lo + (hi - lo) / 2.0;
          if (!(threshold > lo)) threshold = hi;  // adjacent doubles
          best = Candidate{f, threshold, i + 1, proxy};
        }
      }
    }
    return best;
  }

  const InputMatrix& x_;
  const Eigen::VectorXd& y_;
  const Eigen::VectorXd& w_;
  TreeParams params_;
  std::vector<TreeModel::Node> nodes_;
};

}  // namespace

TreeModel fit_tree(const InputMatrix& x, const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                   const TreeParams& params) {
  if (y.size() == 0) throw EmptyDatasetError("tree: empty training set");
  if (x.rows() != y.size() || weights.size() != y.size()) {
    throw SizeError("tree: weights/targets do not match the number of samples");
  }
  if (!weights.allFinite() || (weights.array() < 0.0).any()) {
    throw WeightError("tree: weights must be finite and nonnegative");
  }
  if (!(weights.sum() > 0.0)) throw WeightError("tree: weights sum to zero");
  if (params.min_samples_leaf < 1) throw ConfigError("tree: min_samples_leaf must be >= 1");
  if (params.max_depth && *params.max_depth < 0) throw ConfigError("tree: max_depth must be >= 0");
  return TreeModel(Grower(x, y, weights, params).grow(), params);
}

TreeModel fit_tree(const Dataset& data, const Eigen::VectorXd& weights, const TreeParams& params) {
  return fit_tree(data.inputs(), data.outputs(), weights, params);
}

TreeModel fit_tree(const Dataset& data, const TreeParams& params) {
  return fit_tree(data.inputs(), data.outputs(), Eigen::VectorXd::Ones(data.size()), params);
}

double predict_tree(const TreeModel& model, const InputVector& x) {
  if (!x.allFinite()) throw InputError("tree: non-finite input");
  return model.predict_unchecked(x);
}

Eigen::VectorXd predict_tree(const TreeModel& model, const InputMatrix& x) {
  if (!x.allFinite()) throw InputError("tree: non-finite input");
  Eigen::VectorXd out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out(i) = model.predict_unchecked(x.row(i).transpose());
  return out;
}

}  // namespace amtl
