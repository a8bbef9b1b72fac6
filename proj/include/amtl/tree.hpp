#pragma once

#include "amtl/data.hpp"

#include <optional>
#include <vector>

namespace amtl {

struct TreeParams {
  std::optional<int> max_depth;  // unlimited when empty
  int min_samples_leaf = 1;
};

/// Binary regression tree over the four process inputs.
///
/// Nodes live in a flat array; node 0 is the root. An internal node sends x to
/// `right` when x[feature] >= threshold and to `left` otherwise.
class TreeModel {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;     // weighted mean of the training targets in the node
    double impurity = 0.0;  // weighted sum of squared deviations
    double weight = 0.0;    // total sample weight
    int samples = 0;

    bool is_leaf() const { return feature < 0; }
    friend bool operator==(const Node&, const Node&) = default;
  };

  TreeModel() = default;
  TreeModel(std::vector<Node> nodes, TreeParams params);

  const std::vector<Node>& nodes() const { return nodes_; }
  const TreeParams& params() const { return params_; }
  int depth() const;
  int leaf_count() const;

  /// No input validation; callers on hot paths use this.
  double predict_unchecked(const InputVector& x) const {
    const Node* node = &nodes_[0];
    while (!node->is_leaf()) {
      node = &nodes_[static_cast<std::size_t>(x(node->feature) >= node->threshold ? node->right
                                                                                  : node->left)];
    }
    return node->value;
  }

  /// Structural equality (thresholds, routing and leaf values).
  bool same_structure(const TreeModel& other) const;

 private:
  std::vector<Node> nodes_;
  TreeParams params_;
};

/// Greedy CART growth minimizing the weighted squared error of the children.
/// Thresholds are midpoints between consecutive distinct feature values; ties
/// go to the lowest feature index, then the lowest threshold.
/// Throws EmptyDatasetError, SizeError on a weight-length mismatch and
/// WeightError on negative, non-finite or all-zero weights.
TreeModel fit_tree(const Dataset& data, const TreeParams& params = {});
TreeModel fit_tree(const Dataset& data, const Eigen::VectorXd& weights, const TreeParams& params = {});
TreeModel fit_tree(const InputMatrix& x, const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                   const TreeParams& params = {});

/// Throws InputError for a non-finite input.
double predict_tree(const TreeModel& model, const InputVector& x);
Eigen::VectorXd predict_tree(const TreeModel& model, const InputMatrix& x);

inline double predict(const TreeModel& model, const InputVector& x) { return predict_tree(model, x); }

}  // namespace amtl
