#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "dgbf/matrix.hpp"

namespace dgbf::cart {

class TreeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr Index kUnlimitedDepth = std::numeric_limits<std::uint32_t>::max();

// Smallest total SSE reduction a split must achieve to be taken.
inline constexpr double kMinImprovement = 1e-12;

struct TreeConfig {
  Index max_depth = 10;
  Index min_samples_split = 2;
  Index min_samples_leaf = 1;

  void validate() const;
  friend bool operator==(const TreeConfig&, const TreeConfig&) = default;
};

struct Node {
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  // Internal nodes: feature, threshold, left, right. Leaves: leaf slot into
  // Tree::leaf_values and the number of training rows routed there.
  std::uint32_t feature = kNone;
  double threshold = 0.0;
  std::uint32_t left = kNone;
  std::uint32_t right = kNone;
  std::uint32_t leaf = kNone;
  std::uint32_t sample_count = 0;

  [[nodiscard]] bool is_leaf() const noexcept { return leaf != kNone; }
  friend bool operator==(const Node&, const Node&) = default;
};

// Fitted multi-output regression tree. Nodes are stored in pre-order with the
// root at index 0; a row goes left iff its feature value is <= threshold.
class Tree {
 public:
  Tree() = default;
  Tree(std::vector<Node> nodes, std::vector<double> leaf_values, Index n_outputs,
       Index n_features);

  [[nodiscard]] const std::vector<Node>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] const std::vector<double>& leaf_values() const noexcept { return leaf_values_; }
  [[nodiscard]] Index n_outputs() const noexcept { return n_outputs_; }
  [[nodiscard]] Index n_features() const noexcept { return n_features_; }
  [[nodiscard]] Index n_leaves() const noexcept { return leaf_values_.size() / n_outputs_; }
  [[nodiscard]] Index depth() const;

  [[nodiscard]] std::span<const double> leaf_output(std::uint32_t leaf) const noexcept {
    return {leaf_values_.data() + static_cast<Index>(leaf) * n_outputs_, n_outputs_};
  }

  // Index of the node reached by `features` (one row).
  [[nodiscard]] std::uint32_t route(std::span<const double> features) const noexcept;
  [[nodiscard]] std::span<const double> predict_row(std::span<const double> features) const {
    return leaf_output(nodes_[route(features)].leaf);
  }

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  std::vector<Node> nodes_;
  std::vector<double> leaf_values_;
  Index n_outputs_ = 1;
  Index n_features_ = 0;
};

// Greedy CART induction on the rows listed in `row_indices` (repeats allowed,
// counted as duplicates). `targets` is n x K.
Tree fit_tree(const Matrix& features, const Matrix& targets, const TreeConfig& config,
              std::span<const Index> row_indices);
// Uses every row.
Tree fit_tree(const Matrix& features, const Matrix& targets, const TreeConfig& config);

// m x K outputs.
Matrix predict_tree(const Tree& tree, const Matrix& features);

// Refits on targets + c and checks the split structure is unchanged and every
// leaf moved by c (to rounding of the leaf means).
bool shift_targets_equivalence_check(const Matrix& features, const Matrix& targets, double c,
                                     const TreeConfig& config = {});

}  // namespace dgbf::cart
