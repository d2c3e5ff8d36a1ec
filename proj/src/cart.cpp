#include "dgbf/cart.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dgbf::cart {

namespace {

// Two candidate splits whose SSE reductions differ by less than this relative
// amount are treated as tied; the earlier one (lower feature, lower threshold)
// is kept.
constexpr double kTieTolerance = 1e-10;

double midpoint(double lo, double hi) {
  double mid = (lo + hi) / 2.0;
  if (!std::isfinite(mid)) mid = lo / 2.0 + hi / 2.0;
  // Adjacent doubles: the midpoint rounds onto `hi`, which would route `hi` left.
  if (mid >= hi) mid = lo;
  return mid;
}

struct Job {
  Index begin;
  Index end;
  Index depth;
  std::uint32_t parent;
  bool is_left;
};

struct SplitChoice {
  bool found = false;
  Index feature = 0;
  Index n_left = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

class Builder {
 public:
  Builder(const Matrix& features, const Matrix& targets, const TreeConfig& config,
          std::span<const Index> rows)
      : config_(config), n_(rows.size()), p_(features.cols()), k_(targets.cols()) {
    load_features(features, rows);
    load_targets(targets, rows);
    presort();
    flags_.resize(n_);
    buffer_.resize(n_);
    left_sum_.resize(n_unique());
    node_mean_.resize(n_unique());
  }

  Tree build() {
    std::vector<Job> stack;
    stack.push_back({0, n_, 0, Node::kNone, false});
    while (!stack.empty()) {
      Job job = stack.back();
      stack.pop_back();
      const auto id = static_cast<std::uint32_t>(nodes_.size());
      nodes_.emplace_back();
      if (job.parent != Node::kNone) {
        (job.is_left ? nodes_[job.parent].left : nodes_[job.parent].right) = id;
      }
      nodes_[id].sample_count = static_cast<std::uint32_t>(job.end - job.begin);

      compute_node_mean(job.begin, job.end);
      SplitChoice split;
      const Index count = job.end - job.begin;
      if (job.depth < config_.max_depth && count >= config_.min_samples_split &&
          count >= 2 * config_.min_samples_leaf) {
        split = find_split(job.begin, job.end);
      }
      if (!split.found || !(split.gain > kMinImprovement)) {
        make_leaf(id);
        continue;
      }
      nodes_[id].feature = static_cast<std::uint32_t>(split.feature);
      nodes_[id].threshold = split.threshold;
      partition(job.begin, job.end, split);
      const Index mid = job.begin + split.n_left;
      stack.push_back({mid, job.end, job.depth + 1, id, false});
      stack.push_back({job.begin, mid, job.depth + 1, id, true});
    }
    return Tree(std::move(nodes_), std::move(leaf_values_), k_, p_);
  }

 private:
  [[nodiscard]] Index n_unique() const noexcept { return multiplicity_.size(); }

  void load_features(const Matrix& features, std::span<const Index> rows) {
    x_.assign(p_ * n_, 0.0);
    for (Index i = 0; i < n_; ++i) {
      auto src = features.row(rows[i]);
      for (Index f = 0; f < p_; ++f) {
        if (!std::isfinite(src[f])) {
          throw TreeError(fmt::format("fit_tree: non-finite feature at row {}, column {}",
                                      rows[i], f));
        }
        x_[f * n_ + i] = src[f];
      }
    }
  }

  // Keeps one copy of each distinct target column (over the sampled rows) and
  // counts its multiplicity. Duplicated columns contribute identical SSE terms.
  void load_targets(const Matrix& targets, std::span<const Index> rows) {
    column_of_output_.resize(k_);
    std::vector<Index> unique_source;
    for (Index k = 0; k < k_; ++k) {
      Index match = Node::kNone;
      for (Index u = 0; u < unique_source.size() && match == Node::kNone; ++u) {
        const Index other = unique_source[u];
        bool same = true;
        for (Index i = 0; i < n_ && same; ++i) {
          same = targets(rows[i], k) == targets(rows[i], other);
        }
        if (same) match = u;
      }
      if (match == Node::kNone) {
        match = unique_source.size();
        unique_source.push_back(k);
        multiplicity_.push_back(0.0);
      }
      multiplicity_[match] += 1.0;
      column_of_output_[k] = match;
    }
    const Index u_count = unique_source.size();
    y_.assign(n_ * u_count, 0.0);
    for (Index i = 0; i < n_; ++i) {
      for (Index u = 0; u < u_count; ++u) {
        const double v = targets(rows[i], unique_source[u]);
        if (!std::isfinite(v)) {
          throw TreeError(fmt::format("fit_tree: non-finite target at row {}, output {}",
                                      rows[i], unique_source[u]));
        }
        y_[i * u_count + u] = v;
      }
    }
    z_.assign(n_ * u_count, 0.0);
  }

  void presort() {
    order_.assign(p_ * n_, 0);
    for (Index f = 0; f < p_; ++f) {
      auto first = order_.begin() + static_cast<std::ptrdiff_t>(f * n_);
      std::iota(first, first + static_cast<std::ptrdiff_t>(n_), 0u);
      const double* col = x_.data() + f * n_;
      std::stable_sort(first, first + static_cast<std::ptrdiff_t>(n_),
                       [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
    }
  }

  // Node means over the sampled rows, and targets centred on them for the
  // split scan (keeps the sums small, so constant targets give zero gain).
  void compute_node_mean(Index begin, Index end) {
    const Index u_count = n_unique();
    std::fill(node_mean_.begin(), node_mean_.end(), 0.0);
    const std::uint32_t* rows = order_.data();
    for (Index i = begin; i < end; ++i) {
      const double* y = y_.data() + rows[i] * u_count;
      for (Index u = 0; u < u_count; ++u) node_mean_[u] += y[u];
    }
    const auto count = static_cast<double>(end - begin);
    for (auto& m : node_mean_) m /= count;
    for (Index i = begin; i < end; ++i) {
      const Index r = rows[i];
      for (Index u = 0; u < u_count; ++u) z_[r * u_count + u] = y_[r * u_count + u] - node_mean_[u];
    }
  }

  SplitChoice find_split(Index begin, Index end) {
    const Index u_count = n_unique();
    const Index count = end - begin;
    const auto n_node = static_cast<double>(count);
    const std::uint32_t* rows0 = order_.data();

    std::vector<double> total(u_count, 0.0);
    for (Index i = begin; i < end; ++i) {
      const double* z = z_.data() + rows0[i] * u_count;
      for (Index u = 0; u < u_count; ++u) total[u] += z[u];
    }
    double parent_term = 0.0;
    for (Index u = 0; u < u_count; ++u) parent_term += multiplicity_[u] * total[u] * total[u];
    parent_term /= n_node;

    SplitChoice best;
    const Index min_leaf = config_.min_samples_leaf;
    for (Index f = 0; f < p_; ++f) {
      const std::uint32_t* rows = order_.data() + f * n_;
      const double* col = x_.data() + f * n_;
      std::fill(left_sum_.begin(), left_sum_.end(), 0.0);
      for (Index i = begin; i + 1 < end; ++i) {
        const double* z = z_.data() + rows[i] * u_count;
        for (Index u = 0; u < u_count; ++u) left_sum_[u] += z[u];
        const Index n_left = i - begin + 1;
        const Index n_right = count - n_left;
        if (n_left < min_leaf) continue;
        if (n_right < min_leaf) break;
        const double lo = col[rows[i]];
        const double hi = col[rows[i + 1]];
        if (!(lo < hi)) continue;
        double left_term = 0.0;
        double right_term = 0.0;
        for (Index u = 0; u < u_count; ++u) {
          const double sl = left_sum_[u];
          const double sr = total[u] - sl;
          left_term += multiplicity_[u] * sl * sl;
          right_term += multiplicity_[u] * sr * sr;
        }
        const double gain = left_term / static_cast<double>(n_left) +
                            right_term / static_cast<double>(n_right) - parent_term;
        if (!best.found || gain > best.gain + kTieTolerance * std::fabs(best.gain)) {
          best.found = true;
          best.feature = f;
          best.n_left = n_left;
          best.threshold = midpoint(lo, hi);
          best.gain = gain;
        }
      }
    }
    return best;
  }

  void partition(Index begin, Index end, const SplitChoice& split) {
    const double* col = x_.data() + split.feature * n_;
    for (Index i = begin; i < end; ++i) {
      const std::uint32_t r = order_[split.feature * n_ + i];
      flags_[r] = col[r] <= split.threshold ? 1 : 0;
    }
    for (Index f = 0; f < p_; ++f) {
      std::uint32_t* rows = order_.data() + f * n_;
      Index left = begin;
      Index right = 0;
      for (Index i = begin; i < end; ++i) {
        if (flags_[rows[i]] != 0) {
          rows[left++] = rows[i];
        } else {
          buffer_[right++] = rows[i];
        }
      }
      std::copy(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(right),
                rows + left);
    }
  }

  void make_leaf(std::uint32_t id) {
    nodes_[id].leaf = static_cast<std::uint32_t>(leaf_values_.size() / k_);
    for (Index k = 0; k < k_; ++k) leaf_values_.push_back(node_mean_[column_of_output_[k]]);
  }

  TreeConfig config_;
  Index n_;
  Index p_;
  Index k_;
  std::vector<double> x_;  // p x n, feature-major
  std::vector<double> y_;  // n x unique outputs
  std::vector<double> z_;  // y_ centred on the current node mean
  std::vector<double> multiplicity_;
  std::vector<Index> column_of_output_;
  std::vector<std::uint32_t> order_;  // per feature, row positions sorted by value
  std::vector<std::uint8_t> flags_;
  std::vector<std::uint32_t> buffer_;
  std::vector<double> left_sum_;
  std::vector<double> node_mean_;
  std::vector<Node> nodes_;
  std::vector<double> leaf_values_;
};

}  // namespace

void TreeConfig::validate() const {
  if (max_depth < 1) throw TreeError("TreeConfig: max_depth must be >= 1");
  if (min_samples_split < 2) throw TreeError("TreeConfig: min_samples_split must be >= 2");
  if (min_samples_leaf < 1) throw TreeError("TreeConfig: min_samples_leaf must be >= 1");
}

Tree::Tree(std::vector<Node> nodes, std::vector<double> leaf_values, Index n_outputs,
           Index n_features)
    : nodes_(std::move(nodes)),
      leaf_values_(std::move(leaf_values)),
      n_outputs_(n_outputs),
      n_features_(n_features) {
  if (n_outputs_ == 0) throw TreeError("Tree: n_outputs must be >= 1");
  if (nodes_.empty()) throw TreeError("Tree: no nodes");
  if (leaf_values_.size() % n_outputs_ != 0) {
    throw TreeError("Tree: leaf value count is not a multiple of n_outputs");
  }
  const Index n_leaves = leaf_values_.size() / n_outputs_;
  // Every node other than the root must be the child of exactly one earlier
  // node (pre-order), which rules out cycles and shared subtrees.
  std::vector<std::uint8_t> referenced(nodes_.size(), 0);
  for (Index i = 0; i < nodes_.size(); ++i) {
    const Node& node = nodes_[i];
    if (node.is_leaf()) {
      if (node.leaf >= n_leaves) throw TreeError(fmt::format("Tree: node {} bad leaf slot", i));
      continue;
    }
    if (node.feature >= n_features_) {
      throw TreeError(fmt::format("Tree: node {} splits on feature {} of {}", i, node.feature,
                                  n_features_));
    }
    for (std::uint32_t child : {node.left, node.right}) {
      if (child <= i || child >= nodes_.size() || referenced[child] != 0) {
        throw TreeError(fmt::format("Tree: node {} has invalid child {}", i, child));
      }
      referenced[child] = 1;
    }
  }
  for (Index i = 1; i < nodes_.size(); ++i) {
    if (referenced[i] == 0) throw TreeError(fmt::format("Tree: node {} is unreachable", i));
  }
}

Index Tree::depth() const {
  std::vector<Index> depth(nodes_.size(), 0);
  Index deepest = 0;
  for (Index i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, depth[i]);
    if (!nodes_[i].is_leaf()) {
      depth[nodes_[i].left] = depth[i] + 1;
      depth[nodes_[i].right] = depth[i] + 1;
    }
  }
  return deepest;
}

std::uint32_t Tree::route(std::span<const double> features) const noexcept {
  std::uint32_t id = 0;
  while (!nodes_[id].is_leaf()) {
    const Node& node = nodes_[id];
    id = features[node.feature] <= node.threshold ? node.left : node.right;
  }
  return id;
}

Tree fit_tree(const Matrix& features, const Matrix& targets, const TreeConfig& config,
              std::span<const Index> row_indices) {
  config.validate();
  if (row_indices.empty()) throw TreeError("fit_tree: empty row set");
  if (features.rows() != targets.rows()) {
    throw TreeError(fmt::format("fit_tree: features have {} rows, targets have {}",
                                features.rows(), targets.rows()));
  }
  if (targets.cols() == 0) throw TreeError("fit_tree: targets need at least one column");
  if (features.cols() == 0) throw TreeError("fit_tree: features need at least one column");
  if (row_indices.size() >= Node::kNone) throw TreeError("fit_tree: too many rows");
  for (Index r : row_indices) {
    if (r >= features.rows()) {
      throw TreeError(fmt::format("fit_tree: row index {} out of range", r));
    }
  }
  return Builder(features, targets, config, row_indices).build();
}

Tree fit_tree(const Matrix& features, const Matrix& targets, const TreeConfig& config) {
  IndexSet rows(features.rows());
  std::iota(rows.begin(), rows.end(), Index{0});
  return fit_tree(features, targets, config, rows);
}

Matrix predict_tree(const Tree& tree, const Matrix& features) {
  if (features.cols() != tree.n_features()) {
    throw TreeError(fmt::format("predict_tree: tree expects {} features, got {}",
                                tree.n_features(), features.cols()));
  }
  Matrix out(features.rows(), tree.n_outputs());
  for (Index r = 0; r < features.rows(); ++r) {
    auto leaf = tree.predict_row(features.row(r));
    std::copy(leaf.begin(), leaf.end(), out.row(r).begin());
  }
  return out;
}

bool shift_targets_equivalence_check(const Matrix& features, const Matrix& targets, double c,
                                     const TreeConfig& config) {
  Matrix shifted = targets;
  for (auto& v : shifted.data()) v += c;
  const Tree base = fit_tree(features, targets, config);
  const Tree moved = fit_tree(features, shifted, config);
  if (base.nodes() != moved.nodes()) return false;
  const auto& a = base.leaf_values();
  const auto& b = moved.leaf_values();
  if (a.size() != b.size()) return false;
  for (Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::fabs(a[i]), std::fabs(c)});
    if (std::fabs((a[i] + c) - b[i]) > 1e-12 * scale * 16) return false;
  }
  return true;
}

}  // namespace dgbf::cart
