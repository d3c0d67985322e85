#include "calfmon/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "calfmon/error.hpp"
#include "calfmon/parallel.hpp"
#include "calfmon/random.hpp"

namespace calfmon::learn {

void ForestParams::validate() const {
  if (n_trees == 0) throw Error(Errc::bad_config, "forest needs at least one tree");
  if (max_depth && *max_depth == 0) throw Error(Errc::bad_config, "max_depth must be positive");
  if (min_samples_leaf == 0) throw Error(Errc::bad_config, "min_samples_leaf must be positive");
  if (mtry && *mtry == 0) throw Error(Errc::bad_config, "mtry must be positive");
}

namespace {

using RowId = std::uint32_t;

struct PendingNode {
  std::size_t begin;
  std::size_t end;
  std::uint32_t depth;
  std::uint64_t seed;
  std::int32_t parent;
  bool is_left;
};

// Grows one tree on the in-bag rows. Every feature column is kept as a list of
// local row ids sorted by value; a node owns the same [begin, end) slice of
// every list, and splitting stably partitions each slice.
class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& X, std::span<const int> y, std::size_t n_classes,
              const ForestParams& params, std::size_t mtry,
              const std::vector<std::vector<RowId>>& global_order)
      : X_(X), y_(y), n_classes_(n_classes), params_(params), mtry_(mtry), global_order_(global_order) {}

  Tree build(std::size_t tree_index, std::uint64_t tree_seed, FitObserver* observer) {
    const std::size_t n = static_cast<std::size_t>(X_.rows());
    const std::size_t k = static_cast<std::size_t>(X_.cols());

    Rng rng(tree_seed);
    std::vector<std::uint32_t> bootstrap(n, 0);
    for (std::size_t i = 0; i < n; ++i) ++bootstrap[rng.uniform_int(n)];
    if (observer) observer->on_bootstrap(tree_index, bootstrap);

    std::vector<RowId> local_of(n, 0);
    m_ = 0;
    for (std::size_t r = 0; r < n; ++r) {
      if (bootstrap[r] > 0) local_of[r] = static_cast<RowId>(m_++);
    }
    values_.assign(m_ * k, 0.0);
    weight_.assign(m_, 0);
    label_.assign(m_, 0);
    for (std::size_t r = 0; r < n; ++r) {
      if (bootstrap[r] == 0) continue;
      if (observer) observer->on_row_read(tree_index, r);
      const RowId l = local_of[r];
      for (std::size_t f = 0; f < k; ++f) values_[f * m_ + l] = X_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f));
      weight_[l] = bootstrap[r];
      label_[l] = y_[r];
    }
    sorted_.assign(k, {});
    for (std::size_t f = 0; f < k; ++f) {
      auto& s = sorted_[f];
      s.reserve(m_);
      for (RowId r : global_order_[f]) {
        if (bootstrap[r] > 0) s.push_back(local_of[r]);
      }
    }
    goes_left_.assign(m_, 0);
    scratch_.resize(m_);

    tree_ = Tree{};
    std::vector<PendingNode> stack{{0, m_, 0, derive_seed(tree_seed, 0), -1, false}};
    while (!stack.empty()) {
      const PendingNode node = stack.back();
      stack.pop_back();
      grow(node, stack);
    }
    return std::move(tree_);
  }

 private:
  void grow(const PendingNode& pn, std::vector<PendingNode>& stack) {
    const auto idx = static_cast<std::int32_t>(tree_.nodes.size());
    TreeNode node;
    node.depth = pn.depth;
    tree_.nodes.push_back(node);
    if (pn.parent >= 0) {
      auto& parent = tree_.nodes[static_cast<std::size_t>(pn.parent)];
      (pn.is_left ? parent.left : parent.right) = idx;
    }

    const std::size_t base = tree_.counts.size();
    tree_.counts.resize(base + n_classes_, 0);
    std::uint64_t total = 0;
    for (std::size_t i = pn.begin; i < pn.end; ++i) {
      const RowId r = sorted_[0][i];
      tree_.counts[base + static_cast<std::size_t>(label_[r])] += weight_[r];
      total += weight_[r];
    }
    std::size_t nonzero = 0;
    for (std::size_t c = 0; c < n_classes_; ++c) nonzero += tree_.counts[base + c] > 0 ? 1 : 0;

    if ((params_.max_depth && pn.depth >= *params_.max_depth) || total < 2 * params_.min_samples_leaf ||
        nonzero <= 1) {
      return;
    }

    const Split split = find_split(pn, base, total);
    if (split.feature < 0) return;

    auto& self = tree_.nodes[static_cast<std::size_t>(idx)];
    self.feature = split.feature;
    self.threshold = split.threshold;

    const auto& col = sorted_[static_cast<std::size_t>(split.feature)];
    const double* v = values_.data() + static_cast<std::size_t>(split.feature) * m_;
    std::size_t n_left = 0;
    for (std::size_t i = pn.begin; i < pn.end; ++i) {
      const RowId r = col[i];
      goes_left_[r] = v[r] <= split.threshold ? 1 : 0;
      n_left += goes_left_[r];
    }
    for (auto& s : sorted_) {
      std::size_t l = pn.begin;
      std::size_t rpos = 0;
      for (std::size_t i = pn.begin; i < pn.end; ++i) {
        const RowId r = s[i];
        if (goes_left_[r]) {
          s[l++] = r;
        } else {
          scratch_[rpos++] = r;
        }
      }
      std::copy_n(scratch_.begin(), rpos, s.begin() + static_cast<std::ptrdiff_t>(l));
    }
    const std::size_t mid = pn.begin + n_left;
    stack.push_back({mid, pn.end, pn.depth + 1, derive_seed(pn.seed, 2), idx, false});
    stack.push_back({pn.begin, mid, pn.depth + 1, derive_seed(pn.seed, 1), idx, true});
  }

  struct Split {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double score = -1.0;
  };

  // Maximizes sum_c(l_c^2)/w_l + sum_c(r_c^2)/w_r, which minimizes the
  // weighted Gini impurity of the children. Features are visited in a random
  // order until `mtry_` of them offered a valid split.
  Split find_split(const PendingNode& pn, std::size_t base, std::uint64_t total) {
    const std::size_t k = sorted_.size();
    feature_order_.resize(k);
    std::iota(feature_order_.begin(), feature_order_.end(), 0);
    Rng rng(pn.seed);
    const auto min_leaf = static_cast<std::uint64_t>(params_.min_samples_leaf);

    Split best;
    std::size_t usable = 0;
    left_counts_.resize(n_classes_);
    for (std::size_t t = 0; t < k && usable < mtry_; ++t) {
      const std::size_t j = t + rng.uniform_int(k - t);
      std::swap(feature_order_[t], feature_order_[j]);
      const std::size_t f = feature_order_[t];
      const auto& col = sorted_[f];
      const double* v = values_.data() + f * m_;

      std::fill(left_counts_.begin(), left_counts_.end(), 0);
      std::uint64_t w_left = 0;
      bool found = false;
      for (std::size_t i = pn.begin; i + 1 < pn.end; ++i) {
        const RowId r = col[i];
        left_counts_[static_cast<std::size_t>(label_[r])] += weight_[r];
        w_left += weight_[r];
        const double a = v[r];
        const double b = v[col[i + 1]];
        if (!(a < b)) continue;
        const std::uint64_t w_right = total - w_left;
        if (w_left < min_leaf || w_right < min_leaf) continue;
        double sl = 0.0;
        double sr = 0.0;
        for (std::size_t c = 0; c < n_classes_; ++c) {
          const auto lc = static_cast<double>(left_counts_[c]);
          const auto rc = static_cast<double>(tree_.counts[base + c]) - lc;
          sl += lc * lc;
          sr += rc * rc;
        }
        const double score = sl / static_cast<double>(w_left) + sr / static_cast<double>(w_right);
        found = true;
        if (score > best.score) {
          double thr = a + (b - a) / 2.0;
          if (!(thr >= a && thr < b)) thr = a;
          best = {static_cast<std::int32_t>(f), thr, score};
        }
      }
      if (found) ++usable;
    }
    return best;
  }

  const Eigen::MatrixXd& X_;
  std::span<const int> y_;
  std::size_t n_classes_;
  const ForestParams& params_;
  std::size_t mtry_;
  const std::vector<std::vector<RowId>>& global_order_;

  std::size_t m_ = 0;
  std::vector<double> values_;
  std::vector<std::uint32_t> weight_;
  std::vector<int> label_;
  std::vector<std::vector<RowId>> sorted_;
  std::vector<std::uint8_t> goes_left_;
  std::vector<RowId> scratch_;
  std::vector<std::size_t> feature_order_;
  std::vector<std::uint64_t> left_counts_;
  Tree tree_;
};

int argmax_first(const std::uint32_t* counts, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < n; ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return static_cast<int>(best);
}

double gini_weighted(const std::uint32_t* counts, std::size_t n) {
  double total = 0.0;
  double sq = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    total += counts[c];
    sq += static_cast<double>(counts[c]) * counts[c];
  }
  return total > 0.0 ? total - sq / total : 0.0;
}

}  // namespace

ForestModel fit_rf(const Eigen::MatrixXd& X, std::span<const int> y, std::vector<std::string> classes,
                   const ForestParams& params, std::uint64_t seed, std::vector<std::string> feature_names,
                   FitObserver* observer) {
  params.validate();
  const std::size_t n = static_cast<std::size_t>(X.rows());
  const std::size_t k = static_cast<std::size_t>(X.cols());
  if (n != y.size()) throw Error(Errc::shape_mismatch, "label count does not match rows");
  if (k == 0) throw Error(Errc::shape_mismatch, "forest needs at least one feature");
  if (!feature_names.empty() && feature_names.size() != k) {
    throw Error(Errc::shape_mismatch, "feature name count does not match columns");
  }
  if (classes.size() < 2) throw Error(Errc::degenerate_labels, "forest needs at least two classes");
  if (n < 20) throw Error(Errc::bad_config, "forest needs at least 20 rows");
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes.size()) {
      throw Error(Errc::unknown_label, "label index outside the class list");
    }
  }
  if (!X.allFinite()) throw Error(Errc::singular_input, "non-finite feature values");

  const std::size_t mtry = std::min(
      k, params.mtry.value_or(std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(k)))))));

  std::vector<std::vector<RowId>> order(k, std::vector<RowId>(n));
  parallel_for(k, [&](std::size_t f) {
    auto& o = order[f];
    std::iota(o.begin(), o.end(), 0);
    const auto col = X.col(static_cast<Eigen::Index>(f));
    std::stable_sort(o.begin(), o.end(), [&](RowId a, RowId b) { return col(a) < col(b); });
  });

  ForestModel model;
  model.classes = std::move(classes);
  model.params = params;
  model.feature_names = std::move(feature_names);
  model.n_features = k;
  model.seed = seed;
  model.trees.resize(params.n_trees);
  const std::size_t n_classes = model.classes.size();
  parallel_for(params.n_trees, [&](std::size_t t) {
    TreeBuilder builder(X, y, n_classes, params, mtry, order);
    model.trees[t] = builder.build(t, derive_seed(seed, t), observer);
  });
  return model;
}

ForestPrediction predict_rf(const ForestModel& m, const Eigen::MatrixXd& X) {
  if (static_cast<std::size_t>(X.cols()) != m.n_features) {
    throw Error(Errc::shape_mismatch, "expected " + std::to_string(m.n_features) + " feature columns");
  }
  const std::size_t n_classes = m.classes.size();
  ForestPrediction out;
  out.labels.resize(static_cast<std::size_t>(X.rows()));
  out.votes = Eigen::MatrixXd::Zero(X.rows(), static_cast<Eigen::Index>(n_classes));
  if (m.trees.empty()) return out;
  const double per_tree = 1.0 / static_cast<double>(m.trees.size());
  parallel_for(static_cast<std::size_t>(X.rows()), [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    std::vector<std::uint32_t> tally(n_classes, 0);
    for (const auto& tree : m.trees) {
      std::size_t node = 0;
      while (!tree.nodes[node].is_leaf()) {
        const auto& nd = tree.nodes[node];
        node = static_cast<std::size_t>(X(row, nd.feature) <= nd.threshold ? nd.left : nd.right);
      }
      ++tally[static_cast<std::size_t>(argmax_first(&tree.counts[node * n_classes], n_classes))];
    }
    for (std::size_t c = 0; c < n_classes; ++c) out.votes(row, static_cast<Eigen::Index>(c)) = tally[c] * per_tree;
    out.labels[i] = argmax_first(tally.data(), n_classes);
  });
  return out;
}

ForestModel truncated(const ForestModel& m, std::size_t n_trees, std::optional<std::size_t> max_depth) {
  if (n_trees == 0 || n_trees > m.trees.size()) throw Error(Errc::bad_config, "cannot truncate to that many trees");
  if (m.params.max_depth && max_depth && *max_depth > *m.params.max_depth) {
    throw Error(Errc::bad_config, "truncation cannot deepen a forest");
  }
  ForestModel out = m;
  out.params.n_trees = n_trees;
  out.params.max_depth = max_depth ? max_depth : m.params.max_depth;
  out.trees.resize(n_trees);
  if (!max_depth) return out;

  const std::size_t n_classes = m.classes.size();
  for (auto& tree : out.trees) {
    Tree cut;
    // Pre-order walk of the retained nodes reproduces the builder's order.
    std::vector<std::pair<std::size_t, std::int32_t>> stack{{0, -1}};
    std::vector<bool> is_left_child{false};
    while (!stack.empty()) {
      const auto [src, parent] = stack.back();
      const bool left = is_left_child.back();
      stack.pop_back();
      is_left_child.pop_back();
      const auto idx = static_cast<std::int32_t>(cut.nodes.size());
      TreeNode node = tree.nodes[src];
      const bool keep_split = !node.is_leaf() && node.depth < *max_depth;
      if (!keep_split) {
        node.feature = -1;
        node.threshold = 0.0;
      }
      const auto src_left = node.left;
      const auto src_right = node.right;
      node.left = -1;
      node.right = -1;
      cut.nodes.push_back(node);
      cut.counts.insert(cut.counts.end(), tree.counts.begin() + static_cast<std::ptrdiff_t>(src * n_classes),
                        tree.counts.begin() + static_cast<std::ptrdiff_t>((src + 1) * n_classes));
      if (parent >= 0) {
        auto& p = cut.nodes[static_cast<std::size_t>(parent)];
        (left ? p.left : p.right) = idx;
      }
      if (keep_split) {
        stack.emplace_back(static_cast<std::size_t>(src_right), idx);
        is_left_child.push_back(false);
        stack.emplace_back(static_cast<std::size_t>(src_left), idx);
        is_left_child.push_back(true);
      }
    }
    tree = std::move(cut);
  }
  return out;
}

std::vector<double> impurity_importance(const ForestModel& m) {
  const std::size_t n_classes = m.classes.size();
  std::vector<double> total(m.n_features, 0.0);
  std::size_t contributing = 0;
  for (const auto& tree : m.trees) {
    std::vector<double> imp(m.n_features, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const auto& nd = tree.nodes[i];
      if (nd.is_leaf()) continue;
      const double dec = gini_weighted(&tree.counts[i * n_classes], n_classes) -
                         gini_weighted(&tree.counts[static_cast<std::size_t>(nd.left) * n_classes], n_classes) -
                         gini_weighted(&tree.counts[static_cast<std::size_t>(nd.right) * n_classes], n_classes);
      imp[static_cast<std::size_t>(nd.feature)] += dec;
      sum += dec;
    }
    if (sum <= 0.0) continue;
    ++contributing;
    for (std::size_t f = 0; f < m.n_features; ++f) total[f] += imp[f] / sum;
  }
  if (contributing > 0) {
    for (auto& v : total) v /= static_cast<double>(contributing);
  }
  return total;
}

}  // namespace calfmon::learn
