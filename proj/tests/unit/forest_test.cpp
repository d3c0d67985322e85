#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <mutex>
#include <numeric>
#include <set>

#include "calfmon/error.hpp"
#include "calfmon/forest.hpp"
#include "calfmon/model_io.hpp"
#include "calfmon/random.hpp"

namespace calfmon {
namespace {

using learn::ForestParams;

struct Problem {
  Eigen::MatrixXd X;
  std::vector<int> y;
};

// Label is decided by x0 > 0 xor x1 > 0; the other columns are noise.
Problem xor_problem(std::uint64_t seed, Eigen::Index n, Eigen::Index p = 6) {
  Rng rng(seed);
  Problem pb{Eigen::MatrixXd(n, p), {}};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) pb.X(i, j) = rng.uniform(-1.0, 1.0);
    pb.y.push_back((pb.X(i, 0) > 0.0) != (pb.X(i, 1) > 0.0) ? 1 : 0);
  }
  return pb;
}

const std::vector<std::string> kTwo{"a", "b"};

double accuracy(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(a.size());
}

TEST(Forest, LearnsAnInteraction) {
  const auto train = xor_problem(1, 600);
  const auto test = xor_problem(2, 400);
  ForestParams p;
  p.n_trees = 100;
  p.mtry = 3;
  const auto m = learn::fit_rf(train.X, train.y, kTwo, p, 5);
  EXPECT_GE(accuracy(learn::predict_rf(m, test.X).labels, test.y), 0.95);
  const auto imp = learn::impurity_importance(m);
  EXPECT_NEAR(std::accumulate(imp.begin(), imp.end(), 0.0), 1.0, 1e-9);
  for (std::size_t j = 2; j < imp.size(); ++j) {
    EXPECT_GT(imp[0], imp[j]);
    EXPECT_GT(imp[1], imp[j]);
  }
}

TEST(Forest, PureLabelsGrowSingleLeafTrees) {
  auto pb = xor_problem(3, 50);
  std::fill(pb.y.begin(), pb.y.end(), 1);
  ForestParams p;
  p.n_trees = 10;
  const auto m = learn::fit_rf(pb.X, pb.y, kTwo, p, 1);
  for (const auto& t : m.trees) EXPECT_EQ(t.nodes.size(), 1u);
  const auto pred = learn::predict_rf(m, pb.X);
  for (int l : pred.labels) EXPECT_EQ(l, 1);
  const auto imp = learn::impurity_importance(m);
  for (double v : imp) EXPECT_EQ(v, 0.0);
}

TEST(Forest, DeterministicBytes) {
  const auto pb = xor_problem(4, 200);
  ForestParams p;
  p.n_trees = 30;
  p.max_depth = 6;
  const learn::Model a = learn::ActivityModel{learn::fit_rf(pb.X, pb.y, kTwo, p, 11), {}};
  const learn::Model b = learn::ActivityModel{learn::fit_rf(pb.X, pb.y, kTwo, p, 11), {}};
  const learn::Model c = learn::ActivityModel{learn::fit_rf(pb.X, pb.y, kTwo, p, 12), {}};
  EXPECT_EQ(learn::save_model(a), learn::save_model(b));
  EXPECT_NE(learn::save_model(a), learn::save_model(c));
}

TEST(Forest, VotesAreFractionsAndAgreeWithLabels) {
  const auto pb = xor_problem(5, 300);
  ForestParams p;
  p.n_trees = 25;
  const auto m = learn::fit_rf(pb.X, pb.y, kTwo, p, 3);
  const auto pred = learn::predict_rf(m, xor_problem(6, 100).X);
  for (Eigen::Index i = 0; i < pred.votes.rows(); ++i) {
    EXPECT_NEAR(pred.votes.row(i).sum(), 1.0, 1e-12);
    const int want = pred.votes(i, 1) > pred.votes(i, 0) ? 1 : 0;
    EXPECT_EQ(pred.labels[static_cast<std::size_t>(i)], want);
  }
}

TEST(Forest, PredictionIgnoresTreeOrder) {
  const auto pb = xor_problem(7, 300);
  ForestParams p;
  p.n_trees = 20;
  auto m = learn::fit_rf(pb.X, pb.y, kTwo, p, 9);
  const auto test = xor_problem(8, 100).X;
  const auto before = learn::predict_rf(m, test);
  Rng rng(1);
  for (std::size_t i = m.trees.size(); i > 1; --i) std::swap(m.trees[i - 1], m.trees[rng.uniform_int(i)]);
  const auto after = learn::predict_rf(m, test);
  EXPECT_EQ(before.labels, after.labels);
  EXPECT_EQ(before.votes, after.votes);
}

class RecordingObserver : public learn::FitObserver {
 public:
  void on_bootstrap(std::size_t tree, std::span<const std::uint32_t> counts) override {
    std::lock_guard lock(mu_);
    bootstrap_[tree].assign(counts.begin(), counts.end());
  }
  void on_row_read(std::size_t tree, std::size_t row) override {
    std::lock_guard lock(mu_);
    reads_[tree].insert(row);
  }
  std::map<std::size_t, std::vector<std::uint32_t>> bootstrap_;
  std::map<std::size_t, std::set<std::size_t>> reads_;

 private:
  std::mutex mu_;
};

TEST(Forest, OutOfBagRowsAreNeverRead) {
  const auto pb = xor_problem(9, 150);
  ForestParams p;
  p.n_trees = 12;
  RecordingObserver obs;
  learn::fit_rf(pb.X, pb.y, kTwo, p, 4, {}, &obs);
  ASSERT_EQ(obs.bootstrap_.size(), 12u);
  for (const auto& [tree, counts] : obs.bootstrap_) {
    EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), 0u), 150u);
    std::size_t oob = 0;
    for (std::size_t r = 0; r < counts.size(); ++r) {
      if (counts[r] == 0) {
        ++oob;
        EXPECT_EQ(obs.reads_[tree].count(r), 0u);
      } else {
        EXPECT_EQ(obs.reads_[tree].count(r), 1u);
      }
    }
    EXPECT_GT(oob, 0u);
  }
}

TEST(Forest, TruncationEqualsAFreshFit) {
  const auto pb = xor_problem(10, 250);
  ForestParams big;
  big.n_trees = 40;
  big.min_samples_leaf = 2;
  const auto full = learn::fit_rf(pb.X, pb.y, kTwo, big, 17);
  for (std::size_t trees : {1u, 15u, 40u}) {
    for (std::optional<std::size_t> depth : {std::optional<std::size_t>{}, std::optional<std::size_t>{1},
                                             std::optional<std::size_t>{4}}) {
      ForestParams small = big;
      small.n_trees = trees;
      small.max_depth = depth;
      const auto direct = learn::fit_rf(pb.X, pb.y, kTwo, small, 17);
      const auto cut = learn::truncated(full, trees, depth);
      EXPECT_EQ(cut.params, direct.params);
      EXPECT_EQ(cut.trees, direct.trees) << trees << " trees";
    }
  }
  EXPECT_THROW(learn::truncated(full, 41, std::nullopt), Error);
  EXPECT_THROW(learn::truncated(full, 0, std::nullopt), Error);
  const auto shallow = learn::truncated(full, 10, 3);
  EXPECT_THROW(learn::truncated(shallow, 5, 5), Error);
}

TEST(Forest, DepthAndLeafLimitsHold) {
  const auto pb = xor_problem(11, 300);
  ForestParams p;
  p.n_trees = 10;
  p.max_depth = 3;
  p.min_samples_leaf = 7;
  const auto m = learn::fit_rf(pb.X, pb.y, kTwo, p, 2);
  for (const auto& t : m.trees) {
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      EXPECT_LE(t.nodes[i].depth, 3u);
      if (t.nodes[i].is_leaf()) EXPECT_GE(t.counts[2 * i] + t.counts[2 * i + 1], 7u);
    }
  }
}

TEST(Forest, Errors) {
  const auto pb = xor_problem(12, 40);
  auto code = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::io_error;
  };
  ForestParams p;
  p.n_trees = 0;
  EXPECT_EQ(code([&] { learn::fit_rf(pb.X, pb.y, kTwo, p, 1); }), Errc::bad_config);
  p.n_trees = 5;
  p.max_depth = 0;
  EXPECT_EQ(code([&] { learn::fit_rf(pb.X, pb.y, kTwo, p, 1); }), Errc::bad_config);
  p.max_depth.reset();
  p.min_samples_leaf = 0;
  EXPECT_EQ(code([&] { learn::fit_rf(pb.X, pb.y, kTwo, p, 1); }), Errc::bad_config);
  p.min_samples_leaf = 1;
  EXPECT_EQ(code([&] { learn::fit_rf(pb.X, pb.y, {"only"}, p, 1); }), Errc::degenerate_labels);
  EXPECT_EQ(code([&] { learn::fit_rf(pb.X.topRows(10), std::span(pb.y).first(10), kTwo, p, 1); }), Errc::bad_config);
  auto bad = pb.y;
  bad[3] = 2;
  EXPECT_EQ(code([&] { learn::fit_rf(pb.X, bad, kTwo, p, 1); }), Errc::unknown_label);
  const auto m = learn::fit_rf(pb.X, pb.y, kTwo, p, 1);
  EXPECT_EQ(code([&] { learn::predict_rf(m, pb.X.leftCols(3)); }), Errc::shape_mismatch);
}

}  // namespace
}  // namespace calfmon
