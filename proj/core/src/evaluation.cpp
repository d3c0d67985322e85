#include "calfmon/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "calfmon/error.hpp"
#include "calfmon/json_util.hpp"
#include "calfmon/random.hpp"

namespace calfmon::eval {

using json = nlohmann::ordered_json;

namespace {

std::size_t fraction_count(std::size_t n) {
  const auto k = static_cast<std::size_t>(std::llround(kHoldoutFraction * static_cast<double>(n)));
  return std::max<std::size_t>(1, k);
}

// Partial Fisher-Yates: the first `k` entries become a uniform sample.
std::vector<std::string> draw(std::vector<std::string> pool, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_int(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<std::string> minus(const std::vector<std::string>& all, const std::vector<std::string>& removed) {
  std::vector<std::string> out;
  std::set_difference(all.begin(), all.end(), removed.begin(), removed.end(), std::back_inserter(out));
  return out;
}

double balanced_accuracy(std::span<const int> truth, std::span<const int> pred, std::size_t n_classes) {
  std::vector<long> hit(n_classes, 0);
  std::vector<long> support(n_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++support[static_cast<std::size_t>(truth[i])];
    if (truth[i] == pred[i]) ++hit[static_cast<std::size_t>(truth[i])];
  }
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (support[c] == 0) continue;
    sum += static_cast<double>(hit[c]) / static_cast<double>(support[c]);
    ++present;
  }
  return present ? sum / static_cast<double>(present) : 0.0;
}

}  // namespace

SplitPlan make_split(std::vector<std::string> calf_ids, std::uint64_t seed, std::size_t repeats) {
  std::sort(calf_ids.begin(), calf_ids.end());
  calf_ids.erase(std::unique(calf_ids.begin(), calf_ids.end()), calf_ids.end());
  if (calf_ids.size() < 10) {
    throw Error(Errc::too_few_groups, "need at least 10 calves, got " + std::to_string(calf_ids.size()));
  }
  Rng rng(seed);
  SplitPlan plan;
  plan.seed = seed;
  plan.test_calves = draw(calf_ids, fraction_count(calf_ids.size()), rng);
  plan.train_calves = minus(calf_ids, plan.test_calves);
  const std::size_t n_val = fraction_count(plan.train_calves.size());
  for (std::size_t r = 0; r < repeats; ++r) {
    Fold f;
    f.validation = draw(plan.train_calves, n_val, rng);
    f.train = minus(plan.train_calves, f.validation);
    plan.folds.push_back(std::move(f));
  }
  check_no_leakage(plan);
  return plan;
}

void check_no_leakage(const SplitPlan& plan) {
  auto disjoint = [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const std::set<std::string> sa(a.begin(), a.end());
    return std::none_of(b.begin(), b.end(), [&](const std::string& id) { return sa.count(id) > 0; });
  };
  if (!disjoint(plan.train_calves, plan.test_calves)) {
    throw Error(Errc::validation_failed, "test calves appear in the training portion");
  }
  const std::set<std::string> train(plan.train_calves.begin(), plan.train_calves.end());
  for (const auto& f : plan.folds) {
    if (!disjoint(f.train, f.validation)) throw Error(Errc::validation_failed, "validation calves appear in a fold's training portion");
    for (const auto& id : f.validation) {
      if (!train.count(id)) throw Error(Errc::validation_failed, "validation calf outside the training calves");
    }
    for (const auto& id : f.train) {
      if (!train.count(id)) throw Error(Errc::validation_failed, "fold training calf outside the training calves");
    }
  }
}

LabeledData subset(const LabeledData& data, std::span<const std::string> calves) {
  const std::set<std::string, std::less<>> keep(calves.begin(), calves.end());
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    if (keep.count(data.calf[i])) rows.push_back(static_cast<Eigen::Index>(i));
  }
  LabeledData out;
  out.classes = data.classes;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), data.X.cols());
  out.y.reserve(rows.size());
  out.calf.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.X.row(static_cast<Eigen::Index>(r)) = data.X.row(rows[r]);
    out.y.push_back(data.y[static_cast<std::size_t>(rows[r])]);
    out.calf.push_back(data.calf[static_cast<std::size_t>(rows[r])]);
  }
  return out;
}

Eigen::MatrixXi confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n_classes) {
  if (y_true.size() != y_pred.size()) throw Error(Errc::shape_mismatch, "label vectors differ in length");
  const auto nc = static_cast<int>(n_classes);
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(nc, nc);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_true[i] >= nc || y_pred[i] < 0 || y_pred[i] >= nc) {
      throw Error(Errc::unknown_label, "label outside the class list at index " + std::to_string(i));
    }
    ++m(y_true[i], y_pred[i]);
  }
  return m;
}

Scores metrics(const Eigen::MatrixXi& cm, std::span<const std::string> classes) {
  if (cm.rows() != cm.cols() || static_cast<std::size_t>(cm.rows()) != classes.size()) {
    throw Error(Errc::shape_mismatch, "confusion matrix does not match the class list");
  }
  const long total = cm.cast<long>().sum();
  Scores s;
  double sens_sum = 0.0;
  for (Eigen::Index c = 0; c < cm.rows(); ++c) {
    const long tp = cm(c, c);
    const long row = cm.row(c).cast<long>().sum();
    const long col = cm.col(c).cast<long>().sum();
    if (row == 0) throw Error(Errc::empty_class_row, "class '" + classes[static_cast<std::size_t>(c)] + "' has no samples");
    const long fn = row - tp;
    const long fp = col - tp;
    const long tn = total - tp - fn - fp;
    ClassScores cs;
    cs.name = classes[static_cast<std::size_t>(c)];
    cs.support = row;
    cs.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
    cs.specificity = (tn + fp) > 0 ? static_cast<double>(tn) / static_cast<double>(tn + fp) : 0.0;
    if (col == 0) {
      cs.precision = 0.0;
      cs.precision_undefined = true;
    } else {
      cs.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    sens_sum += cs.sensitivity;
    s.per_class.push_back(cs);
  }
  s.balanced_accuracy = sens_sum / static_cast<double>(cm.rows());
  return s;
}

std::vector<learn::ForestParams> default_forest_grid() {
  std::vector<learn::ForestParams> grid;
  for (std::size_t trees : {100, 300, 500}) {
    for (std::optional<std::size_t> depth : {std::optional<std::size_t>{}, std::optional<std::size_t>{10},
                                             std::optional<std::size_t>{20}}) {
      for (std::size_t leaf : {1, 5, 10}) {
        learn::ForestParams p;
        p.n_trees = trees;
        p.max_depth = depth;
        p.min_samples_leaf = leaf;
        grid.push_back(p);
      }
    }
  }
  return grid;
}

std::string to_json(const learn::ForestParams& p) {
  json j;
  j["n_trees"] = p.n_trees;
  j["max_depth"] = p.max_depth ? json(*p.max_depth) : json(nullptr);
  j["min_samples_leaf"] = p.min_samples_leaf;
  j["mtry"] = p.mtry ? json(*p.mtry) : json(nullptr);
  return j.dump();
}

std::string to_json(const RidgeParams& p) {
  json j;
  json alphas = json::array();
  for (double a : p.alphas) alphas.push_back(round_sig(a));
  j["alphas"] = alphas;
  return j.dump();
}

GridResult grid_search(std::span<const learn::ForestParams> grid, const LabeledData& data, const SplitPlan& plan,
                       std::uint64_t seed) {
  if (grid.empty()) throw Error(Errc::bad_config, "grid is empty");
  for (const auto& p : grid) p.validate();
  check_no_leakage(plan);

  GridResult result;
  result.trace.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) result.trace[g].params = to_json(grid[g]);

  // Points that differ only in tree count or depth share one grown forest.
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> groups;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    groups[{grid[g].min_samples_leaf, grid[g].mtry.value_or(0)}].push_back(g);
  }

  for (const auto& fold : plan.folds) {
    const LabeledData train = subset(data, fold.train);
    const LabeledData val = subset(data, fold.validation);
    for (const auto& [key, members] : groups) {
      learn::ForestParams big = grid[members.front()];
      big.n_trees = 0;
      bool unbounded = false;
      std::size_t deepest = 0;
      for (std::size_t g : members) {
        big.n_trees = std::max(big.n_trees, grid[g].n_trees);
        if (!grid[g].max_depth) {
          unbounded = true;
        } else {
          deepest = std::max(deepest, *grid[g].max_depth);
        }
      }
      big.max_depth = unbounded ? std::nullopt : std::optional<std::size_t>(deepest);
      const auto forest = learn::fit_rf(train.X, train.y, data.classes, big, seed);
      for (std::size_t g : members) {
        const auto model = learn::truncated(forest, grid[g].n_trees, grid[g].max_depth);
        const auto pred = learn::predict_rf(model, val.X);
        result.trace[g].fold_scores.push_back(balanced_accuracy(val.y, pred.labels, data.classes.size()));
      }
    }
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto& e = result.trace[g];
    double sum = 0.0;
    for (double s : e.fold_scores) sum += s;
    e.mean_score = e.fold_scores.empty() ? 0.0 : sum / static_cast<double>(e.fold_scores.size());
    if (e.mean_score > result.trace[result.best].mean_score) result.best = g;
  }
  return result;
}

GridResult grid_search(std::span<const RidgeParams> grid, const LabeledData& data, const SplitPlan& plan) {
  if (grid.empty()) throw Error(Errc::bad_config, "grid is empty");
  check_no_leakage(plan);
  GridResult result;
  result.trace.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) result.trace[g].params = to_json(grid[g]);
  for (const auto& fold : plan.folds) {
    const LabeledData train = subset(data, fold.train);
    const LabeledData val = subset(data, fold.validation);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto model = learn::fit_ridge_cv(train.X, train.y, data.classes, grid[g].alphas);
      const auto pred = learn::predict_ridge(model, val.X);
      result.trace[g].fold_scores.push_back(balanced_accuracy(val.y, pred.labels, data.classes.size()));
    }
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto& e = result.trace[g];
    double sum = 0.0;
    for (double s : e.fold_scores) sum += s;
    e.mean_score = e.fold_scores.empty() ? 0.0 : sum / static_cast<double>(e.fold_scores.size());
    if (e.mean_score > result.trace[result.best].mean_score) result.best = g;
  }
  return result;
}

std::string to_json(const EvalReport& r) {
  json j;
  j["model"] = r.model;
  j["classes"] = r.classes;
  json cm = json::array();
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < r.confusion.cols(); ++k) row.push_back(r.confusion(i, k));
    cm.push_back(row);
  }
  j["confusion"] = cm;
  j["balanced_accuracy"] = round_sig(r.scores.balanced_accuracy);
  json per_class = json::array();
  for (const auto& c : r.scores.per_class) {
    json e;
    e["class"] = c.name;
    e["support"] = c.support;
    e["sensitivity"] = round_sig(c.sensitivity);
    e["specificity"] = round_sig(c.specificity);
    e["precision"] = round_sig(c.precision);
    e["precision_undefined"] = c.precision_undefined;
    per_class.push_back(e);
  }
  j["per_class"] = per_class;
  j["test_windows"] = r.test_windows;
  j["chosen_params"] = r.chosen_params.empty() ? json(nullptr) : json::parse(r.chosen_params);
  json trace = json::array();
  for (const auto& e : r.grid.trace) {
    json t;
    t["params"] = json::parse(e.params);
    t["mean_balanced_accuracy"] = round_sig(e.mean_score);
    json folds = json::array();
    for (double s : e.fold_scores) folds.push_back(round_sig(s));
    t["fold_scores"] = folds;
    trace.push_back(t);
  }
  j["grid_trace"] = trace;
  json split;
  split["seed"] = r.plan.seed;
  split["test_calves"] = r.plan.test_calves;
  split["train_calves"] = r.plan.train_calves;
  json folds = json::array();
  for (const auto& f : r.plan.folds) folds.push_back(json{{"validation", f.validation}});
  split["folds"] = folds;
  j["split"] = split;
  return j.dump(2);
}

}  // namespace calfmon::eval
