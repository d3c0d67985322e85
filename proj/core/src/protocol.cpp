#include "calfmon/protocol.hpp"

#include <cstdio>
#include <set>

#include <json.hpp>

#include "calfmon/error.hpp"
#include "calfmon/features.hpp"
#include "calfmon/json_util.hpp"
#include "calfmon/random.hpp"
#include "calfmon/rocket.hpp"

namespace calfmon::protocol {

using json = nlohmann::ordered_json;

namespace {

// Independent streams derived from the user seed.
enum SeedStream : std::uint64_t { kKernelStream = 1, kSelectionStream = 2, kForestStream = 3 };

eval::LabeledData take(eval::LabeledData& all, const std::vector<std::string>& calves) {
  return eval::subset(all, calves);
}

eval::EvalReport score(const std::string& model, const std::vector<std::string>& classes,
                       const eval::LabeledData& test, const std::vector<int>& predicted) {
  eval::EvalReport r;
  r.model = model;
  r.classes = classes;
  r.confusion = eval::confusion(test.y, predicted, classes.size());
  r.scores = eval::metrics(r.confusion, classes);
  r.test_windows = test.rows();
  return r;
}

std::string metadata(const std::string& model, const TrainConfig& cfg, const eval::EvalReport& r) {
  json j;
  j["model"] = model;
  j["seed"] = cfg.seed;
  j["test_calves"] = r.plan.test_calves;
  j["train_calves"] = r.plan.train_calves;
  j["chosen_params"] = json::parse(r.chosen_params);
  j["test_balanced_accuracy"] = round_sig(r.scores.balanced_accuracy);
  return j.dump();
}

std::vector<std::string> ids_of(const std::vector<data::CalfSource>& sources) {
  std::vector<std::string> ids;
  for (const auto& s : sources) ids.push_back(s.calf_id);
  return ids;
}

std::vector<Activity> as_activity(const std::vector<int>& y) {
  std::vector<Activity> out;
  out.reserve(y.size());
  for (int v : y) out.push_back(static_cast<Activity>(v));
  return out;
}

}  // namespace

data::Featurizer handcrafted_featurizer() {
  return [](std::span<const signal::Window> w) { return features::handcrafted_matrix(w); };
}

data::Featurizer rocket_featurizer(const rocket::KernelSet& ks) {
  return [&ks](std::span<const signal::Window> w) { return rocket::transform(w, ks); };
}

TrainResult train_model1(const std::vector<data::CalfSource>& sources, const TrainConfig& cfg) {
  auto plan = eval::make_split(ids_of(sources), cfg.seed, cfg.repeats);
  auto all = data::build_dataset(sources, handcrafted_featurizer(), data::Target::activity);
  auto train = take(all, plan.train_calves);
  auto test = take(all, plan.test_calves);
  all = {};

  const auto subset = features::select_features(train.X, as_activity(train.y), cfg.selected_features,
                                                derive_seed(cfg.seed, kSelectionStream), cfg.selection_trees);
  train.X = features::project(train.X, subset);
  test.X = features::project(test.X, subset);

  const std::uint64_t forest_seed = derive_seed(cfg.seed, kForestStream);
  auto grid = eval::grid_search(cfg.forest_grid, train, plan, forest_seed);
  const auto& best = cfg.forest_grid[grid.best];
  learn::ActivityModel model{learn::fit_rf(train.X, train.y, train.classes, best, forest_seed, subset.names), subset};
  const auto pred = learn::predict_rf(model.forest, test.X);

  TrainResult out;
  out.report = score("model1", train.classes, test, pred.labels);
  out.report.chosen_params = eval::to_json(best);
  out.report.grid = std::move(grid);
  out.report.plan = std::move(plan);
  model.forest.metadata = metadata("model1", cfg, out.report);
  out.model = std::move(model);
  return out;
}

TrainResult train_model2(const std::vector<data::CalfSource>& sources, const TrainConfig& cfg) {
  if (cfg.ridge_grid.empty()) throw Error(Errc::bad_config, "ridge grid is empty");
  auto plan = eval::make_split(ids_of(sources), cfg.seed, cfg.repeats);
  const auto ks = rocket::sample_kernels(derive_seed(cfg.seed, kKernelStream), cfg.kernels, signal::kWindowLength,
                                         signal::kChannels);
  auto all = data::build_dataset(sources, rocket_featurizer(ks), data::Target::behaviour);
  auto train = take(all, plan.train_calves);
  auto test = take(all, plan.test_calves);
  all = {};

  auto grid = eval::grid_search(cfg.ridge_grid, train, plan);
  const auto& best = cfg.ridge_grid[grid.best];
  auto model = learn::fit_ridge_cv(train.X, train.y, train.classes, best.alphas);
  model.kernels = ks;
  train = {};
  const auto pred = learn::predict_ridge(model, test.X);

  TrainResult out;
  out.report = score("model2", test.classes, test, pred.labels);
  json chosen = json::parse(eval::to_json(best));
  chosen["alpha"] = round_sig(model.alpha);
  chosen["kernels"] = cfg.kernels;
  out.report.chosen_params = chosen.dump();
  out.report.grid = std::move(grid);
  out.report.plan = std::move(plan);
  model.metadata = metadata("model2", cfg, out.report);
  out.model = std::move(model);
  return out;
}

eval::EvalReport evaluate(const learn::Model& model, const std::vector<data::CalfSource>& sources,
                          const std::vector<std::string>& calves) {
  const json meta = json::parse(learn::metadata_of(model), nullptr, false);
  std::vector<std::string> test = calves;
  if (test.empty() && meta.is_object() && meta.contains("test_calves")) {
    test = meta["test_calves"].get<std::vector<std::string>>();
  }
  if (test.empty()) throw Error(Errc::bad_config, "no evaluation calves given and none recorded in the model");
  const std::set<std::string> only(test.begin(), test.end());
  std::set<std::string> known;
  for (const auto& s : sources) known.insert(s.calf_id);
  for (const auto& id : test) {
    if (!known.count(id)) throw Error(Errc::unknown_calf, "calf '" + id + "' is not in the herd");
  }

  eval::EvalReport r;
  if (const auto* m1 = std::get_if<learn::ActivityModel>(&model)) {
    auto d = data::build_dataset(sources, handcrafted_featurizer(), data::Target::activity, only);
    d.X = features::project(d.X, m1->subset);
    r = score("model1", d.classes, d, learn::predict_rf(m1->forest, d.X).labels);
  } else {
    const auto& m2 = std::get<learn::RidgeModel>(model);
    if (!m2.kernels) throw Error(Errc::bad_config, "ridge model carries no kernel set");
    auto d = data::build_dataset(sources, rocket_featurizer(*m2.kernels), data::Target::behaviour, only);
    r = score("model2", d.classes, d, learn::predict_ridge(m2, d.X).labels);
  }
  if (meta.is_object() && meta.contains("chosen_params")) r.chosen_params = meta["chosen_params"].dump();
  r.plan.test_calves = test;
  std::sort(r.plan.test_calves.begin(), r.plan.test_calves.end());
  if (meta.is_object()) {
    r.plan.seed = meta.value("seed", std::uint64_t{0});
    if (meta.contains("train_calves")) r.plan.train_calves = meta["train_calves"].get<std::vector<std::string>>();
  }
  return r;
}

metrics::PredictionTimeline predict(const Recording& rec, const learn::Model& model1, const learn::Model& model2,
                                    const std::string& calf_id) {
  const auto* m1 = std::get_if<learn::ActivityModel>(&model1);
  const auto* m2 = std::get_if<learn::RidgeModel>(&model2);
  if (!m1) throw Error(Errc::bad_config, "model 1 must be an activity forest");
  if (!m2 || !m2->kernels) throw Error(Errc::bad_config, "model 2 must be a ridge model with kernels");

  const auto ds = signal::derive_channels(rec);
  const auto windows = signal::segment(ds, signal::Purpose::inference, calf_id);
  metrics::PredictionTimeline tl;
  tl.calf_id = calf_id;
  tl.model1_version = model_version(model1);
  tl.model2_version = model_version(model2);
  if (windows.empty()) return tl;

  const auto hand = features::project(features::handcrafted_matrix(windows), m1->subset);
  const auto activity = learn::predict_rf(m1->forest, hand).labels;
  const auto behaviour = learn::predict_ridge(*m2, rocket::transform(windows, *m2->kernels)).labels;
  tl.entries.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    tl.entries.push_back(metrics::TimelineEntry{windows[i].start_t, windows[i].start_t + signal::kWindowDuration,
                                                static_cast<Activity>(activity[i]),
                                                static_cast<Behaviour>(behaviour[i])});
  }
  return tl;
}

std::string model_version(const learn::Model& m) {
  // FNV-1a over the serialized artifact.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : learn::save_model(m)) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace calfmon::protocol
