#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "calfmon/behaviour_metrics.hpp"
#include "calfmon/dataset.hpp"
#include "calfmon/evaluation.hpp"
#include "calfmon/model_io.hpp"

// End-to-end training and inference for the two models:
//   model 1: random forest on 11 selected hand-crafted features, active/inactive
//   model 2: ridge with LOO-chosen alpha on ROCKET features, four behaviours
namespace calfmon::protocol {

struct TrainConfig {
  std::uint64_t seed = 7;
  std::size_t kernels = 10000;
  std::size_t selected_features = 11;
  std::size_t selection_trees = 300;
  std::size_t repeats = eval::kRepeats;
  std::vector<learn::ForestParams> forest_grid = eval::default_forest_grid();
  std::vector<eval::RidgeParams> ridge_grid{eval::RidgeParams{}};
};

struct TrainResult {
  learn::Model model;
  eval::EvalReport report;
};

/// Grouped split, grid search over the repeated holdouts, refit on all
/// training calves and a single evaluation on the test calves.
TrainResult train_model1(const std::vector<data::CalfSource>& sources, const TrainConfig& cfg);
TrainResult train_model2(const std::vector<data::CalfSource>& sources, const TrainConfig& cfg);

/// Scores a trained model on the test calves recorded in its metadata (or on
/// `calves` when given).
eval::EvalReport evaluate(const learn::Model& model, const std::vector<data::CalfSource>& sources,
                          const std::vector<std::string>& calves = {});

data::Featurizer handcrafted_featurizer();
data::Featurizer rocket_featurizer(const rocket::KernelSet& ks);

/// Inference tiling of a regularized recording; model 1 labels activity and
/// model 2 labels behaviour for every window.
metrics::PredictionTimeline predict(const Recording& rec, const learn::Model& model1, const learn::Model& model2,
                                    const std::string& calf_id);

/// Short content hash of a saved model, used as its version tag.
std::string model_version(const learn::Model& m);

}  // namespace calfmon::protocol
