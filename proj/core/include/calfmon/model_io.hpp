#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "calfmon/features.hpp"
#include "calfmon/forest.hpp"
#include "calfmon/ridge.hpp"

// Model artifact, little-endian:
//
//   "CWML" | u16 version (1) | u8 kind (1 ridge, 2 forest) | u16 section count
//   section table: { u16 id | u32 offset | u32 length } per section, offsets
//   from the start of the artifact
//   section payloads
//
// Sections
//   1  classes          u32 count, then length-prefixed UTF-8 names
//   2  metadata         length-prefixed JSON text
//   10 standardization  u32 inputs | u32 kept | u32 kept[] | f64 mu[] | f64 sigma[]
//   11 ridge weights    u32 classes | u32 features | f64 W (class-major) | f64 b[]
//                       | f64 alpha | u32 grid | f64 alphas[] | f64 loo_errors[]
//   12 kernel set       see rocket::write
//   20 forest params    u32 n_trees | i32 max_depth (-1 unbounded) | u32 min_leaf
//                       | i32 mtry (-1 default) | u64 seed | u32 n_features
//   21 trees            u32 count, per tree u32 nodes, per node
//                       i32 feature | f64 threshold | i32 left | i32 right
//                       | u32 depth | u32 counts[classes]
//   22 feature names    u32 count, length-prefixed names
//   23 feature subset   u32 count, length-prefixed names, f64 importances[]
namespace calfmon::learn {

inline constexpr std::uint16_t kModelFormatVersion = 1;

enum class ModelKind : std::uint8_t { ridge = 1, forest = 2 };

/// Forest plus the feature subset it was trained on (model 1).
struct ActivityModel {
  ForestModel forest;
  features::FeatureSubset subset;
};

using Model = std::variant<RidgeModel, ActivityModel>;

std::vector<std::uint8_t> save_model(const Model& m);
/// Throws BadMagic, VersionUnsupported or Truncated.
Model load_model(std::span<const std::uint8_t> bytes);

void save_model_file(const Model& m, const std::string& path);
Model load_model_file(const std::string& path);

ModelKind kind_of(const Model& m) noexcept;
const std::string& metadata_of(const Model& m) noexcept;

}  // namespace calfmon::learn
