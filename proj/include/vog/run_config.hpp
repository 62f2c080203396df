#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "vog/dataset.hpp"
#include "vog/model.hpp"
#include "vog/train.hpp"
#include "vog/vog_engine.hpp"

namespace vog {

// One JSON config file drives the pipeline commands. Parsing is strict
// (unknown keys rejected) and all paths are resolved relative to the config
// file's directory.

inline constexpr int kConfigVersion = 1;

struct DatasetConfig {
  enum class Kind { blobs, patterns, idx } kind = Kind::blobs;
  BlobConfig blobs;
  PatternConfig patterns;
  std::string train_images, train_labels;  // idx
  std::string test_images, test_labels;    // idx, optional
};

struct VogOptions {
  Stage stage = Stage::late;
  LabelSource label_source = LabelSource::true_label;
  std::size_t workers = 0;  // 0 = machine parallelism
};

struct OodOptions {
  std::size_t n = 10000;
  std::uint64_t seed = 3;
  Stage stage = Stage::late;
};

struct RunConfig {
  int config_version = kConfigVersion;
  ModelSpec model;
  TrainConfig train;
  DatasetConfig dataset;
  VogOptions vog;
  OodOptions ood;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j, const std::string& base_dir);
  static RunConfig load(const std::string& path);

  // digest of the canonical serialized form, for output provenance
  std::string digest() const;
};

// Train/test pair per the dataset section (test empty for idx without a
// test pair).
std::pair<LabeledDataset, LabeledDataset> load_dataset(const DatasetConfig& cfg);

}  // namespace vog
