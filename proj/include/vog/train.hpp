#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vog/checkpoint.hpp"
#include "vog/dataset.hpp"
#include "vog/model.hpp"

namespace vog {

// SGD training with deterministic mini-batching and periodic checkpointing.
// Given (seed, data, cfg) the whole run, including every checkpoint file, is
// bit-reproducible; worker count never changes the result.

struct LabelShuffleRecord {
  std::vector<std::size_t> shuffled_indices;     // sorted ascending
  std::map<std::size_t, int> original_labels;
  std::map<std::size_t, int> new_labels;
  std::uint64_t seed = 0;

  bool empty() const { return shuffled_indices.empty(); }
};

// Relabels round(fraction * n) examples, each new label drawn uniformly over
// all classes (so it may coincide with the original).
std::pair<LabeledDataset, LabelShuffleRecord> shuffle_labels(const LabeledDataset& data,
                                                             double fraction,
                                                             std::uint64_t seed);

// Re-applies a recorded shuffle to the original dataset.
LabeledDataset apply_shuffle(const LabeledDataset& data, const LabelShuffleRecord& rec);

struct TrainResult {
  CheckpointSet checkpoints;
  std::optional<LabelShuffleRecord> shuffle;  // set when cfg.shuffle_label_fraction > 0
  double final_train_error = 0.0;             // top-1 error on the (possibly relabeled) train set
};

// Trains and writes checkpoints to out_dir: epoch 0 (post-init, pre-update),
// every checkpoint_every epochs, and the final epoch. Returns the manifest.
TrainResult train(const ModelSpec& spec, const LabeledDataset& data, const TrainConfig& cfg,
                  const std::string& out_dir, std::size_t workers = 0);

enum class Stage { early, late, all };

std::string stage_name(Stage s);
Stage stage_from_name(const std::string& name);

// Early = first 3 stored checkpoints, late = last 3, all = everything; the
// epoch-0 snapshot is always excluded.
CheckpointSet select_stage(const CheckpointSet& cs, Stage stage);

}  // namespace vog
