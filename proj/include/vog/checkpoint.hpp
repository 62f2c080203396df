#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vog/model.hpp"

namespace vog {

struct LrStep {
  std::size_t start_epoch;
  double rate;
  bool operator==(const LrStep&) const = default;
};

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  std::vector<LrStep> lr_schedule{{0, 0.1}};  // start_epochs strictly increasing, first at 0
  std::size_t checkpoint_every = 1;           // in epochs, <= epochs
  std::uint64_t seed = 0;
  double shuffle_label_fraction = 0.0;

  void validate() const;
  double rate_for_epoch(std::size_t epoch_index) const;  // 0-based pass index
  bool operator==(const TrainConfig&) const = default;
};

struct CheckpointEntry {
  std::size_t epoch = 0;
  std::string path;          // relative to the manifest directory
  std::uint64_t checksum = 0;
};

// Manifest of one training run: ordered snapshots plus the spec and config
// that produced them. K = entries.size(); any VoG computation needs K >= 2.
struct CheckpointSet {
  int format_version = 1;
  ModelSpec model_spec;
  TrainConfig train_config;
  std::vector<CheckpointEntry> entries;
  std::string dir;  // directory holding manifest.json; not serialized

  std::string manifest_path() const;
  std::string entry_file(const CheckpointEntry& e) const;
};

inline constexpr int kCheckpointFormatVersion = 1;

// Little-endian f64 blocks, one length-prefixed block per parameter tensor,
// preceded by a 4-byte magic and a u32 version. Returns the FNV-1a checksum
// of the written bytes.
std::uint64_t save_params(const Params& params, const std::string& path);

// Verifies the checksum recorded in the manifest, then parses against the
// manifest's model spec.
Params load_checkpoint(const CheckpointSet& cs, const CheckpointEntry& entry);

void write_manifest(const CheckpointSet& cs);

// Accepts either the checkpoint directory or the manifest file itself.
// Verifies that every referenced file exists and matches its checksum.
CheckpointSet load_manifest(const std::string& dir_or_file);

}  // namespace vog
