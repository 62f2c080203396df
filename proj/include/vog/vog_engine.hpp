#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vog/dataset.hpp"
#include "vog/model.hpp"
#include "vog/train.hpp"

namespace vog {

// Per-example variance-of-gradients scoring across training checkpoints.
//
// For one example and one checkpoint, the gradient matrix S holds the
// channel-averaged gradient of the pre-softmax class score with respect to
// every pixel. Across K checkpoints the per-pixel score is the population
// standard deviation sqrt((1/K) * sum_t (S_t - mu)^2), and the raw VoG is
// the mean of that over the pixels. Raw scores are then z-scored within each
// class (true or predicted labels, matching the gradient index) so classes
// with inherently noisier gradients stay comparable.

enum class LabelSource { true_label, predicted };

std::string label_source_name(LabelSource s);
LabelSource label_source_from_name(const std::string& name);

struct GradientMatrix {
  std::size_t example_id = 0;
  std::size_t checkpoint_epoch = 0;
  Tensor values;  // height x width, channel-averaged
};

GradientMatrix gradient_matrix(const ModelSpec& spec, const Params& params, const Tensor& x,
                               std::size_t p, std::size_t example_id = 0,
                               std::size_t checkpoint_epoch = 0);

// Eqs. of the score: per-pixel population std over K >= 2 matrices, averaged
// over pixels.
double vog_score(const std::vector<GradientMatrix>& mats);

struct VogRecord {
  std::size_t example_id = 0;
  int true_label = 0;
  int predicted_label = 0;
  double raw_vog = 0.0;
  double normalized_vog = 0.0;
  LabelSource label_source = LabelSource::true_label;
  Stage stage = Stage::late;
  Split split = Split::train;

  // grouping label per label_source
  int group_label() const {
    return label_source == LabelSource::true_label ? true_label : predicted_label;
  }
};

struct ClassStat {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t n = 0;
};
using ClassStats = std::map<int, ClassStat>;

// Mean and population std of raw_vog per grouping label.
ClassStats class_stats(const std::vector<VogRecord>& records);

// normalized = (raw - class mean) / class population std; degenerate classes
// (a single member or zero spread) normalize to 0.
std::vector<VogRecord> normalize_with(std::vector<VogRecord> records, const ClassStats& stats);
std::vector<VogRecord> normalize_by_class(std::vector<VogRecord> records);

// Raw (unnormalized) scores for every example in data over the stage's
// checkpoints. The gradient index p is fixed per example across checkpoints:
// the true label, or the prediction of the final checkpoint of the full run.
std::vector<VogRecord> compute_raw_vog(const CheckpointSet& cs, const LabeledDataset& data,
                                       LabelSource label_source, Stage stage,
                                       std::size_t workers = 0);

// compute_raw_vog followed by per-class normalization.
std::vector<VogRecord> compute_vog(const CheckpointSet& cs, const LabeledDataset& data,
                                   LabelSource label_source, Stage stage,
                                   std::size_t workers = 0);

struct VogRanking {
  std::vector<VogRecord> records;        // ascending normalized_vog, ties by example_id
  std::vector<std::size_t> bucket_edges; // decile boundaries as record indices (11 entries)
};

VogRanking rank(std::vector<VogRecord> records);

// Contiguous rank slices [first, last) covering the ranking; sizes are equal
// up or down to one, with the remainder going to the lowest buckets.
std::vector<std::pair<std::size_t, std::size_t>> percentile_buckets(std::size_t n_records,
                                                                    std::size_t n_buckets);

// CSV: example_id,split,true_label,predicted_label,raw_vog,normalized_vog,stage,label_source
// Rows sorted by example_id, floats at 12 significant digits.
void write_scores_csv(const std::vector<VogRecord>& records, const std::string& path);
std::vector<VogRecord> read_scores_csv(const std::string& path);

}  // namespace vog
