#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vog/tensor.hpp"

namespace vog {

enum class Split { train, test, ood };

std::string split_name(Split s);

// Example ids are positions: example i of a split has id i, unique and
// contiguous from 0. All images share one shape; labels lie in [0, class_count).
struct LabeledDataset {
  std::vector<Tensor> images;
  std::vector<int> labels;
  Split split = Split::train;
  int class_count = 0;
  std::string provenance;

  std::size_t size() const { return images.size(); }
};

// Checks the shared invariants; throws ValidationError with the offending
// field on failure. Every generator and loader output passes through this.
void validate_dataset(const LabeledDataset& ds);

// ---------------------------------------------------------------------------
// Synthetic Gaussian blobs (two isotropic clusters in R^2)

struct BlobConfig {
  std::size_t n_points = 1000;
  std::array<std::array<double, 2>, 2> centers{{{-3.0, 0.0}, {3.0, 0.0}}};
  double cluster_std = 1.0;
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
};

std::pair<LabeledDataset, LabeledDataset> make_blobs(const BlobConfig& cfg);

// CSV export: example_id,x0,x1,label,split
void write_blob_csv(const LabeledDataset& train, const LabeledDataset& test,
                    const std::string& path);

// ---------------------------------------------------------------------------
// IDX image files (big-endian, standard magic numbers)

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path,
                        Split split = Split::train);
void write_idx(const LabeledDataset& ds, const std::string& images_path,
               const std::string& labels_path);

// ---------------------------------------------------------------------------
// Gaussian-noise OoD set: every pixel iid Normal(0.5, 1) clipped to [0, 1].
// Labels carry the sentinel class 0; the provenance string records it.

LabeledDataset gaussian_ood(std::size_t n, std::array<std::size_t, 3> image_shape,
                            std::uint64_t seed);

// ---------------------------------------------------------------------------
// Corruptions (deterministic per example given the seed)

struct Corruption {
  enum class Kind { translate, rotate90, noise, blur } kind;
  int dx = 0, dy = 0;      // translate
  double sigma = 0.0;      // noise
  std::size_t k = 1;       // box blur kernel, odd

  static Corruption translate(int dx, int dy);
  static Corruption rotate90();
  static Corruption noise(double sigma);
  static Corruption blur(std::size_t k);
};

LabeledDataset corrupt(const LabeledDataset& ds, const Corruption& c, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic class-pattern images: per-class smooth random template plus
// per-example jitter (translation + pixel noise). Stands in for MNIST-scale
// data in benchmarks that must run offline.

struct PatternConfig {
  std::size_t classes = 10;
  std::array<std::size_t, 3> image_shape{1, 16, 16};
  std::size_t n_train = 10000;
  std::size_t n_test = 1000;
  double noise_sd = 0.25;
  int max_shift = 2;
  std::size_t template_cells = 4;  // coarse grid resolution of each template
  std::uint64_t seed = 0;
};

std::pair<LabeledDataset, LabeledDataset> make_patterns(const PatternConfig& cfg);

}  // namespace vog
