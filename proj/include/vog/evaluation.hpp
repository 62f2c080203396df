#pragma once

#include <map>
#include <string>
#include <vector>

#include "vog/dataset.hpp"
#include "vog/model.hpp"
#include "vog/stats.hpp"
#include "vog/train.hpp"
#include "vog/vog_engine.hpp"

namespace vog {

// Quantitative analyses over VoG rankings: decile error curves, the
// early/late flip, memorization statistics, boundary-distance correlation
// for the toy problem, and OoD detection metrics with the MSP baseline.

struct DecileRow {
  double percentile_lo = 0.0;  // inclusive, in percent
  double percentile_hi = 0.0;
  std::size_t n_examples = 0;
  double top1_error_percent = 0.0;
};

struct DecileErrorTable {
  Stage stage = Stage::late;
  std::vector<DecileRow> rows;  // ascending VoG
};

// Correctness of the final model per example id.
std::map<std::size_t, bool> correctness_map(const ModelSpec& spec, const Params& params,
                                            const LabeledDataset& ds, std::size_t workers = 0);

double top1_error_percent(const ModelSpec& spec, const Params& params, const LabeledDataset& ds,
                          std::size_t workers = 0);

DecileErrorTable decile_error(const VogRanking& ranking,
                              const std::map<std::size_t, bool>& correctness);

void write_decile_csv(const DecileErrorTable& table, const std::string& path);

// Max softmax probability per example id (OoD baseline score; higher means
// more in-distribution).
std::map<std::size_t, double> msp_scores(const ModelSpec& spec, const Params& params,
                                         const LabeledDataset& ds, std::size_t workers = 0);

// ---------------------------------------------------------------------------
// toy boundary analysis

struct BoundaryAnalysis {
  std::vector<double> distances;  // aligned with the records argument
  bool correlation_defined = false;
  CorrelationResult vog_vs_distance{};  // valid when correlation_defined
};

// Minimum Euclidean distance from each scored test point to the decision set
// {x : A_0(x) = A_1(x)}, found on a 200x200 grid over the 10%-expanded data
// bounding box with bisection refinement, then correlated against
// normalized VoG. Two-class 2-d inputs only.
BoundaryAnalysis boundary_distance_analysis(const ModelSpec& spec, const Params& params,
                                            const LabeledDataset& blobs_test,
                                            const std::vector<VogRecord>& records);

// ---------------------------------------------------------------------------
// early/late flip

struct StageFlipReport {
  DecileErrorTable early;
  DecileErrorTable late;
  int early_trend_sign = 0;  // sign of spearman(decile index, error)
  int late_trend_sign = 0;
  bool flip_detected = false;
};

// Correctness for each stage comes from that stage's last checkpoint, so the
// early table reflects the early model's errors. Needs >= 6 stored
// non-initial checkpoints.
StageFlipReport stage_flip_report(const CheckpointSet& cs, const LabeledDataset& data,
                                  std::size_t workers = 0);

void write_flip_csv(const StageFlipReport& report, const std::string& path);

// ---------------------------------------------------------------------------
// OoD detection

struct OodMetrics {
  double auroc = 0.0;
  double aupr_in = 0.0;
  double aupr_out = 0.0;
  double base_rate_in = 0.0;   // positive fraction for AUPR-In
  double base_rate_out = 0.0;  // positive fraction for AUPR-Out
  std::size_t n_in = 0;
  std::size_t n_out = 0;
};

// scores oriented so higher means more in-distribution
OodMetrics ood_metrics(const std::vector<double>& in_scores,
                       const std::vector<double>& ood_scores);

struct QuartileRow {
  std::size_t n_total = 0;
  std::size_t n_ood = 0;
  double fraction_of_ood = 0.0;  // share of all OoD examples landing here
};

// Pooled ranking of in-distribution and OoD records (already normalized with
// one set of class statistics), partitioned into quartiles by VoG.
std::vector<QuartileRow> ood_percentile_representation(const std::vector<VogRecord>& in_records,
                                                       const std::vector<VogRecord>& ood_records);

void write_quartile_csv(const std::vector<QuartileRow>& rows, const std::string& path);

struct OodComparison {
  OodMetrics vog;
  OodMetrics msp;
  std::vector<QuartileRow> quartiles;
  std::vector<VogRecord> in_records;   // pooled-normalized
  std::vector<VogRecord> ood_records;  // pooled-normalized
};

// Full detection comparison: VoG (predicted labels, in-distribution class
// statistics applied to both sets) against the MSP baseline from the final
// checkpoint.
OodComparison ood_detection_report(const CheckpointSet& cs, const LabeledDataset& in_test,
                                   const LabeledDataset& ood_data, Stage stage,
                                   std::size_t workers = 0);

// ---------------------------------------------------------------------------
// ranked id grids (the image-grid figures as id lists)

struct TopBottom {
  std::vector<std::size_t> lowest;
  std::vector<std::size_t> highest;
};

std::map<int, TopBottom> top_bottom_ids_per_class(const VogRanking& ranking, std::size_t k);

}  // namespace vog
