#include "vog/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

#include "vog/errors.hpp"
#include "vog/io_util.hpp"
#include "vog/parallel.hpp"

namespace vog {

std::map<std::size_t, bool> correctness_map(const ModelSpec& spec, const Params& params,
                                            const LabeledDataset& ds, std::size_t workers) {
  std::vector<std::uint8_t> correct(ds.size(), 0);
  parallel_for(ds.size(), workers, [&](std::size_t i) {
    correct[i] = predict(spec, params, ds.images[i]).label ==
                         static_cast<std::size_t>(ds.labels[i])
                     ? 1
                     : 0;
  });
  std::map<std::size_t, bool> out;
  for (std::size_t i = 0; i < ds.size(); ++i) out[i] = correct[i] != 0;
  return out;
}

double top1_error_percent(const ModelSpec& spec, const Params& params, const LabeledDataset& ds,
                          std::size_t workers) {
  const auto correct = correctness_map(spec, params, ds, workers);
  std::size_t wrong = 0;
  for (const auto& [id, ok] : correct)
    if (!ok) ++wrong;
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(ds.size());
}

DecileErrorTable decile_error(const VogRanking& ranking,
                              const std::map<std::size_t, bool>& correctness) {
  if (ranking.records.empty()) throw ValidationError("decile_error: empty ranking");
  DecileErrorTable table;
  table.stage = ranking.records.front().stage;
  const auto buckets = percentile_buckets(ranking.records.size(), 10);
  const double n_total = static_cast<double>(ranking.records.size());
  std::size_t consumed = 0;
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    const auto [lo, hi] = buckets[b];
    DecileRow row;
    row.percentile_lo = 100.0 * static_cast<double>(consumed) / n_total;
    row.percentile_hi = 100.0 * static_cast<double>(hi) / n_total;
    row.n_examples = hi - lo;
    std::size_t wrong = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      const std::size_t id = ranking.records[i].example_id;
      const auto it = correctness.find(id);
      if (it == correctness.end()) {
        throw ValidationError("decile_error: no correctness entry for example " +
                              std::to_string(id));
      }
      if (!it->second) ++wrong;
    }
    row.top1_error_percent =
        row.n_examples == 0 ? 0.0
                            : 100.0 * static_cast<double>(wrong) / static_cast<double>(row.n_examples);
    consumed = hi;
    table.rows.push_back(row);
  }
  return table;
}

void write_decile_csv(const DecileErrorTable& table, const std::string& path) {
  std::ostringstream os;
  os << "decile,percentile_lo,percentile_hi,n_examples,top1_error_percent\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const DecileRow& r = table.rows[i];
    os << (i + 1) << "," << format_g12(r.percentile_lo) << "," << format_g12(r.percentile_hi)
       << "," << r.n_examples << "," << format_g12(r.top1_error_percent) << "\n";
  }
  write_file_atomic(path, os.str());
}

std::map<std::size_t, double> msp_scores(const ModelSpec& spec, const Params& params,
                                         const LabeledDataset& ds, std::size_t workers) {
  std::vector<double> scores(ds.size(), 0.0);
  parallel_for(ds.size(), workers, [&](std::size_t i) {
    const Prediction pr = predict(spec, params, ds.images[i]);
    scores[i] = *std::max_element(pr.probabilities.begin(), pr.probabilities.end());
  });
  std::map<std::size_t, double> out;
  for (std::size_t i = 0; i < ds.size(); ++i) out[i] = scores[i];
  return out;
}

// ---------------------------------------------------------------------------
// boundary distance

namespace {

double class_margin(const ModelSpec& spec, const Params& params, double x0, double x1) {
  const Tensor x = Tensor::from({1, 1, 2}, {x0, x1});
  const Tensor logits = forward(spec, params, x);
  return logits.data[0] - logits.data[1];
}

struct Point {
  double x, y;
};

}  // namespace

BoundaryAnalysis boundary_distance_analysis(const ModelSpec& spec, const Params& params,
                                            const LabeledDataset& blobs_test,
                                            const std::vector<VogRecord>& records) {
  if (spec.num_classes != 2 || spec.input_shape != std::array<std::size_t, 3>{1, 1, 2}) {
    throw ValidationError("boundary analysis requires a two-class model on 2-d inputs");
  }
  if (blobs_test.size() == 0 || records.empty()) {
    throw ValidationError("boundary analysis: empty dataset or record list");
  }

  // data bounding box, expanded 10% per side
  double min_x = blobs_test.images[0].data[0], max_x = min_x;
  double min_y = blobs_test.images[0].data[1], max_y = min_y;
  for (const Tensor& t : blobs_test.images) {
    min_x = std::min(min_x, t.data[0]);
    max_x = std::max(max_x, t.data[0]);
    min_y = std::min(min_y, t.data[1]);
    max_y = std::max(max_y, t.data[1]);
  }
  const double pad_x = 0.1 * (max_x - min_x);
  const double pad_y = 0.1 * (max_y - min_y);
  min_x -= pad_x;
  max_x += pad_x;
  min_y -= pad_y;
  max_y += pad_y;

  constexpr std::size_t kGrid = 200;
  const double step_x = (max_x - min_x) / static_cast<double>(kGrid - 1);
  const double step_y = (max_y - min_y) / static_cast<double>(kGrid - 1);
  std::vector<double> margin(kGrid * kGrid);
  for (std::size_t iy = 0; iy < kGrid; ++iy) {
    for (std::size_t ix = 0; ix < kGrid; ++ix) {
      margin[iy * kGrid + ix] =
          class_margin(spec, params, min_x + ix * step_x, min_y + iy * step_y);
    }
  }

  // bisection along every sign-changing grid edge; tolerance 1e-4 input units
  auto bisect = [&](Point a, Point b, double fa) {
    while (std::hypot(b.x - a.x, b.y - a.y) > 1e-4) {
      const Point mid{(a.x + b.x) / 2.0, (a.y + b.y) / 2.0};
      const double fm = class_margin(spec, params, mid.x, mid.y);
      if ((fm > 0.0) == (fa > 0.0)) {
        a = mid;
        fa = fm;
      } else {
        b = mid;
      }
    }
    return Point{(a.x + b.x) / 2.0, (a.y + b.y) / 2.0};
  };

  std::vector<Point> boundary;
  for (std::size_t iy = 0; iy < kGrid; ++iy) {
    for (std::size_t ix = 0; ix < kGrid; ++ix) {
      const double f = margin[iy * kGrid + ix];
      if (ix + 1 < kGrid) {
        const double g = margin[iy * kGrid + ix + 1];
        if ((f > 0.0) != (g > 0.0)) {
          boundary.push_back(bisect({min_x + ix * step_x, min_y + iy * step_y},
                                    {min_x + (ix + 1) * step_x, min_y + iy * step_y}, f));
        }
      }
      if (iy + 1 < kGrid) {
        const double g = margin[(iy + 1) * kGrid + ix];
        if ((f > 0.0) != (g > 0.0)) {
          boundary.push_back(bisect({min_x + ix * step_x, min_y + iy * step_y},
                                    {min_x + ix * step_x, min_y + (iy + 1) * step_y}, f));
        }
      }
    }
  }
  if (boundary.empty()) {
    throw AnalysisError("no decision boundary inside the sampled bounding box");
  }

  // scale for accepting Newton-projected points as genuinely on the boundary
  double margin_scale = 0.0;
  for (double m : margin) margin_scale = std::max(margin_scale, std::fabs(m));
  const double accept_tol = std::max(1e-12, 1e-9 * margin_scale);

  auto distance_for = [&](double px, double py) {
    double grid_best = std::numeric_limits<double>::infinity();
    for (const Point& q : boundary) grid_best = std::min(grid_best, std::hypot(px - q.x, py - q.y));
    // local projection onto the zero level set; for an affine margin this
    // lands on the exact perpendicular foot
    double cx = px, cy = py;
    for (int it = 0; it < 60; ++it) {
      const double val = class_margin(spec, params, cx, cy);
      if (std::fabs(val) <= accept_tol) break;
      const Tensor x = Tensor::from({1, 1, 2}, {cx, cy});
      const Tensor g0 = input_gradient(spec, params, x, 0);
      const Tensor g1 = input_gradient(spec, params, x, 1);
      const double gx = g0.data[0] - g1.data[0];
      const double gy = g0.data[1] - g1.data[1];
      const double norm2 = gx * gx + gy * gy;
      if (norm2 < 1e-30) break;
      cx -= val * gx / norm2;
      cy -= val * gy / norm2;
    }
    if (std::fabs(class_margin(spec, params, cx, cy)) <= accept_tol) {
      const double refined = std::hypot(px - cx, py - cy);
      // the projected point is exact up to accept_tol; only fall back to the
      // grid estimate when the projection landed on a clearly farther sheet
      if (refined <= grid_best + 2e-4) return refined;
    }
    return grid_best;
  };

  BoundaryAnalysis out;
  std::vector<double> vogs;
  out.distances.resize(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::size_t id = records[i].example_id;
    if (id >= blobs_test.size()) {
      throw ValidationError("boundary analysis: record id " + std::to_string(id) +
                            " outside the dataset");
    }
    out.distances[i] =
        distance_for(blobs_test.images[id].data[0], blobs_test.images[id].data[1]);
    vogs.push_back(records[i].normalized_vog);
  }

  try {
    out.vog_vs_distance = correlations(vogs, out.distances);
    out.correlation_defined = true;
  } catch (const AnalysisError&) {
    out.correlation_defined = false;  // degenerate spread; reported, not fatal
  }
  return out;
}

// ---------------------------------------------------------------------------
// early/late flip

namespace {

// sign of the decile-index/error trend; 0 when the errors have no spread
int trend_sign(const DecileErrorTable& table) {
  std::vector<double> idx, err;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    idx.push_back(static_cast<double>(i + 1));
    err.push_back(table.rows[i].top1_error_percent);
  }
  try {
    const double rho = correlations(idx, err).spearman_rho;
    if (rho > 0.0) return 1;
    if (rho < 0.0) return -1;
    return 0;
  } catch (const AnalysisError&) {
    return 0;
  }
}

}  // namespace

StageFlipReport stage_flip_report(const CheckpointSet& cs, const LabeledDataset& data,
                                  std::size_t workers) {
  std::size_t non_initial = 0;
  for (const CheckpointEntry& e : cs.entries)
    if (e.epoch != 0) ++non_initial;
  if (non_initial < 6) {
    throw ValidationError("stage_flip_report requires >= 6 stored non-initial checkpoints, have " +
                          std::to_string(non_initial));
  }

  StageFlipReport report;
  for (Stage stage : {Stage::early, Stage::late}) {
    const CheckpointSet staged = select_stage(cs, stage);
    // the stage's own model judges correctness, so the early table reflects
    // the early error profile
    const Params stage_params = load_checkpoint(cs, staged.entries.back());
    const auto correct = correctness_map(cs.model_spec, stage_params, data, workers);
    const auto records = compute_vog(cs, data, LabelSource::true_label, stage, workers);
    const DecileErrorTable table = decile_error(rank(records), correct);
    if (stage == Stage::early) report.early = table;
    else report.late = table;
  }
  report.early_trend_sign = trend_sign(report.early);
  report.late_trend_sign = trend_sign(report.late);
  report.flip_detected = report.early_trend_sign != report.late_trend_sign;
  return report;
}

void write_flip_csv(const StageFlipReport& report, const std::string& path) {
  std::ostringstream os;
  os << "stage,decile,percentile_lo,percentile_hi,n_examples,top1_error_percent\n";
  for (const DecileErrorTable* t : {&report.early, &report.late}) {
    for (std::size_t i = 0; i < t->rows.size(); ++i) {
      const DecileRow& r = t->rows[i];
      os << stage_name(t->stage) << "," << (i + 1) << "," << format_g12(r.percentile_lo) << ","
         << format_g12(r.percentile_hi) << "," << r.n_examples << ","
         << format_g12(r.top1_error_percent) << "\n";
    }
  }
  write_file_atomic(path, os.str());
}

// ---------------------------------------------------------------------------
// OoD

OodMetrics ood_metrics(const std::vector<double>& in_scores,
                       const std::vector<double>& ood_scores) {
  if (in_scores.empty() || ood_scores.empty()) {
    throw ValidationError("ood_metrics: empty score list");
  }
  OodMetrics m;
  m.n_in = in_scores.size();
  m.n_out = ood_scores.size();
  m.auroc = auroc(in_scores, ood_scores);
  m.aupr_in = aupr(in_scores, ood_scores, PositiveClass::in_dist);
  m.aupr_out = aupr(in_scores, ood_scores, PositiveClass::out_dist);
  const double total = static_cast<double>(m.n_in + m.n_out);
  m.base_rate_in = static_cast<double>(m.n_in) / total;
  m.base_rate_out = static_cast<double>(m.n_out) / total;
  return m;
}

std::vector<QuartileRow> ood_percentile_representation(const std::vector<VogRecord>& in_records,
                                                       const std::vector<VogRecord>& ood_records) {
  if (in_records.empty() || ood_records.empty()) {
    throw ValidationError("ood_percentile_representation: empty record set");
  }
  // pool with ood ids offset past the in-distribution ids so ties stay total
  std::vector<VogRecord> pooled = in_records;
  std::size_t max_in_id = 0;
  for (const VogRecord& r : in_records) max_in_id = std::max(max_in_id, r.example_id);
  for (VogRecord r : ood_records) {
    r.example_id += max_in_id + 1;
    r.split = Split::ood;
    pooled.push_back(r);
  }
  const VogRanking ranking = rank(std::move(pooled));
  const auto buckets = percentile_buckets(ranking.records.size(), 4);
  std::vector<QuartileRow> rows;
  const double n_ood_total = static_cast<double>(ood_records.size());
  for (const auto& [lo, hi] : buckets) {
    QuartileRow row;
    row.n_total = hi - lo;
    for (std::size_t i = lo; i < hi; ++i) {
      if (ranking.records[i].split == Split::ood) ++row.n_ood;
    }
    row.fraction_of_ood = static_cast<double>(row.n_ood) / n_ood_total;
    rows.push_back(row);
  }
  return rows;
}

void write_quartile_csv(const std::vector<QuartileRow>& rows, const std::string& path) {
  std::ostringstream os;
  os << "quartile,n_total,n_ood,fraction_of_ood\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << (i + 1) << "," << rows[i].n_total << "," << rows[i].n_ood << ","
       << format_g12(rows[i].fraction_of_ood) << "\n";
  }
  write_file_atomic(path, os.str());
}

OodComparison ood_detection_report(const CheckpointSet& cs, const LabeledDataset& in_test,
                                   const LabeledDataset& ood_data, Stage stage,
                                   std::size_t workers) {
  OodComparison out;
  auto in_raw = compute_raw_vog(cs, in_test, LabelSource::predicted, stage, workers);
  auto ood_raw = compute_raw_vog(cs, ood_data, LabelSource::predicted, stage, workers);

  // OoD has no labels, so both sets are normalized with the in-distribution
  // class statistics keyed by predicted class. A class never predicted on the
  // in-distribution set falls back to the global in-distribution spread.
  ClassStats stats = class_stats(in_raw);
  ClassStat global;
  {
    double mean = 0.0;
    for (const VogRecord& r : in_raw) mean += r.raw_vog;
    mean /= static_cast<double>(in_raw.size());
    double var = 0.0;
    for (const VogRecord& r : in_raw) {
      const double d = r.raw_vog - mean;
      var += d * d;
    }
    global.mean = mean;
    global.std = std::sqrt(var / static_cast<double>(in_raw.size()));
    global.n = in_raw.size();
  }
  for (const VogRecord& r : ood_raw) {
    if (stats.find(r.group_label()) == stats.end()) stats[r.group_label()] = global;
  }

  out.in_records = normalize_with(std::move(in_raw), stats);
  out.ood_records = normalize_with(std::move(ood_raw), stats);

  // detection scores oriented "higher = more in-distribution"
  std::vector<double> vog_in, vog_ood;
  for (const VogRecord& r : out.in_records) vog_in.push_back(-r.normalized_vog);
  for (const VogRecord& r : out.ood_records) vog_ood.push_back(-r.normalized_vog);
  out.vog = ood_metrics(vog_in, vog_ood);

  const Params final_params = load_checkpoint(cs, cs.entries.back());
  std::vector<double> msp_in, msp_ood;
  for (const auto& [id, s] : msp_scores(cs.model_spec, final_params, in_test, workers))
    msp_in.push_back(s);
  for (const auto& [id, s] : msp_scores(cs.model_spec, final_params, ood_data, workers))
    msp_ood.push_back(s);
  out.msp = ood_metrics(msp_in, msp_ood);

  out.quartiles = ood_percentile_representation(out.in_records, out.ood_records);
  return out;
}

// ---------------------------------------------------------------------------

std::map<int, TopBottom> top_bottom_ids_per_class(const VogRanking& ranking, std::size_t k) {
  std::map<int, TopBottom> out;
  for (const VogRecord& r : ranking.records) {
    TopBottom& tb = out[r.group_label()];
    if (tb.lowest.size() < k) tb.lowest.push_back(r.example_id);
  }
  for (auto it = ranking.records.rbegin(); it != ranking.records.rend(); ++it) {
    TopBottom& tb = out[it->group_label()];
    if (tb.highest.size() < k) tb.highest.push_back(it->example_id);
  }
  return out;
}

}  // namespace vog
