#include "vog/vog_engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vog/errors.hpp"
#include "vog/io_util.hpp"
#include "vog/parallel.hpp"

namespace vog {

std::string label_source_name(LabelSource s) {
  return s == LabelSource::true_label ? "true" : "predicted";
}

LabelSource label_source_from_name(const std::string& name) {
  if (name == "true") return LabelSource::true_label;
  if (name == "predicted") return LabelSource::predicted;
  throw ValidationError("unknown label source '" + name + "' (expected true|predicted)");
}

GradientMatrix gradient_matrix(const ModelSpec& spec, const Params& params, const Tensor& x,
                               std::size_t p, std::size_t example_id,
                               std::size_t checkpoint_epoch) {
  const Tensor g = input_gradient(spec, params, x, p);
  const std::size_t ch = g.shape[0], h = g.shape[1], w = g.shape[2];
  GradientMatrix m;
  m.example_id = example_id;
  m.checkpoint_epoch = checkpoint_epoch;
  m.values = Tensor::zeros({h, w});
  const double inv = 1.0 / static_cast<double>(ch);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t xx = 0; xx < w; ++xx) {
      double acc = 0.0;
      for (std::size_t c = 0; c < ch; ++c) acc += g.data[(c * h + y) * w + xx];
      m.values.data[y * w + xx] = acc * inv;
    }
  }
  return m;
}

double vog_score(const std::vector<GradientMatrix>& mats) {
  const std::size_t k = mats.size();
  if (k < 2) {
    throw ValidationError("vog_score requires K >= 2 gradient matrices, got " + std::to_string(k));
  }
  for (std::size_t t = 1; t < k; ++t) {
    if (!mats[t].values.same_shape(mats[0].values)) {
      throw ValidationError("vog_score: matrix " + std::to_string(t) + " shape " +
                            shape_string(mats[t].values.shape) + " differs from " +
                            shape_string(mats[0].values.shape));
    }
    if (mats[t].example_id != mats[0].example_id) {
      throw ValidationError("vog_score: matrices mix example ids " +
                            std::to_string(mats[0].example_id) + " and " +
                            std::to_string(mats[t].example_id));
    }
  }
  const std::size_t n_pixels = mats[0].values.numel();
  const double inv_k = 1.0 / static_cast<double>(k);
  double acc = 0.0;
  for (std::size_t i = 0; i < n_pixels; ++i) {
    // identical values must give exactly zero (raw_vog = 0 iff all matrices
    // agree), which the rounded mean would miss
    bool all_equal = true;
    for (std::size_t t = 1; t < k && all_equal; ++t) {
      all_equal = mats[t].values.data[i] == mats[0].values.data[i];
    }
    if (all_equal) continue;
    double mu = 0.0;
    for (std::size_t t = 0; t < k; ++t) mu += mats[t].values.data[i];
    mu *= inv_k;
    double var = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      const double d = mats[t].values.data[i] - mu;
      var += d * d;
    }
    acc += std::sqrt(var * inv_k);
  }
  return acc / static_cast<double>(n_pixels);
}

ClassStats class_stats(const std::vector<VogRecord>& records) {
  if (records.empty()) throw ValidationError("class_stats: empty record list");
  ClassStats stats;
  for (const VogRecord& r : records) {
    ClassStat& s = stats[r.group_label()];
    s.mean += r.raw_vog;
    s.n += 1;
  }
  for (auto& [label, s] : stats) s.mean /= static_cast<double>(s.n);
  for (const VogRecord& r : records) {
    ClassStat& s = stats[r.group_label()];
    const double d = r.raw_vog - s.mean;
    s.std += d * d;
  }
  for (auto& [label, s] : stats) s.std = std::sqrt(s.std / static_cast<double>(s.n));
  return stats;
}

std::vector<VogRecord> normalize_with(std::vector<VogRecord> records, const ClassStats& stats) {
  for (VogRecord& r : records) {
    const auto it = stats.find(r.group_label());
    if (it == stats.end()) {
      throw ValidationError("normalize_with: no statistics for class " +
                            std::to_string(r.group_label()));
    }
    const ClassStat& s = it->second;
    r.normalized_vog = (s.n < 2 || s.std == 0.0) ? 0.0 : (r.raw_vog - s.mean) / s.std;
  }
  return records;
}

std::vector<VogRecord> normalize_by_class(std::vector<VogRecord> records) {
  if (records.empty()) throw ValidationError("normalize_by_class: empty record list");
  const ClassStats stats = class_stats(records);
  return normalize_with(std::move(records), stats);
}

std::vector<VogRecord> compute_raw_vog(const CheckpointSet& cs, const LabeledDataset& data,
                                       LabelSource label_source, Stage stage,
                                       std::size_t workers) {
  validate_dataset(data);
  const CheckpointSet staged = select_stage(cs, stage);
  std::vector<Params> snapshots;
  snapshots.reserve(staged.entries.size());
  for (const CheckpointEntry& e : staged.entries) snapshots.push_back(load_checkpoint(cs, e));

  // predictions always come from the final checkpoint of the full run
  const Params final_params = load_checkpoint(cs, cs.entries.back());

  std::vector<VogRecord> records(data.size());
  parallel_for(data.size(), workers, [&](std::size_t i) {
    VogRecord rec;
    rec.example_id = i;
    rec.true_label = data.labels[i];
    rec.predicted_label =
        static_cast<int>(predict(cs.model_spec, final_params, data.images[i]).label);
    rec.label_source = label_source;
    rec.stage = stage;
    rec.split = data.split;
    const std::size_t p = label_source == LabelSource::true_label
                              ? static_cast<std::size_t>(rec.true_label)
                              : static_cast<std::size_t>(rec.predicted_label);
    std::vector<GradientMatrix> mats;
    mats.reserve(snapshots.size());
    for (std::size_t t = 0; t < snapshots.size(); ++t) {
      mats.push_back(gradient_matrix(cs.model_spec, snapshots[t], data.images[i], p, i,
                                     staged.entries[t].epoch));
    }
    rec.raw_vog = vog_score(mats);
    records[i] = std::move(rec);
  });
  return records;
}

std::vector<VogRecord> compute_vog(const CheckpointSet& cs, const LabeledDataset& data,
                                   LabelSource label_source, Stage stage, std::size_t workers) {
  return normalize_by_class(compute_raw_vog(cs, data, label_source, stage, workers));
}

VogRanking rank(std::vector<VogRecord> records) {
  if (records.empty()) throw ValidationError("rank: empty record list");
  std::sort(records.begin(), records.end(), [](const VogRecord& a, const VogRecord& b) {
    if (a.normalized_vog != b.normalized_vog) return a.normalized_vog < b.normalized_vog;
    return a.example_id < b.example_id;
  });
  VogRanking ranking;
  const auto buckets = percentile_buckets(records.size(), 10);
  ranking.bucket_edges.push_back(0);
  for (const auto& [lo, hi] : buckets) ranking.bucket_edges.push_back(hi);
  ranking.records = std::move(records);
  return ranking;
}

std::vector<std::pair<std::size_t, std::size_t>> percentile_buckets(std::size_t n_records,
                                                                    std::size_t n_buckets) {
  if (n_records == 0) throw ValidationError("percentile_buckets: empty ranking");
  if (n_buckets == 0) throw ValidationError("percentile_buckets: need at least one bucket");
  const std::size_t base = n_records / n_buckets;
  const std::size_t extra = n_records % n_buckets;  // lowest buckets absorb the remainder
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t lo = 0;
  for (std::size_t b = 0; b < n_buckets; ++b) {
    const std::size_t size = base + (b < extra ? 1 : 0);
    out.emplace_back(lo, lo + size);
    lo += size;
  }
  return out;
}

void write_scores_csv(const std::vector<VogRecord>& records, const std::string& path) {
  std::vector<VogRecord> rows = records;
  std::sort(rows.begin(), rows.end(),
            [](const VogRecord& a, const VogRecord& b) { return a.example_id < b.example_id; });
  std::ostringstream os;
  os << "example_id,split,true_label,predicted_label,raw_vog,normalized_vog,stage,label_source\n";
  for (const VogRecord& r : rows) {
    os << r.example_id << "," << split_name(r.split) << "," << r.true_label << ","
       << r.predicted_label << "," << format_g12(r.raw_vog) << "," << format_g12(r.normalized_vog)
       << "," << stage_name(r.stage) << "," << label_source_name(r.label_source) << "\n";
  }
  write_file_atomic(path, os.str());
}

std::vector<VogRecord> read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scores CSV " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file");
  const std::string expected =
      "example_id,split,true_label,predicted_label,raw_vog,normalized_vog,stage,label_source";
  if (line != expected) throw FormatError(path + ": unexpected header '" + line + "'");

  std::vector<VogRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 8) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected 8 fields, got " +
                        std::to_string(fields.size()));
    }
    VogRecord r;
    try {
      r.example_id = std::stoull(fields[0]);
      if (fields[1] == "train") r.split = Split::train;
      else if (fields[1] == "test") r.split = Split::test;
      else if (fields[1] == "ood") r.split = Split::ood;
      else throw FormatError(path + ":" + std::to_string(line_no) + ": bad split '" + fields[1] + "'");
      r.true_label = std::stoi(fields[2]);
      r.predicted_label = std::stoi(fields[3]);
      r.raw_vog = std::stod(fields[4]);
      r.normalized_vog = std::stod(fields[5]);
      r.stage = stage_from_name(fields[6]);
      r.label_source = label_source_from_name(fields[7]);
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": malformed numeric field");
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) throw FormatError(path + ": no score rows");
  return records;
}

}  // namespace vog
