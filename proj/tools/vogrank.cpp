// vogrank: rank training/test examples by learning difficulty using the
// variance of input gradients across training checkpoints, and run the
// validation experiments (toy boundary study, memorization t-test, decile
// error curves, OoD detection).
//
// Subcommands: train, vog, toy, memtest, ood, report. Every command is
// deterministic given its seeds: rerunning with the same config produces
// byte-identical outputs. Failures print one line, `<error_kind>: <message>`,
// and exit nonzero.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vog/dataset.hpp"
#include "vog/errors.hpp"
#include "vog/evaluation.hpp"
#include "vog/io_util.hpp"
#include "vog/run_config.hpp"
#include "vog/serde.hpp"
#include "vog/stats.hpp"
#include "vog/train.hpp"
#include "vog/vog_engine.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vog;

namespace {

constexpr const char* kToolVersion = "vogrank 0.1.0";

std::size_t workers_from_env_or_flag(std::size_t flag_value, bool flag_given) {
  if (flag_given) return flag_value;
  if (const char* env = std::getenv("VOG_WORKERS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end && *end == '\0') return static_cast<std::size_t>(v);
    throw ConfigError(std::string("VOG_WORKERS is not a number: '") + env + "'");
  }
  return flag_value;
}

json provenance(const std::string& config_digest, std::uint64_t seed) {
  return json{{"tool_version", kToolVersion}, {"config_digest", config_digest}, {"seed", seed}};
}

void write_json(const std::string& path, const json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

json welch_to_json(const WelchResult& w) {
  return json{{"mean1", w.mean1},
              {"std1", w.std1},
              {"n1", w.n1},
              {"mean2", w.mean2},
              {"std2", w.std2},
              {"n2", w.n2},
              {"t_statistic", w.t_statistic},
              {"degrees_of_freedom", w.degrees_of_freedom},
              {"p_value", w.p_value},
              {"alpha", w.alpha},
              {"reject_at_alpha", w.reject_at_alpha}};
}

json decile_to_json(const DecileErrorTable& t) {
  json rows = json::array();
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    rows.push_back({{"decile", i + 1},
                    {"percentile_lo", t.rows[i].percentile_lo},
                    {"percentile_hi", t.rows[i].percentile_hi},
                    {"n_examples", t.rows[i].n_examples},
                    {"top1_error_percent", t.rows[i].top1_error_percent}});
  }
  return json{{"stage", stage_name(t.stage)}, {"rows", std::move(rows)}};
}

json ood_metrics_to_json(const OodMetrics& m) {
  return json{{"auroc", m.auroc},
              {"aupr_in", m.aupr_in},
              {"aupr_out", m.aupr_out},
              {"base_rate_in", m.base_rate_in},
              {"base_rate_out", m.base_rate_out},
              {"n_in", m.n_in},
              {"n_out", m.n_out}};
}

std::map<std::size_t, bool> read_correctness_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open correctness CSV " + path);
  std::string line;
  if (!std::getline(in, line) || line != "example_id,correct") {
    throw FormatError(path + ": expected header 'example_id,correct'");
  }
  std::map<std::size_t, bool> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected two fields");
    }
    try {
      out[std::stoull(line.substr(0, comma))] = std::stoi(line.substr(comma + 1)) != 0;
    } catch (const std::exception&) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": malformed row");
    }
  }
  return out;
}

void write_correctness_csv(const std::map<std::size_t, bool>& correctness,
                           const std::string& path) {
  std::ostringstream os;
  os << "example_id,correct\n";
  for (const auto& [id, ok] : correctness) os << id << "," << (ok ? 1 : 0) << "\n";
  write_file_atomic(path, os.str());
}

// ---------------------------------------------------------------------------

int cmd_train(const std::string& config_path, const std::string& out_dir, std::size_t workers) {
  const RunConfig cfg = RunConfig::load(config_path);
  auto [train_ds, test_ds] = load_dataset(cfg.dataset);
  const TrainResult result = train(cfg.model, train_ds, cfg.train, out_dir, workers);
  json j;
  j["provenance"] = provenance(cfg.digest(), cfg.train.seed);
  j["manifest"] = result.checkpoints.manifest_path();
  j["checkpoints"] = result.checkpoints.entries.size();
  j["final_train_error_percent"] = result.final_train_error;
  if (!test_ds.images.empty()) {
    const Params fin = load_checkpoint(result.checkpoints, result.checkpoints.entries.back());
    j["final_test_error_percent"] = top1_error_percent(cfg.model, fin, test_ds, workers);
  }
  write_json((fs::path(out_dir) / "train_report.json").string(), j);
  std::cout << result.checkpoints.manifest_path() << "\n";
  return 0;
}

int cmd_vog(const std::string& config_path, const std::string& checkpoints,
            const std::string& split, Stage stage, LabelSource label_source,
            std::size_t workers, const std::string& out_csv) {
  const RunConfig cfg = RunConfig::load(config_path);
  const CheckpointSet cs = load_manifest(checkpoints);
  auto [train_ds, test_ds] = load_dataset(cfg.dataset);
  const LabeledDataset* data = nullptr;
  if (split == "train") data = &train_ds;
  else if (split == "test") data = &test_ds;
  else throw ValidationError("--split must be train or test, got '" + split + "'");
  if (data->images.empty()) throw ValidationError("dataset has no '" + split + "' split");

  const auto records = compute_vog(cs, *data, label_source, stage, workers);
  write_scores_csv(records, out_csv);

  // correctness of the final model next to the scores, for report consumers
  const Params fin = load_checkpoint(cs, cs.entries.back());
  const auto correctness = correctness_map(cs.model_spec, fin, *data, workers);
  write_correctness_csv(correctness, out_csv + ".correctness.csv");
  std::cout << out_csv << "\n";
  return 0;
}

// two Gaussian blobs, a 10-unit tanh MLP, 15 epochs with per-epoch checkpoints
int cmd_toy(std::uint64_t seed, const std::string& out_dir, std::size_t workers) {
  BlobConfig bc;
  bc.n_points = 1000;
  bc.centers = {{{-2.8, 0.0}, {2.8, 0.0}}};
  bc.cluster_std = 1.0;
  bc.train_fraction = 0.9;
  bc.seed = seed;
  auto [train_ds, test_ds] = make_blobs(bc);

  const ModelSpec spec = make_mlp({1, 1, 2}, {10}, 2, LayerKind::tanh);
  TrainConfig tc;
  tc.epochs = 15;
  tc.checkpoint_every = 1;
  tc.batch_size = 32;
  tc.lr_schedule = {{0, 0.08}};
  tc.seed = seed;

  const std::string run_dir = (fs::path(out_dir) / "checkpoints").string();
  const TrainResult result = train(spec, train_ds, tc, run_dir, workers);
  const Params fin = load_checkpoint(result.checkpoints, result.checkpoints.entries.back());
  const double test_error = top1_error_percent(spec, fin, test_ds, workers);

  const auto records = compute_vog(result.checkpoints, test_ds, LabelSource::true_label,
                                   Stage::all, workers);
  const BoundaryAnalysis ba = boundary_distance_analysis(spec, fin, test_ds, records);

  write_blob_csv(train_ds, test_ds, (fs::path(out_dir) / "blobs.csv").string());
  write_scores_csv(records, (fs::path(out_dir) / "scores.csv").string());
  {
    std::ostringstream os;
    os << "example_id,normalized_vog,boundary_distance\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
      os << records[i].example_id << "," << format_g12(records[i].normalized_vog) << ","
         << format_g12(ba.distances[i]) << "\n";
    }
    write_file_atomic((fs::path(out_dir) / "distance_vog.csv").string(), os.str());
  }

  json j;
  j["provenance"] = provenance(hex64(fnv1a64("toy:" + std::to_string(seed))), seed);
  j["final_train_error_percent"] = result.final_train_error;
  j["final_test_error_percent"] = test_error;
  j["correlation_defined"] = ba.correlation_defined;
  if (ba.correlation_defined) {
    j["spearman_vog_distance"] = ba.vog_vs_distance.spearman_rho;
    j["pearson_vog_distance"] = ba.vog_vs_distance.pearson_r;
    j["pearson_p_value"] = ba.vog_vs_distance.pearson_p;
  }
  write_json((fs::path(out_dir) / "toy_report.json").string(), j);
  std::cout << (fs::path(out_dir) / "toy_report.json").string() << "\n";
  return 0;
}

int cmd_memtest(const std::string& config_path, double shuffle_fraction,
                const std::string& out_dir, std::size_t workers) {
  RunConfig cfg = RunConfig::load(config_path);
  cfg.train.shuffle_label_fraction = shuffle_fraction;
  auto [train_ds, test_ds] = load_dataset(cfg.dataset);

  const std::string run_dir = (fs::path(out_dir) / "checkpoints").string();
  const TrainResult result = train(cfg.model, train_ds, cfg.train, run_dir, workers);
  if (!result.shuffle) {
    throw ValidationError("memtest needs shuffle fraction > 0, got " +
                          std::to_string(shuffle_fraction));
  }

  // VoG runs on the dataset the model actually saw (shuffled labels in place)
  const LabeledDataset seen = apply_shuffle(train_ds, *result.shuffle);
  const auto records =
      compute_vog(result.checkpoints, seen, cfg.vog.label_source, cfg.vog.stage, workers);
  write_scores_csv(records, (fs::path(out_dir) / "scores.csv").string());

  std::vector<bool> shuffled(seen.size(), false);
  for (std::size_t idx : result.shuffle->shuffled_indices) shuffled[idx] = true;
  std::vector<double> clean_scores, shuffled_scores;
  for (const VogRecord& r : records) {
    (shuffled[r.example_id] ? shuffled_scores : clean_scores).push_back(r.raw_vog);
  }
  const WelchResult w = welch_ttest_samples(clean_scores, shuffled_scores);

  json j;
  j["provenance"] = provenance(cfg.digest(), cfg.train.seed);
  j["final_train_error_percent"] = result.final_train_error;
  j["n_shuffled"] = result.shuffle->shuffled_indices.size();
  j["shuffle_fraction"] = shuffle_fraction;
  j["stage"] = stage_name(cfg.vog.stage);
  j["welch"] = welch_to_json(w);
  j["shuffled_mean_exceeds_clean"] = w.mean2 > w.mean1;
  write_json((fs::path(out_dir) / "memtest_report.json").string(), j);
  std::cout << (fs::path(out_dir) / "memtest_report.json").string() << "\n";
  return 0;
}

int cmd_ood(const std::string& config_path, const std::string& checkpoints,
            const std::string& out_json, std::size_t workers) {
  const RunConfig cfg = RunConfig::load(config_path);
  const CheckpointSet cs = load_manifest(checkpoints);
  auto [train_ds, test_ds] = load_dataset(cfg.dataset);
  if (test_ds.images.empty()) throw ValidationError("ood needs a dataset with a test split");

  const std::array<std::size_t, 3> shape = cs.model_spec.input_shape;
  const LabeledDataset ood_ds = gaussian_ood(cfg.ood.n, shape, cfg.ood.seed);
  const OodComparison cmp = ood_detection_report(cs, test_ds, ood_ds, cfg.ood.stage, workers);

  json j;
  j["provenance"] = provenance(cfg.digest(), cfg.ood.seed);
  j["stage"] = stage_name(cfg.ood.stage);
  j["vog"] = ood_metrics_to_json(cmp.vog);
  j["msp"] = ood_metrics_to_json(cmp.msp);
  json quartiles = json::array();
  for (std::size_t i = 0; i < cmp.quartiles.size(); ++i) {
    quartiles.push_back({{"quartile", i + 1},
                         {"n_total", cmp.quartiles[i].n_total},
                         {"n_ood", cmp.quartiles[i].n_ood},
                         {"fraction_of_ood", cmp.quartiles[i].fraction_of_ood}});
  }
  j["vog_quartiles"] = std::move(quartiles);
  write_json(out_json, j);
  write_quartile_csv(cmp.quartiles,
                     (fs::path(out_json).parent_path() / "ood_quartiles.csv").string());
  write_scores_csv(cmp.in_records,
                   (fs::path(out_json).parent_path() / "ood_scores_in.csv").string());
  write_scores_csv(cmp.ood_records,
                   (fs::path(out_json).parent_path() / "ood_scores_out.csv").string());
  std::cout << out_json << "\n";
  return 0;
}

int cmd_report(const std::string& scores_csv, const std::string& correctness_csv,
               const std::string& config_path, const std::string& checkpoints, bool flip,
               std::size_t topk, const std::string& out_dir, std::size_t workers) {
  const auto records = read_scores_csv(scores_csv);
  std::map<std::size_t, bool> correctness;
  if (!correctness_csv.empty()) {
    correctness = read_correctness_csv(correctness_csv);
  } else {
    for (const VogRecord& r : records) correctness[r.example_id] = r.predicted_label == r.true_label;
  }

  const VogRanking ranking = rank(records);
  const DecileErrorTable table = decile_error(ranking, correctness);
  write_decile_csv(table, (fs::path(out_dir) / "decile_error.csv").string());

  {
    std::ostringstream os;
    os << "class,end,rank,example_id\n";
    for (const auto& [cls, tb] : top_bottom_ids_per_class(ranking, topk)) {
      for (std::size_t i = 0; i < tb.lowest.size(); ++i)
        os << cls << ",lowest," << (i + 1) << "," << tb.lowest[i] << "\n";
      for (std::size_t i = 0; i < tb.highest.size(); ++i)
        os << cls << ",highest," << (i + 1) << "," << tb.highest[i] << "\n";
    }
    write_file_atomic((fs::path(out_dir) / "top_bottom_ids.csv").string(), os.str());
  }

  json j;
  j["provenance"] = provenance(hex64(fnv1a64(scores_csv)), 0);
  j["decile_error"] = decile_to_json(table);

  if (flip) {
    if (config_path.empty() || checkpoints.empty()) {
      throw ValidationError("--flip needs --config and --checkpoints");
    }
    const RunConfig cfg = RunConfig::load(config_path);
    const CheckpointSet cs = load_manifest(checkpoints);
    auto [train_ds, test_ds] = load_dataset(cfg.dataset);
    if (test_ds.images.empty()) throw ValidationError("--flip needs a dataset with a test split");
    const StageFlipReport fr = stage_flip_report(cs, test_ds, workers);
    write_flip_csv(fr, (fs::path(out_dir) / "stage_flip.csv").string());
    j["stage_flip"] = json{{"early", decile_to_json(fr.early)},
                           {"late", decile_to_json(fr.late)},
                           {"early_trend_sign", fr.early_trend_sign},
                           {"late_trend_sign", fr.late_trend_sign},
                           {"flip_detected", fr.flip_detected}};
  }
  write_json((fs::path(out_dir) / "report.json").string(), j);
  std::cout << (fs::path(out_dir) / "report.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Example-difficulty ranking via variance of input gradients across checkpoints"};
  app.require_subcommand(1);

  std::string config_path, out_path, checkpoints, split = "test";
  std::string scores_csv, correctness_csv;
  std::string stage_str = "late", label_source_str = "true";
  std::size_t workers = 0, topk = 25;
  std::uint64_t seed = 19;
  double shuffle_fraction = 0.2;
  bool flip = false;

  auto* c_train = app.add_subcommand("train", "Train a model per the config and write checkpoints");
  c_train->add_option("--config", config_path, "JSON run config")->required();
  c_train->add_option("--out", out_path, "checkpoint output directory")->required();
  auto* w1 = c_train->add_option("--workers", workers, "worker threads (0 = all cores)")
                 ->default_val("0");

  auto* c_vog = app.add_subcommand("vog", "Compute VoG scores for a dataset split");
  c_vog->add_option("--config", config_path, "JSON run config")->required();
  c_vog->add_option("--checkpoints", checkpoints, "checkpoint directory or manifest")->required();
  c_vog->add_option("--out", out_path, "output CSV path")->required();
  c_vog->add_option("--split", split, "dataset split to score")->default_val("test");
  c_vog->add_option("--stage", stage_str, "early|late|all")->default_val("late");
  c_vog->add_option("--label-source", label_source_str, "true|predicted")->default_val("true");
  auto* w2 = c_vog->add_option("--workers", workers, "worker threads (0 = all cores)")
                 ->default_val("0");

  auto* c_toy = app.add_subcommand("toy", "Run the 2-d Gaussian-blob boundary experiment");
  c_toy->add_option("--seed", seed, "experiment seed")->default_val("19");
  c_toy->add_option("--out", out_path, "output directory")->required();
  auto* w3 = c_toy->add_option("--workers", workers, "worker threads (0 = all cores)")
                 ->default_val("0");

  auto* c_mem = app.add_subcommand("memtest", "Shuffled-label memorization experiment");
  c_mem->add_option("--config", config_path, "JSON run config")->required();
  c_mem->add_option("--shuffle-fraction", shuffle_fraction, "fraction of labels to shuffle")
      ->default_val("0.2");
  c_mem->add_option("--out", out_path, "output directory")->required();
  auto* w4 = c_mem->add_option("--workers", workers, "worker threads (0 = all cores)")
                 ->default_val("0");

  auto* c_ood = app.add_subcommand("ood", "VoG vs MSP out-of-distribution detection report");
  c_ood->add_option("--config", config_path, "JSON run config")->required();
  c_ood->add_option("--checkpoints", checkpoints, "checkpoint directory or manifest")->required();
  c_ood->add_option("--out", out_path, "output JSON path")->required();
  auto* w5 = c_ood->add_option("--workers", workers, "worker threads (0 = all cores)")
                 ->default_val("0");

  auto* c_rep = app.add_subcommand("report", "Decile error table and ranked id lists from scores");
  c_rep->add_option("--scores", scores_csv, "VoG scores CSV")->required();
  c_rep->add_option("--correctness", correctness_csv,
                    "correctness CSV (default: predicted vs true labels in the scores)");
  c_rep->add_option("--config", config_path, "JSON run config (for --flip)");
  c_rep->add_option("--checkpoints", checkpoints, "checkpoint directory (for --flip)");
  c_rep->add_flag("--flip", flip, "also compute the early/late stage flip report");
  c_rep->add_option("--topk", topk, "ids per class and end in the ranked lists")
      ->default_val("25");
  c_rep->add_option("--out", out_path, "output directory")->required();
  auto* w6 = c_rep->add_option("--workers", workers, "worker threads (0 = all cores)")
                 ->default_val("0");

  CLI11_PARSE(app, argc, argv);

  try {
    const bool workers_given = w1->count() || w2->count() || w3->count() || w4->count() ||
                               w5->count() || w6->count();
    workers = workers_from_env_or_flag(workers, workers_given);
    if (c_train->parsed()) return cmd_train(config_path, out_path, workers);
    if (c_vog->parsed()) {
      return cmd_vog(config_path, checkpoints, split, stage_from_name(stage_str),
                     label_source_from_name(label_source_str), workers, out_path);
    }
    if (c_toy->parsed()) return cmd_toy(seed, out_path, workers);
    if (c_mem->parsed()) return cmd_memtest(config_path, shuffle_fraction, out_path, workers);
    if (c_ood->parsed()) return cmd_ood(config_path, checkpoints, out_path, workers);
    if (c_rep->parsed()) {
      return cmd_report(scores_csv, correctness_csv, config_path, checkpoints, flip, topk,
                        out_path, workers);
    }
  } catch (const Error& e) {
    std::cerr << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
