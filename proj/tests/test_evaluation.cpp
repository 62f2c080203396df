#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "vog/dataset.hpp"
#include "vog/errors.hpp"
#include "vog/evaluation.hpp"
#include "vog/train.hpp"

using namespace vog;

namespace {

VogRecord rec(std::size_t id, int label, double normalized, Split split = Split::test) {
  VogRecord r;
  r.example_id = id;
  r.true_label = label;
  r.predicted_label = label;
  r.raw_vog = std::fabs(normalized);
  r.normalized_vog = normalized;
  r.split = split;
  return r;
}

VogRanking ranking_of(std::size_t n) {
  std::vector<VogRecord> records;
  for (std::size_t i = 0; i < n; ++i) records.push_back(rec(i, 0, static_cast<double>(i)));
  return rank(std::move(records));
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("vogeval_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("decile_error") {
  SUBCASE("all correct gives all-zero rows") {
    const VogRanking ranking = ranking_of(100);
    std::map<std::size_t, bool> correct;
    for (std::size_t i = 0; i < 100; ++i) correct[i] = true;
    const DecileErrorTable t = decile_error(ranking, correct);
    REQUIRE(t.rows.size() == 10);
    for (const DecileRow& r : t.rows) {
      CHECK(r.top1_error_percent == 0.0);
      CHECK(r.n_examples == 10);
    }
  }
  SUBCASE("only the top decile misclassified") {
    const VogRanking ranking = ranking_of(100);
    std::map<std::size_t, bool> correct;
    for (std::size_t i = 0; i < 100; ++i) correct[i] = i < 90;  // ids track rank order here
    const DecileErrorTable t = decile_error(ranking, correct);
    for (std::size_t d = 0; d < 9; ++d) CHECK(t.rows[d].top1_error_percent == 0.0);
    CHECK(t.rows[9].top1_error_percent == 100.0);
  }
  SUBCASE("missing correctness entry names the id") {
    const VogRanking ranking = ranking_of(10);
    std::map<std::size_t, bool> correct;
    for (std::size_t i = 0; i < 9; ++i) correct[i] = true;
    CHECK_THROWS_WITH_AS(decile_error(ranking, correct), doctest::Contains("9"),
                         ValidationError);
  }
  SUBCASE("rows reconstruct from raw correctness via an independent group-by") {
    std::mt19937 gen(17);
    std::uniform_real_distribution<double> score(-2.0, 2.0);
    std::bernoulli_distribution flip(0.3);
    std::vector<VogRecord> records;
    std::map<std::size_t, bool> correct;
    for (std::size_t i = 0; i < 137; ++i) {
      records.push_back(rec(i, 0, score(gen)));
      correct[i] = !flip(gen);
    }
    const VogRanking ranking = rank(records);
    const DecileErrorTable t = decile_error(ranking, correct);

    // oracle: walk the ranked list and group by bucket sizes independently
    std::size_t idx = 0;
    const std::size_t base = 137 / 10, extra = 137 % 10;
    for (std::size_t d = 0; d < 10; ++d) {
      const std::size_t size = base + (d < extra ? 1 : 0);
      double wrong = 0.0;
      for (std::size_t j = 0; j < size; ++j, ++idx) {
        if (!correct.at(ranking.records[idx].example_id)) wrong += 1.0;
      }
      CHECK(t.rows[d].n_examples == size);
      CHECK(t.rows[d].top1_error_percent ==
            doctest::Approx(100.0 * wrong / static_cast<double>(size)).epsilon(1e-12));
    }
  }
}

TEST_CASE("msp scores") {
  ModelSpec spec;
  spec.input_shape = {1, 1, 3};
  spec.num_classes = 3;
  spec.layers.push_back(Layer::flatten_layer());
  spec.layers.push_back(Layer::dense_layer(3, 3));
  spec.validate();
  Params p = Params::zeros_like(spec);

  LabeledDataset ds;
  ds.split = Split::test;
  ds.class_count = 3;
  ds.provenance = "unit";
  ds.images.push_back(Tensor::from({1, 1, 3}, {0, 0, 0}));
  ds.labels.push_back(0);

  SUBCASE("confident logits approach 1") {
    p.layers[1].bias.data = {10.0, 0.0, 0.0};
    const auto scores = msp_scores(spec, p, ds);
    CHECK(scores.at(0) == doctest::Approx(0.99990).epsilon(1e-4));
  }
  SUBCASE("uniform logits give 1/C") {
    const auto scores = msp_scores(spec, p, ds);
    CHECK(scores.at(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("invariant to adding a constant to all logits") {
    p.layers[1].bias.data = {1.0, 2.0, 3.0};
    const auto a = msp_scores(spec, p, ds);
    for (double& b : p.layers[1].bias.data) b += 55.5;
    const auto b = msp_scores(spec, p, ds);
    CHECK(std::fabs(a.at(0) - b.at(0)) < 1e-12);
  }
}

TEST_CASE("boundary distance analysis against the analytic line oracle") {
  // affine two-class model: boundary is the line (w0-w1).x + (b0-b1) = 0
  ModelSpec spec;
  spec.input_shape = {1, 1, 2};
  spec.num_classes = 2;
  spec.layers.push_back(Layer::flatten_layer());
  spec.layers.push_back(Layer::dense_layer(2, 2));
  spec.validate();
  Params p = Params::zeros_like(spec);
  p.layers[1].weights.data = {1.0, 0.5, -0.5, 1.5};  // rows w0, w1
  p.layers[1].bias.data = {0.3, -0.2};
  const double dw0 = 1.0 - (-0.5), dw1 = 0.5 - 1.5, db = 0.3 - (-0.2);
  const double norm = std::hypot(dw0, dw1);

  LabeledDataset ds;
  ds.split = Split::test;
  ds.class_count = 2;
  ds.provenance = "unit";
  std::vector<VogRecord> records;
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> coord(-4.0, 4.0);
  for (std::size_t i = 0; i < 40; ++i) {
    const double x0 = coord(gen), x1 = coord(gen);
    ds.images.push_back(Tensor::from({1, 1, 2}, {x0, x1}));
    ds.labels.push_back(dw0 * x0 + dw1 * x1 + db > 0 ? 0 : 1);
    records.push_back(rec(i, ds.labels.back(), coord(gen)));
  }

  const BoundaryAnalysis ba = boundary_distance_analysis(spec, p, ds, records);
  REQUIRE(ba.distances.size() == 40);
  for (std::size_t i = 0; i < 40; ++i) {
    const double x0 = ds.images[i].data[0], x1 = ds.images[i].data[1];
    const double analytic = std::fabs(dw0 * x0 + dw1 * x1 + db) / norm;
    CHECK(std::fabs(ba.distances[i] - analytic) < 1e-3);
  }
}

TEST_CASE("boundary analysis error and degenerate correlation paths") {
  ModelSpec spec;
  spec.input_shape = {1, 1, 2};
  spec.num_classes = 2;
  spec.layers.push_back(Layer::flatten_layer());
  spec.layers.push_back(Layer::dense_layer(2, 2));
  spec.validate();

  LabeledDataset ds;
  ds.split = Split::test;
  ds.class_count = 2;
  ds.provenance = "unit";
  for (int i = 0; i < 8; ++i) {
    ds.images.push_back(Tensor::from({1, 1, 2}, {static_cast<double>(i % 3), static_cast<double>(i / 3)}));
    ds.labels.push_back(i % 2);
  }

  SUBCASE("no boundary in the box is an analysis error") {
    Params p = Params::zeros_like(spec);
    p.layers[1].bias.data = {10.0, 0.0};  // class 0 wins everywhere
    std::vector<VogRecord> records{rec(0, 0, 0.1), rec(1, 1, 0.2), rec(2, 0, 0.3)};
    CHECK_THROWS_AS(boundary_distance_analysis(spec, p, ds, records), AnalysisError);
  }
  SUBCASE("equidistant construction reports the correlation as undefined") {
    Params p = Params::zeros_like(spec);
    p.layers[1].weights.data = {1.0, 0.0, -1.0, 0.0};  // boundary x0 = 0
    LabeledDataset sym;
    sym.split = Split::test;
    sym.class_count = 2;
    sym.provenance = "unit";
    std::vector<VogRecord> records;
    for (int i = 0; i < 6; ++i) {
      const double side = i % 2 == 0 ? 1.0 : -1.0;  // all at |x0| = 1
      sym.images.push_back(Tensor::from({1, 1, 2}, {side, static_cast<double>(i)}));
      sym.labels.push_back(i % 2);
      records.push_back(rec(i, i % 2, 0.5 * i));
    }
    const BoundaryAnalysis ba = boundary_distance_analysis(spec, p, sym, records);
    CHECK_FALSE(ba.correlation_defined);  // distances all equal, spread is zero
  }
}

TEST_CASE("stage flip detection on constructed tables") {
  // build two checkpoints sets is heavy here; exercise the trend logic through
  // decile tables produced by hand-ranked records instead
  std::vector<VogRecord> early_records, late_records;
  std::map<std::size_t, bool> early_correct, late_correct;
  for (std::size_t i = 0; i < 100; ++i) {
    early_records.push_back(rec(i, 0, static_cast<double>(i)));
    late_records.push_back(rec(i, 0, static_cast<double>(i)));
    // monotone decreasing error early (high VoG -> correct), increasing late
    early_correct[i] = i >= 50;
    late_correct[i] = i < 50;
  }
  const DecileErrorTable early = decile_error(rank(early_records), early_correct);
  const DecileErrorTable late = decile_error(rank(late_records), late_correct);
  CHECK(early.rows.front().top1_error_percent == 100.0);
  CHECK(early.rows.back().top1_error_percent == 0.0);
  CHECK(late.rows.front().top1_error_percent == 0.0);
  CHECK(late.rows.back().top1_error_percent == 100.0);
}

TEST_CASE("stage_flip_report runs end to end and detects a constructed flip") {
  // quick run: blobs are easy, so both stages typically agree; the report
  // machinery (stage selection, per-stage correctness) is what matters here
  BlobConfig bc;
  bc.n_points = 120;
  bc.seed = 21;
  const auto [train_ds, test_ds] = make_blobs(bc);
  const ModelSpec spec = make_mlp({1, 1, 2}, {6}, 2);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.checkpoint_every = 1;
  cfg.batch_size = 16;
  cfg.lr_schedule = {{0, 0.1}};
  cfg.seed = 3;
  const auto dir = temp_dir("flip");
  const TrainResult result = train(spec, train_ds, cfg, dir.string());

  const StageFlipReport report = stage_flip_report(result.checkpoints, test_ds);
  CHECK(report.early.rows.size() == 10);
  CHECK(report.late.rows.size() == 10);
  CHECK(report.flip_detected == (report.early_trend_sign != report.late_trend_sign));

  SUBCASE("too few checkpoints is a validation error") {
    CheckpointSet small = result.checkpoints;
    small.entries.resize(4);
    CHECK_THROWS_AS(stage_flip_report(small, test_ds), ValidationError);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("ood metrics and quartile representation") {
  SUBCASE("separation pushes all ood into the top quartile up to capacity") {
    std::vector<VogRecord> in_records, ood_records;
    for (std::size_t i = 0; i < 30; ++i) in_records.push_back(rec(i, 0, static_cast<double>(i)));
    for (std::size_t i = 0; i < 10; ++i)
      ood_records.push_back(rec(i, 0, 100.0 + static_cast<double>(i), Split::ood));
    const auto rows = ood_percentile_representation(in_records, ood_records);
    REQUIRE(rows.size() == 4);
    CHECK(rows[3].n_ood == 10);
    CHECK(rows[3].fraction_of_ood == 1.0);
    CHECK(rows[0].n_ood == 0);
  }
  SUBCASE("identical distributions spread roughly uniformly") {
    std::mt19937 gen(9);
    std::uniform_real_distribution<double> score(0.0, 1.0);
    std::vector<VogRecord> in_records, ood_records;
    for (std::size_t i = 0; i < 2000; ++i) in_records.push_back(rec(i, 0, score(gen)));
    for (std::size_t i = 0; i < 2000; ++i)
      ood_records.push_back(rec(i, 0, score(gen), Split::ood));
    const auto rows = ood_percentile_representation(in_records, ood_records);
    // binomial 3 sigma around 500 of 2000 at p = 1/4
    for (const auto& row : rows) {
      CHECK(row.n_ood > 500 - 3 * 20);
      CHECK(row.n_ood < 500 + 3 * 20);
    }
  }
  SUBCASE("metric triple on oriented scores") {
    const OodMetrics m = ood_metrics({0.9, 0.8, 0.7}, {0.2, 0.1});
    CHECK(m.auroc == 1.0);
    CHECK(m.aupr_in == 1.0);
    CHECK(m.aupr_out == 1.0);
    CHECK(m.n_in == 3);
    CHECK(m.n_out == 2);
    CHECK(m.base_rate_in == doctest::Approx(0.6));
    CHECK(m.base_rate_out == doctest::Approx(0.4));
  }
  SUBCASE("empty sets rejected") {
    CHECK_THROWS_AS(ood_percentile_representation({}, {rec(0, 0, 1.0)}), ValidationError);
  }
}

TEST_CASE("top and bottom id lists per class") {
  std::vector<VogRecord> records;
  for (std::size_t i = 0; i < 12; ++i) records.push_back(rec(i, static_cast<int>(i % 2), static_cast<double>(i)));
  const auto grids = top_bottom_ids_per_class(rank(records), 2);
  REQUIRE(grids.size() == 2);
  CHECK(grids.at(0).lowest == std::vector<std::size_t>{0, 2});
  CHECK(grids.at(0).highest == std::vector<std::size_t>{10, 8});
  CHECK(grids.at(1).lowest == std::vector<std::size_t>{1, 3});
  CHECK(grids.at(1).highest == std::vector<std::size_t>{11, 9});
}
