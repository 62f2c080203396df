#include "vog/run_config.hpp"

#include <filesystem>

#include "vog/errors.hpp"
#include "vog/io_util.hpp"
#include "vog/serde.hpp"

namespace vog {

using nlohmann::json;

namespace {

json dataset_to_json(const DatasetConfig& d) {
  switch (d.kind) {
    case DatasetConfig::Kind::blobs:
      return json{{"kind", "blobs"},
                  {"n", d.blobs.n_points},
                  {"centers",
                   {{d.blobs.centers[0][0], d.blobs.centers[0][1]},
                    {d.blobs.centers[1][0], d.blobs.centers[1][1]}}},
                  {"cluster_std", d.blobs.cluster_std},
                  {"train_fraction", d.blobs.train_fraction},
                  {"seed", d.blobs.seed}};
    case DatasetConfig::Kind::patterns:
      return json{{"kind", "patterns"},
                  {"classes", d.patterns.classes},
                  {"image_shape",
                   {d.patterns.image_shape[0], d.patterns.image_shape[1], d.patterns.image_shape[2]}},
                  {"n_train", d.patterns.n_train},
                  {"n_test", d.patterns.n_test},
                  {"noise_sd", d.patterns.noise_sd},
                  {"max_shift", d.patterns.max_shift},
                  {"template_cells", d.patterns.template_cells},
                  {"seed", d.patterns.seed}};
    case DatasetConfig::Kind::idx: {
      json j{{"kind", "idx"},
             {"train_images", d.train_images},
             {"train_labels", d.train_labels}};
      if (!d.test_images.empty()) {
        j["test_images"] = d.test_images;
        j["test_labels"] = d.test_labels;
      }
      return j;
    }
  }
  throw ConfigError("dataset config: unknown kind");
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || base_dir.empty()) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

DatasetConfig dataset_from_json(const json& j, const std::string& base_dir) {
  DatasetConfig d;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "blobs") {
    reject_unknown_keys(j, {"kind", "n", "centers", "cluster_std", "train_fraction", "seed"},
                        "dataset (blobs)");
    d.kind = DatasetConfig::Kind::blobs;
    if (j.contains("n")) d.blobs.n_points = j.at("n").get<std::size_t>();
    if (j.contains("centers")) {
      const auto& c = j.at("centers");
      if (!c.is_array() || c.size() != 2 || c[0].size() != 2 || c[1].size() != 2) {
        throw ConfigError("dataset (blobs): centers must be [[x,y],[x,y]]");
      }
      for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 2; ++k) d.blobs.centers[i][k] = c[i][k].get<double>();
    }
    if (j.contains("cluster_std")) d.blobs.cluster_std = j.at("cluster_std").get<double>();
    if (j.contains("train_fraction")) d.blobs.train_fraction = j.at("train_fraction").get<double>();
    if (j.contains("seed")) d.blobs.seed = j.at("seed").get<std::uint64_t>();
  } else if (kind == "patterns") {
    reject_unknown_keys(j,
                        {"kind", "classes", "image_shape", "n_train", "n_test", "noise_sd",
                         "max_shift", "template_cells", "seed"},
                        "dataset (patterns)");
    d.kind = DatasetConfig::Kind::patterns;
    if (j.contains("classes")) d.patterns.classes = j.at("classes").get<std::size_t>();
    if (j.contains("image_shape")) {
      const auto& s = j.at("image_shape");
      if (!s.is_array() || s.size() != 3) {
        throw ConfigError("dataset (patterns): image_shape must be [c,h,w]");
      }
      for (int i = 0; i < 3; ++i) d.patterns.image_shape[i] = s[i].get<std::size_t>();
    }
    if (j.contains("n_train")) d.patterns.n_train = j.at("n_train").get<std::size_t>();
    if (j.contains("n_test")) d.patterns.n_test = j.at("n_test").get<std::size_t>();
    if (j.contains("noise_sd")) d.patterns.noise_sd = j.at("noise_sd").get<double>();
    if (j.contains("max_shift")) d.patterns.max_shift = j.at("max_shift").get<int>();
    if (j.contains("template_cells")) d.patterns.template_cells = j.at("template_cells").get<std::size_t>();
    if (j.contains("seed")) d.patterns.seed = j.at("seed").get<std::uint64_t>();
  } else if (kind == "idx") {
    reject_unknown_keys(j, {"kind", "train_images", "train_labels", "test_images", "test_labels"},
                        "dataset (idx)");
    d.kind = DatasetConfig::Kind::idx;
    d.train_images = resolve(base_dir, j.at("train_images").get<std::string>());
    d.train_labels = resolve(base_dir, j.at("train_labels").get<std::string>());
    if (j.contains("test_images") != j.contains("test_labels")) {
      throw ConfigError("dataset (idx): test_images and test_labels must appear together");
    }
    if (j.contains("test_images")) {
      d.test_images = resolve(base_dir, j.at("test_images").get<std::string>());
      d.test_labels = resolve(base_dir, j.at("test_labels").get<std::string>());
    }
  } else {
    throw ConfigError("dataset config: unknown kind '" + kind + "'");
  }
  return d;
}

}  // namespace

json RunConfig::to_json() const {
  json j;
  j["config_version"] = config_version;
  j["model"] = model_spec_to_json(model);
  j["train"] = train_config_to_json(train);
  j["dataset"] = dataset_to_json(dataset);
  j["vog"] = json{{"stage", stage_name(vog.stage)},
                  {"label_source", label_source_name(vog.label_source)},
                  {"workers", vog.workers}};
  j["ood"] = json{{"n", ood.n}, {"seed", ood.seed}, {"stage", stage_name(ood.stage)}};
  return j;
}

RunConfig RunConfig::from_json(const json& j, const std::string& base_dir) {
  reject_unknown_keys(j, {"config_version", "model", "train", "dataset", "vog", "ood"}, "config");
  RunConfig cfg;
  cfg.config_version = j.at("config_version").get<int>();
  if (cfg.config_version != kConfigVersion) {
    throw ConfigError("config_version " + std::to_string(cfg.config_version) + " unsupported (expected " +
                      std::to_string(kConfigVersion) + ")");
  }
  cfg.model = model_spec_from_json(j.at("model"));
  cfg.train = train_config_from_json(j.at("train"));
  cfg.dataset = dataset_from_json(j.at("dataset"), base_dir);
  if (j.contains("vog")) {
    const auto& v = j.at("vog");
    reject_unknown_keys(v, {"stage", "label_source", "workers"}, "vog options");
    if (v.contains("stage")) cfg.vog.stage = stage_from_name(v.at("stage").get<std::string>());
    if (v.contains("label_source"))
      cfg.vog.label_source = label_source_from_name(v.at("label_source").get<std::string>());
    if (v.contains("workers")) cfg.vog.workers = v.at("workers").get<std::size_t>();
  }
  if (j.contains("ood")) {
    const auto& o = j.at("ood");
    reject_unknown_keys(o, {"n", "seed", "stage"}, "ood options");
    if (o.contains("n")) cfg.ood.n = o.at("n").get<std::size_t>();
    if (o.contains("seed")) cfg.ood.seed = o.at("seed").get<std::uint64_t>();
    if (o.contains("stage")) cfg.ood.stage = stage_from_name(o.at("stage").get<std::string>());
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  try {
    return from_json(j, std::filesystem::path(path).parent_path().string());
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string RunConfig::digest() const { return hex64(fnv1a64(to_json().dump())); }

std::pair<LabeledDataset, LabeledDataset> load_dataset(const DatasetConfig& cfg) {
  switch (cfg.kind) {
    case DatasetConfig::Kind::blobs:
      return make_blobs(cfg.blobs);
    case DatasetConfig::Kind::patterns:
      return make_patterns(cfg.patterns);
    case DatasetConfig::Kind::idx: {
      LabeledDataset train = load_idx(cfg.train_images, cfg.train_labels, Split::train);
      LabeledDataset test;
      if (!cfg.test_images.empty()) {
        test = load_idx(cfg.test_images, cfg.test_labels, Split::test);
      }
      return {std::move(train), std::move(test)};
    }
  }
  throw ConfigError("dataset config: unknown kind");
}

}  // namespace vog
