#include "vog/serde.hpp"

#include "vog/errors.hpp"

namespace vog {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::vector<std::string>& known,
                         const std::string& context) {
  if (!obj.is_object()) throw ConfigError(context + ": expected a JSON object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const std::string& k : known) {
      if (item.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError(context + ": unknown key '" + item.key() + "'");
  }
}

json model_spec_to_json(const ModelSpec& spec) {
  json layers = json::array();
  for (const Layer& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::dense:
        layers.push_back({{"kind", "dense"}, {"in", l.in}, {"out", l.out}});
        break;
      case LayerKind::conv:
        layers.push_back({{"kind", "conv"}, {"in_ch", l.in_ch}, {"out_ch", l.out_ch}, {"k", l.k}});
        break;
      case LayerKind::relu:
        layers.push_back({{"kind", "relu"}});
        break;
      case LayerKind::tanh:
        layers.push_back({{"kind", "tanh"}});
        break;
      case LayerKind::flatten:
        layers.push_back({{"kind", "flatten"}});
        break;
    }
  }
  return json{{"input_shape", {spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]}},
              {"num_classes", spec.num_classes},
              {"layers", std::move(layers)}};
}

ModelSpec model_spec_from_json(const json& j) {
  reject_unknown_keys(j, {"input_shape", "num_classes", "layers"}, "model spec");
  ModelSpec spec;
  const auto& shape = j.at("input_shape");
  if (!shape.is_array() || shape.size() != 3) {
    throw ConfigError("model spec: input_shape must be [channels, height, width]");
  }
  for (std::size_t i = 0; i < 3; ++i) spec.input_shape[i] = shape[i].get<std::size_t>();
  spec.num_classes = j.at("num_classes").get<std::size_t>();
  for (const auto& jl : j.at("layers")) {
    const std::string kind = jl.at("kind").get<std::string>();
    if (kind == "dense") {
      reject_unknown_keys(jl, {"kind", "in", "out"}, "dense layer");
      spec.layers.push_back(Layer::dense_layer(jl.at("in").get<std::size_t>(),
                                               jl.at("out").get<std::size_t>()));
    } else if (kind == "conv") {
      reject_unknown_keys(jl, {"kind", "in_ch", "out_ch", "k"}, "conv layer");
      spec.layers.push_back(Layer::conv_layer(jl.at("in_ch").get<std::size_t>(),
                                              jl.at("out_ch").get<std::size_t>(),
                                              jl.at("k").get<std::size_t>()));
    } else if (kind == "relu") {
      reject_unknown_keys(jl, {"kind"}, "relu layer");
      spec.layers.push_back(Layer::relu_layer());
    } else if (kind == "tanh") {
      reject_unknown_keys(jl, {"kind"}, "tanh layer");
      spec.layers.push_back(Layer::tanh_layer());
    } else if (kind == "flatten") {
      reject_unknown_keys(jl, {"kind"}, "flatten layer");
      spec.layers.push_back(Layer::flatten_layer());
    } else {
      throw ConfigError("model spec: unknown layer kind '" + kind + "'");
    }
  }
  spec.validate();
  return spec;
}

json train_config_to_json(const TrainConfig& cfg) {
  json sched = json::array();
  for (const LrStep& s : cfg.lr_schedule) sched.push_back({s.start_epoch, s.rate});
  return json{{"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"lr_schedule", std::move(sched)},
              {"checkpoint_every", cfg.checkpoint_every},
              {"seed", cfg.seed},
              {"shuffle_label_fraction", cfg.shuffle_label_fraction}};
}

TrainConfig train_config_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"epochs", "batch_size", "lr_schedule", "checkpoint_every", "seed",
                       "shuffle_label_fraction"},
                      "train config");
  TrainConfig cfg;
  cfg.epochs = j.at("epochs").get<std::size_t>();
  cfg.batch_size = j.at("batch_size").get<std::size_t>();
  cfg.lr_schedule.clear();
  for (const auto& js : j.at("lr_schedule")) {
    if (!js.is_array() || js.size() != 2) {
      throw ConfigError("train config: lr_schedule entries must be [start_epoch, rate]");
    }
    cfg.lr_schedule.push_back({js[0].get<std::size_t>(), js[1].get<double>()});
  }
  if (j.contains("checkpoint_every")) cfg.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("shuffle_label_fraction"))
    cfg.shuffle_label_fraction = j.at("shuffle_label_fraction").get<double>();
  cfg.validate();
  return cfg;
}

json shuffle_record_to_json(const LabelShuffleRecord& rec) {
  json orig = json::array();
  json fresh = json::array();
  for (std::size_t idx : rec.shuffled_indices) {
    orig.push_back({idx, rec.original_labels.at(idx)});
    fresh.push_back({idx, rec.new_labels.at(idx)});
  }
  return json{{"seed", rec.seed},
              {"shuffled_indices", rec.shuffled_indices},
              {"original_labels", std::move(orig)},
              {"new_labels", std::move(fresh)}};
}

LabelShuffleRecord shuffle_record_from_json(const json& j) {
  reject_unknown_keys(j, {"seed", "shuffled_indices", "original_labels", "new_labels"},
                      "shuffle record");
  LabelShuffleRecord rec;
  rec.seed = j.at("seed").get<std::uint64_t>();
  rec.shuffled_indices = j.at("shuffled_indices").get<std::vector<std::size_t>>();
  for (const auto& e : j.at("original_labels"))
    rec.original_labels[e[0].get<std::size_t>()] = e[1].get<int>();
  for (const auto& e : j.at("new_labels"))
    rec.new_labels[e[0].get<std::size_t>()] = e[1].get<int>();
  return rec;
}

}  // namespace vog
