#include "vog/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "vog/errors.hpp"
#include "vog/io_util.hpp"
#include "vog/parallel.hpp"
#include "vog/rng.hpp"
#include "vog/serde.hpp"

namespace vog {

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::early: return "early";
    case Stage::late: return "late";
    case Stage::all: return "all";
  }
  return "?";
}

Stage stage_from_name(const std::string& name) {
  if (name == "early") return Stage::early;
  if (name == "late") return Stage::late;
  if (name == "all") return Stage::all;
  throw ValidationError("unknown stage '" + name + "' (expected early|late|all)");
}

std::pair<LabeledDataset, LabelShuffleRecord> shuffle_labels(const LabeledDataset& data,
                                                             double fraction,
                                                             std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) {
    throw ValidationError("shuffle_labels: fraction must lie in [0, 1], got " +
                          std::to_string(fraction));
  }
  const std::size_t n = data.size();
  const std::size_t count =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));

  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  order.resize(count);
  std::sort(order.begin(), order.end());

  LabeledDataset out = data;
  LabelShuffleRecord rec;
  rec.seed = seed;
  rec.shuffled_indices = order;
  for (std::size_t idx : order) {
    const int fresh = static_cast<int>(rng.below(static_cast<std::uint64_t>(data.class_count)));
    rec.original_labels[idx] = data.labels[idx];
    rec.new_labels[idx] = fresh;
    out.labels[idx] = fresh;
  }
  return {std::move(out), std::move(rec)};
}

LabeledDataset apply_shuffle(const LabeledDataset& data, const LabelShuffleRecord& rec) {
  LabeledDataset out = data;
  for (const auto& [idx, label] : rec.new_labels) {
    if (idx >= out.labels.size()) {
      throw ValidationError("apply_shuffle: index " + std::to_string(idx) +
                            " outside the dataset");
    }
    out.labels[idx] = label;
  }
  return out;
}

namespace {

// Per-example gradients accumulate into a fixed number of slots (by example
// index modulo kGradSlots) that are then reduced in slot order, so the sum is
// identical for every worker count.
constexpr std::size_t kGradSlots = 16;

struct BatchOutcome {
  double mean_loss = 0.0;
};

BatchOutcome apply_batch(const ModelSpec& spec, Params& params, const LabeledDataset& data,
                         const std::vector<std::size_t>& batch, double lr, std::size_t workers,
                         std::vector<Params>& slot_grads, std::vector<double>& slot_losses) {
  const std::size_t slots = std::min(kGradSlots, batch.size());
  for (std::size_t s = 0; s < slots; ++s) {
    Params& g = slot_grads[s];
    for (LayerParams& lp : g.layers) {
      std::fill(lp.weights.data.begin(), lp.weights.data.end(), 0.0);
      std::fill(lp.bias.data.begin(), lp.bias.data.end(), 0.0);
    }
    slot_losses[s] = 0.0;
  }

  parallel_for(slots, std::min(workers, slots), [&](std::size_t s) {
    for (std::size_t i = s; i < batch.size(); i += slots) {
      const std::size_t ex = batch[i];
      LossGrad lg = softmax_xent_grad(spec, params, data.images[ex],
                                      static_cast<std::size_t>(data.labels[ex]));
      slot_grads[s].axpy(1.0, lg.param_grads);
      slot_losses[s] += lg.loss;
    }
  });

  const double inv = 1.0 / static_cast<double>(batch.size());
  double loss_sum = 0.0;
  for (std::size_t s = 0; s < slots; ++s) loss_sum += slot_losses[s];
  for (std::size_t s = 0; s < slots; ++s) params.axpy(-lr * inv, slot_grads[s]);
  return BatchOutcome{loss_sum * inv};
}

}  // namespace

TrainResult train(const ModelSpec& spec, const LabeledDataset& data, const TrainConfig& cfg,
                  const std::string& out_dir, std::size_t workers) {
  spec.validate();
  cfg.validate();
  if (data.size() == 0) throw ValidationError("train: dataset is empty");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] < 0 || static_cast<std::size_t>(data.labels[i]) >= spec.num_classes) {
      throw ValidationError("train: label " + std::to_string(data.labels[i]) + " at example " +
                            std::to_string(i) + " outside [0, " + std::to_string(spec.num_classes) +
                            ")");
    }
  }
  workers = resolve_workers(workers);

  TrainResult result;
  const LabeledDataset* train_data = &data;
  LabeledDataset relabeled;
  if (cfg.shuffle_label_fraction > 0.0) {
    Rng base(cfg.seed);
    auto [shuffled, rec] = shuffle_labels(data, cfg.shuffle_label_fraction, base.fork(7).seed());
    relabeled = std::move(shuffled);
    result.shuffle = std::move(rec);
    train_data = &relabeled;
  }

  CheckpointSet cs;
  cs.format_version = kCheckpointFormatVersion;
  cs.model_spec = spec;
  cs.train_config = cfg;
  cs.dir = out_dir;

  Params params = Params::init(spec, cfg.seed);
  auto save = [&](std::size_t epoch) {
    CheckpointEntry e;
    e.epoch = epoch;
    e.path = "ckpt_" + std::to_string(epoch) + ".bin";
    e.checksum = save_params(params, cs.entry_file(e));
    cs.entries.push_back(std::move(e));
  };
  save(0);  // post-init, pre-update

  std::vector<Params> slot_grads;
  std::vector<double> slot_losses(kGradSlots, 0.0);
  for (std::size_t s = 0; s < kGradSlots; ++s) slot_grads.push_back(Params::zeros_like(spec));

  Rng order_rng = Rng(cfg.seed).fork(11);
  std::vector<std::size_t> order(train_data->size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.rate_for_epoch(epoch - 1);
    order_rng.shuffle(order);
    const std::size_t n_batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(lo + cfg.batch_size, order.size());
      std::vector<std::size_t> batch(order.begin() + lo, order.begin() + hi);
      BatchOutcome out;
      try {
        out = apply_batch(spec, params, *train_data, batch, lr, workers, slot_grads, slot_losses);
      } catch (const Error& e) {
        std::ostringstream os;
        os << "training aborted at epoch " << epoch << ", batch " << b << ", lr " << lr << ": "
           << e.what();
        throw TrainingError(os.str());
      }
      if (!std::isfinite(out.mean_loss)) {
        std::ostringstream os;
        os << "NaN loss at epoch " << epoch << ", batch " << b << ", lr " << lr;
        throw TrainingError(os.str());
      }
    }
    if (epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs) save(epoch);
  }

  write_manifest(cs);
  if (result.shuffle) {
    // kept alongside the manifest so score partitions can be rebuilt later
    write_file_atomic((std::filesystem::path(out_dir) / "shuffle_record.json").string(),
                      shuffle_record_to_json(*result.shuffle).dump(2) + "\n");
  }

  std::size_t wrong = 0;
  std::vector<std::uint8_t> correct(train_data->size(), 0);
  parallel_for(train_data->size(), workers, [&](std::size_t i) {
    const Prediction pr = predict(spec, params, train_data->images[i]);
    correct[i] = pr.label == static_cast<std::size_t>(train_data->labels[i]) ? 1 : 0;
  });
  for (std::uint8_t c : correct)
    if (!c) ++wrong;
  result.final_train_error =
      100.0 * static_cast<double>(wrong) / static_cast<double>(train_data->size());
  result.checkpoints = std::move(cs);
  return result;
}

CheckpointSet select_stage(const CheckpointSet& cs, Stage stage) {
  CheckpointSet out = cs;
  out.entries.clear();
  for (const CheckpointEntry& e : cs.entries) {
    if (e.epoch == 0) continue;  // the untrained snapshot never enters a stage
    out.entries.push_back(e);
  }
  const std::size_t n = out.entries.size();
  if (stage == Stage::all) {
    if (n < 2) {
      throw ValidationError("stage 'all' requires K >= 2 non-initial checkpoints, have " +
                            std::to_string(n));
    }
    return out;
  }
  if (n < 3) {
    throw ValidationError("stage '" + stage_name(stage) +
                          "' requires at least 3 non-initial checkpoints, have " +
                          std::to_string(n));
  }
  if (stage == Stage::early) {
    out.entries.resize(3);
  } else {
    out.entries.erase(out.entries.begin(), out.entries.end() - 3);
  }
  return out;
}

}  // namespace vog
