#include "vog/checkpoint.hpp"

#include <cstring>
#include <filesystem>

#include "vog/errors.hpp"
#include "vog/io_util.hpp"
#include "vog/serde.hpp"

namespace vog {

void TrainConfig::validate() const {
  if (epochs == 0) throw ValidationError("train config: epochs must be positive");
  if (batch_size == 0) throw ValidationError("train config: batch_size must be positive");
  if (checkpoint_every == 0 || checkpoint_every > epochs) {
    throw ValidationError("train config: checkpoint_every must lie in [1, epochs]");
  }
  if (lr_schedule.empty() || lr_schedule.front().start_epoch != 0) {
    throw ValidationError("train config: lr_schedule must start at epoch 0");
  }
  for (std::size_t i = 1; i < lr_schedule.size(); ++i) {
    if (lr_schedule[i].start_epoch <= lr_schedule[i - 1].start_epoch) {
      throw ValidationError("train config: lr_schedule start_epochs must be strictly increasing");
    }
  }
  for (const LrStep& s : lr_schedule) {
    if (!(s.rate > 0.0)) throw ValidationError("train config: learning rates must be positive");
  }
  if (shuffle_label_fraction < 0.0 || shuffle_label_fraction > 1.0) {
    throw ValidationError("train config: shuffle_label_fraction must lie in [0, 1]");
  }
}

double TrainConfig::rate_for_epoch(std::size_t epoch_index) const {
  double rate = lr_schedule.front().rate;
  for (const LrStep& s : lr_schedule) {
    if (s.start_epoch <= epoch_index) rate = s.rate;
  }
  return rate;
}

std::string CheckpointSet::manifest_path() const {
  return (std::filesystem::path(dir) / "manifest.json").string();
}

std::string CheckpointSet::entry_file(const CheckpointEntry& e) const {
  return (std::filesystem::path(dir) / e.path).string();
}

namespace {

constexpr char kMagic[4] = {'V', 'C', 'K', 'P'};

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  append_u64(out, bits);
}

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n, const char* what) {
    if (pos + n > bytes.size()) {
      throw CorruptionError(path + ": truncated while reading " + what);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(bytes[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(bytes[pos++])) << (8 * i);
    return v;
  }
  double f64(const char* what) {
    const std::uint64_t bits = u64(what);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  }
};

}  // namespace

std::uint64_t save_params(const Params& params, const std::string& path) {
  std::string out;
  out.append(kMagic, 4);
  append_u32(out, static_cast<std::uint32_t>(kCheckpointFormatVersion));
  for (const LayerParams& lp : params.layers) {
    for (const Tensor* t : {&lp.weights, &lp.bias}) {
      append_u64(out, t->numel());
      for (double v : t->data) append_f64(out, v);
    }
  }
  write_file_atomic(path, out);
  return fnv1a64(out);
}

Params load_checkpoint(const CheckpointSet& cs, const CheckpointEntry& entry) {
  const std::string file = cs.entry_file(entry);
  if (!std::filesystem::exists(file)) {
    throw IoError("checkpoint file not found: " + file);
  }
  const std::string bytes = read_file(file);
  if (fnv1a64(bytes) != entry.checksum) {
    throw CorruptionError(file + ": checksum mismatch (expected " + hex64(entry.checksum) +
                          ", got " + hex64(fnv1a64(bytes)) + ")");
  }

  Reader r{bytes, 0, file};
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError(file + ": bad checkpoint magic");
  }
  r.pos = 4;
  const std::uint32_t version = r.u32("version");
  if (version != static_cast<std::uint32_t>(kCheckpointFormatVersion)) {
    throw FormatError(file + ": checkpoint format version " + std::to_string(version) +
                      ", expected " + std::to_string(kCheckpointFormatVersion));
  }

  Params params = Params::zeros_like(cs.model_spec);
  params.rng_seed = cs.train_config.seed;
  for (LayerParams& lp : params.layers) {
    for (Tensor* t : {&lp.weights, &lp.bias}) {
      const std::uint64_t n = r.u64("block length");
      if (n != t->numel()) {
        throw FormatError(file + ": tensor block holds " + std::to_string(n) +
                          " values, spec expects " + std::to_string(t->numel()));
      }
      for (std::size_t i = 0; i < n; ++i) t->data[i] = r.f64("tensor value");
    }
  }
  if (r.pos != bytes.size()) {
    throw FormatError(file + ": " + std::to_string(bytes.size() - r.pos) + " trailing bytes");
  }
  return params;
}

void write_manifest(const CheckpointSet& cs) {
  nlohmann::json j;
  j["format_version"] = cs.format_version;
  j["model_spec"] = model_spec_to_json(cs.model_spec);
  j["train_config"] = train_config_to_json(cs.train_config);
  nlohmann::json entries = nlohmann::json::array();
  for (const CheckpointEntry& e : cs.entries) {
    entries.push_back({{"epoch", e.epoch}, {"path", e.path}, {"checksum", hex64(e.checksum)}});
  }
  j["entries"] = std::move(entries);
  write_file_atomic(cs.manifest_path(), j.dump(2) + "\n");
}

CheckpointSet load_manifest(const std::string& dir_or_file) {
  namespace fs = std::filesystem;
  fs::path p(dir_or_file);
  if (fs::is_directory(p)) p /= "manifest.json";
  if (!fs::exists(p)) throw IoError("manifest not found: " + p.string());

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(p.string()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }

  CheckpointSet cs;
  try {
    reject_unknown_keys(j, {"format_version", "model_spec", "train_config", "entries"},
                        "manifest");
    cs.format_version = j.at("format_version").get<int>();
    if (cs.format_version != kCheckpointFormatVersion) {
      throw FormatError(p.string() + ": manifest format version " +
                        std::to_string(cs.format_version) + ", expected " +
                        std::to_string(kCheckpointFormatVersion));
    }
    cs.model_spec = model_spec_from_json(j.at("model_spec"));
    cs.train_config = train_config_from_json(j.at("train_config"));
    for (const auto& je : j.at("entries")) {
      reject_unknown_keys(je, {"epoch", "path", "checksum"}, "manifest entry");
      CheckpointEntry e;
      e.epoch = je.at("epoch").get<std::size_t>();
      e.path = je.at("path").get<std::string>();
      e.checksum = parse_hex64(je.at("checksum").get<std::string>());
      cs.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
  cs.dir = p.parent_path().string();

  for (std::size_t i = 1; i < cs.entries.size(); ++i) {
    if (cs.entries[i].epoch <= cs.entries[i - 1].epoch) {
      throw ValidationError(p.string() + ": entry epochs must be strictly increasing");
    }
  }
  for (const CheckpointEntry& e : cs.entries) {
    const std::string file = cs.entry_file(e);
    if (!fs::exists(file)) throw IoError("manifest references missing file: " + file);
    if (fnv1a64(read_file(file)) != e.checksum) {
      throw CorruptionError(file + ": checksum mismatch against manifest");
    }
  }
  return cs;
}

}  // namespace vog
