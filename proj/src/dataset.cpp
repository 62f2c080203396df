#include "vog/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vog/errors.hpp"
#include "vog/io_util.hpp"
#include "vog/rng.hpp"

namespace vog {

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::ood: return "ood";
  }
  return "?";
}

void validate_dataset(const LabeledDataset& ds) {
  if (ds.images.size() != ds.labels.size()) {
    throw ValidationError("dataset: " + std::to_string(ds.images.size()) + " images vs " +
                          std::to_string(ds.labels.size()) + " labels");
  }
  if (ds.class_count <= 0) throw ValidationError("dataset: class_count must be positive");
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    if (!ds.images[i].same_shape(ds.images[0])) {
      throw ValidationError("dataset: image " + std::to_string(i) + " shape " +
                            shape_string(ds.images[i].shape) + " differs from " +
                            shape_string(ds.images[0].shape));
    }
    if (ds.labels[i] < 0 || ds.labels[i] >= ds.class_count) {
      throw ValidationError("dataset: label " + std::to_string(ds.labels[i]) + " at example " +
                            std::to_string(i) + " outside [0, " + std::to_string(ds.class_count) + ")");
    }
    ds.images[i].ensure_finite("dataset image " + std::to_string(i));
  }
}

// ---------------------------------------------------------------------------
// blobs

std::pair<LabeledDataset, LabeledDataset> make_blobs(const BlobConfig& cfg) {
  if (cfg.n_points < 2) throw ValidationError("make_blobs: n_points must be >= 2");
  if (cfg.cluster_std <= 0.0) throw ValidationError("make_blobs: cluster_std must be > 0");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw ValidationError("make_blobs: train_fraction must lie in (0, 1)");
  }

  Rng rng(cfg.seed);
  // Class counts split n/2 each, class 0 taking the odd one.
  const std::size_t n0 = (cfg.n_points + 1) / 2;
  std::vector<Tensor> points;
  std::vector<int> labels;
  points.reserve(cfg.n_points);
  for (std::size_t i = 0; i < cfg.n_points; ++i) {
    const int cls = i < n0 ? 0 : 1;
    const double x0 = cfg.centers[cls][0] + cfg.cluster_std * rng.normal();
    const double x1 = cfg.centers[cls][1] + cfg.cluster_std * rng.normal();
    points.push_back(Tensor::from({1, 1, 2}, {x0, x1}));
    labels.push_back(cls);
  }

  std::vector<std::size_t> order(cfg.n_points);
  std::iota(order.begin(), order.end(), 0);
  rng.fork(1).shuffle(order);

  const std::size_t n_train =
      static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(cfg.n_points)));

  LabeledDataset train, test;
  train.split = Split::train;
  test.split = Split::test;
  train.class_count = test.class_count = 2;
  std::ostringstream prov;
  prov << "blobs(n=" << cfg.n_points << ",std=" << cfg.cluster_std << ",seed=" << cfg.seed << ")";
  train.provenance = prov.str() + " train";
  test.provenance = prov.str() + " test";
  for (std::size_t i = 0; i < cfg.n_points; ++i) {
    LabeledDataset& dst = i < n_train ? train : test;
    dst.images.push_back(points[order[i]]);
    dst.labels.push_back(labels[order[i]]);
  }
  validate_dataset(train);
  validate_dataset(test);
  return {std::move(train), std::move(test)};
}

void write_blob_csv(const LabeledDataset& train, const LabeledDataset& test,
                    const std::string& path) {
  std::ostringstream os;
  os << "example_id,x0,x1,label,split\n";
  for (const LabeledDataset* ds : {&train, &test}) {
    for (std::size_t i = 0; i < ds->size(); ++i) {
      os << i << "," << format_g12(ds->images[i].data[0]) << "," << format_g12(ds->images[i].data[1])
         << "," << ds->labels[i] << "," << split_name(ds->split) << "\n";
    }
  }
  write_file_atomic(path, os.str());
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path, const char* field) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError(path + ": truncated while reading " + field);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

}  // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path, Split split) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot open images file " + images_path);
  const std::uint32_t img_magic = read_be32(img, images_path, "magic");
  if (img_magic != kIdxImagesMagic) {
    std::ostringstream os;
    os << images_path << ": bad images magic 0x" << std::hex << img_magic;
    throw FormatError(os.str());
  }
  const std::uint32_t n_images = read_be32(img, images_path, "count");
  const std::uint32_t rows = read_be32(img, images_path, "rows");
  const std::uint32_t cols = read_be32(img, images_path, "cols");

  std::ifstream lbl(labels_path, std::ios::binary);
  if (!lbl) throw IoError("cannot open labels file " + labels_path);
  const std::uint32_t lbl_magic = read_be32(lbl, labels_path, "magic");
  if (lbl_magic != kIdxLabelsMagic) {
    std::ostringstream os;
    os << labels_path << ": bad labels magic 0x" << std::hex << lbl_magic;
    throw FormatError(os.str());
  }
  const std::uint32_t n_labels = read_be32(lbl, labels_path, "count");
  if (n_images != n_labels) {
    throw FormatError("count mismatch: " + std::to_string(n_images) + " images vs " +
                      std::to_string(n_labels) + " labels");
  }

  LabeledDataset ds;
  ds.split = split;
  ds.provenance = "idx(" + images_path + ")";
  const std::size_t pixels = std::size_t(rows) * cols;
  std::vector<unsigned char> buf(pixels);
  int max_label = 0;
  for (std::uint32_t i = 0; i < n_images; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
    if (!img) throw FormatError(images_path + ": truncated at image " + std::to_string(i));
    Tensor t = Tensor::zeros({1, rows, cols});
    for (std::size_t j = 0; j < pixels; ++j) t.data[j] = buf[j] / 255.0;
    ds.images.push_back(std::move(t));
    char lab = 0;
    lbl.read(&lab, 1);
    if (!lbl) throw FormatError(labels_path + ": truncated at label " + std::to_string(i));
    ds.labels.push_back(static_cast<unsigned char>(lab));
    max_label = std::max(max_label, ds.labels.back());
  }
  ds.class_count = max_label + 1;
  validate_dataset(ds);
  return ds;
}

void write_idx(const LabeledDataset& ds, const std::string& images_path,
               const std::string& labels_path) {
  if (ds.images.empty()) throw ValidationError("write_idx: empty dataset");
  const auto& shape = ds.images[0].shape;
  if (shape.size() != 3 || shape[0] != 1) {
    throw ValidationError("write_idx: expected single-channel images, got " + shape_string(shape));
  }
  std::string img;
  write_be32(img, kIdxImagesMagic);
  write_be32(img, static_cast<std::uint32_t>(ds.size()));
  write_be32(img, static_cast<std::uint32_t>(shape[1]));
  write_be32(img, static_cast<std::uint32_t>(shape[2]));
  for (const Tensor& t : ds.images) {
    for (double v : t.data) {
      const long b = std::lround(v * 255.0);
      img.push_back(static_cast<char>(std::clamp(b, 0L, 255L)));
    }
  }
  std::string lbl;
  write_be32(lbl, kIdxLabelsMagic);
  write_be32(lbl, static_cast<std::uint32_t>(ds.size()));
  for (int l : ds.labels) lbl.push_back(static_cast<char>(l));
  write_file_atomic(images_path, img);
  write_file_atomic(labels_path, lbl);
}

// ---------------------------------------------------------------------------
// Gaussian OoD

LabeledDataset gaussian_ood(std::size_t n, std::array<std::size_t, 3> image_shape,
                            std::uint64_t seed) {
  if (n < 1) throw ValidationError("gaussian_ood: n must be >= 1");
  Rng rng(seed);
  LabeledDataset ds;
  ds.split = Split::ood;
  ds.class_count = 1;
  std::ostringstream prov;
  prov << "gaussian_ood(n=" << n << ",shape=" << image_shape[0] << "x" << image_shape[1] << "x"
       << image_shape[2] << ",seed=" << seed << ",pixel~N(0.5,std=1) clipped to [0,1],sentinel_label=0)";
  ds.provenance = prov.str();
  for (std::size_t i = 0; i < n; ++i) {
    Tensor t = Tensor::zeros({image_shape[0], image_shape[1], image_shape[2]});
    for (double& v : t.data) v = std::clamp(rng.normal(0.5, 1.0), 0.0, 1.0);
    ds.images.push_back(std::move(t));
    ds.labels.push_back(0);
  }
  validate_dataset(ds);
  return ds;
}

// ---------------------------------------------------------------------------
// corruptions

Corruption Corruption::translate(int dx, int dy) {
  Corruption c{Kind::translate};
  c.dx = dx;
  c.dy = dy;
  return c;
}
Corruption Corruption::rotate90() { return Corruption{Kind::rotate90}; }
Corruption Corruption::noise(double sigma) {
  Corruption c{Kind::noise};
  c.sigma = sigma;
  return c;
}
Corruption Corruption::blur(std::size_t k) {
  Corruption c{Kind::blur};
  c.k = k;
  return c;
}

namespace {

Tensor corrupt_one(const Tensor& img, const Corruption& c, Rng& rng) {
  const std::size_t ch = img.shape[0], h = img.shape[1], w = img.shape[2];
  switch (c.kind) {
    case Corruption::Kind::translate: {
      Tensor out = Tensor::zeros(img.shape);
      for (std::size_t z = 0; z < ch; ++z) {
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const long sy = static_cast<long>(y) - c.dy;
            const long sx = static_cast<long>(x) - c.dx;
            if (sy >= 0 && sy < static_cast<long>(h) && sx >= 0 && sx < static_cast<long>(w)) {
              out.data[(z * h + y) * w + x] = img.data[(z * h + sy) * w + sx];
            }
          }
        }
      }
      return out;
    }
    case Corruption::Kind::rotate90: {
      // counter-clockwise quarter turn; requires square images
      Tensor out = Tensor::zeros(img.shape);
      for (std::size_t z = 0; z < ch; ++z) {
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            out.data[(z * h + (h - 1 - x)) * w + y] = img.data[(z * h + y) * w + x];
          }
        }
      }
      return out;
    }
    case Corruption::Kind::noise: {
      Tensor out = img;
      for (double& v : out.data) v = std::clamp(v + rng.normal(0.0, c.sigma), 0.0, 1.0);
      return out;
    }
    case Corruption::Kind::blur: {
      Tensor out = Tensor::zeros(img.shape);
      const long r = static_cast<long>(c.k / 2);
      for (std::size_t z = 0; z < ch; ++z) {
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            std::size_t count = 0;
            for (long oy = -r; oy <= r; ++oy) {
              for (long ox = -r; ox <= r; ++ox) {
                const long sy = static_cast<long>(y) + oy;
                const long sx = static_cast<long>(x) + ox;
                if (sy < 0 || sy >= static_cast<long>(h) || sx < 0 || sx >= static_cast<long>(w)) continue;
                acc += img.data[(z * h + sy) * w + sx];
                ++count;
              }
            }
            out.data[(z * h + y) * w + x] = std::clamp(acc / static_cast<double>(count), 0.0, 1.0);
          }
        }
      }
      return out;
    }
  }
  throw ValidationError("corrupt: unknown corruption kind");
}

}  // namespace

LabeledDataset corrupt(const LabeledDataset& ds, const Corruption& c, std::uint64_t seed) {
  if (c.kind == Corruption::Kind::noise && c.sigma < 0.0) {
    throw ValidationError("corrupt: noise sigma must be >= 0");
  }
  if (c.kind == Corruption::Kind::blur && (c.k == 0 || c.k % 2 == 0)) {
    throw ValidationError("corrupt: blur kernel must be odd and positive, got " + std::to_string(c.k));
  }
  if (!ds.images.empty() && c.kind == Corruption::Kind::rotate90 &&
      ds.images[0].shape[1] != ds.images[0].shape[2]) {
    throw ValidationError("corrupt: rotate90 requires square images, got " +
                          shape_string(ds.images[0].shape));
  }
  LabeledDataset out = ds;
  out.provenance = ds.provenance + " +corruption";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Rng rng = Rng(seed).fork(i);  // per-example stream, independent of iteration order
    out.images[i] = corrupt_one(ds.images[i], c, rng);
  }
  validate_dataset(out);
  return out;
}

// ---------------------------------------------------------------------------
// synthetic class patterns

namespace {

// Smooth template: bilinear upsample of a coarse uniform-random grid.
Tensor make_template(std::size_t h, std::size_t w, std::size_t cells, Rng& rng) {
  std::vector<double> grid((cells + 1) * (cells + 1));
  for (double& v : grid) v = rng.next_double();
  Tensor t = Tensor::zeros({1, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double gy = static_cast<double>(y) / static_cast<double>(h - 1) * cells;
      const double gx = static_cast<double>(x) / static_cast<double>(w - 1) * cells;
      const std::size_t y0 = std::min(static_cast<std::size_t>(gy), cells - 1);
      const std::size_t x0 = std::min(static_cast<std::size_t>(gx), cells - 1);
      const double fy = gy - static_cast<double>(y0);
      const double fx = gx - static_cast<double>(x0);
      const double a = grid[y0 * (cells + 1) + x0];
      const double b = grid[y0 * (cells + 1) + x0 + 1];
      const double c = grid[(y0 + 1) * (cells + 1) + x0];
      const double d = grid[(y0 + 1) * (cells + 1) + x0 + 1];
      t.data[y * w + x] = (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d);
    }
  }
  return t;
}

Tensor shifted(const Tensor& img, int dx, int dy) {
  const std::size_t h = img.shape[1], w = img.shape[2];
  Tensor out = Tensor::zeros(img.shape);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const long sy = static_cast<long>(y) - dy;
      const long sx = static_cast<long>(x) - dx;
      if (sy >= 0 && sy < static_cast<long>(h) && sx >= 0 && sx < static_cast<long>(w)) {
        out.data[y * w + x] = img.data[sy * w + sx];
      }
    }
  }
  return out;
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> make_patterns(const PatternConfig& cfg) {
  if (cfg.classes < 2) throw ValidationError("make_patterns: need at least 2 classes");
  if (cfg.image_shape[0] != 1) throw ValidationError("make_patterns: single-channel only");
  if (cfg.n_train == 0 || cfg.n_test == 0) throw ValidationError("make_patterns: empty split");

  Rng seed_rng(cfg.seed);
  Rng template_rng = seed_rng.fork(0);
  std::vector<Tensor> templates;
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    templates.push_back(
        make_template(cfg.image_shape[1], cfg.image_shape[2], cfg.template_cells, template_rng));
  }

  auto generate = [&](std::size_t n, Split split, Rng rng) {
    LabeledDataset ds;
    ds.split = split;
    ds.class_count = static_cast<int>(cfg.classes);
    std::ostringstream prov;
    prov << "patterns(classes=" << cfg.classes << ",n=" << n << ",noise=" << cfg.noise_sd
         << ",shift=" << cfg.max_shift << ",seed=" << cfg.seed << ") " << split_name(split);
    ds.provenance = prov.str();
    for (std::size_t i = 0; i < n; ++i) {
      const int cls = static_cast<int>(i % cfg.classes);
      const int dx = static_cast<int>(rng.below(2 * cfg.max_shift + 1)) - cfg.max_shift;
      const int dy = static_cast<int>(rng.below(2 * cfg.max_shift + 1)) - cfg.max_shift;
      Tensor img = shifted(templates[cls], dx, dy);
      for (double& v : img.data) v = std::clamp(v + rng.normal(0.0, cfg.noise_sd), 0.0, 1.0);
      ds.images.push_back(std::move(img));
      ds.labels.push_back(cls);
    }
    // seeded shuffle so class order carries no signal
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    LabeledDataset shuffled = ds;
    for (std::size_t i = 0; i < n; ++i) {
      shuffled.images[i] = ds.images[order[i]];
      shuffled.labels[i] = ds.labels[order[i]];
    }
    validate_dataset(shuffled);
    return shuffled;
  };

  return {generate(cfg.n_train, Split::train, seed_rng.fork(1)),
          generate(cfg.n_test, Split::test, seed_rng.fork(2))};
}

}  // namespace vog
