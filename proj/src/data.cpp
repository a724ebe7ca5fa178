#include "ulu/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ulu/rng.hpp"

namespace ulu {

namespace {

constexpr uint32_t kImagesMagic = 0x00000803;
constexpr uint32_t kLabelsMagic = 0x00000801;

uint32_t read_be_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IdxError(IdxError::Kind::Truncated, "truncated header in '" + path + "'");
  return static_cast<uint32_t>(b[0]) << 24 | static_cast<uint32_t>(b[1]) << 16 |
         static_cast<uint32_t>(b[2]) << 8 | static_cast<uint32_t>(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IdxError(IdxError::Kind::Truncated, "cannot open '" + images_path + "'");
  uint32_t magic = read_be_u32(imgs, images_path);
  if (magic != kImagesMagic) {
    throw IdxError(IdxError::Kind::BadMagic,
                   "'" + images_path + "' has magic " + std::to_string(magic) +
                       ", expected images magic 2051");
  }
  uint32_t n = read_be_u32(imgs, images_path);
  uint32_t h = read_be_u32(imgs, images_path);
  uint32_t w = read_be_u32(imgs, images_path);

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw IdxError(IdxError::Kind::Truncated, "cannot open '" + labels_path + "'");
  uint32_t lmagic = read_be_u32(labs, labels_path);
  if (lmagic != kLabelsMagic) {
    throw IdxError(IdxError::Kind::BadMagic,
                   "'" + labels_path + "' has magic " + std::to_string(lmagic) +
                       ", expected labels magic 2049");
  }
  uint32_t ln = read_be_u32(labs, labels_path);
  if (ln != n) {
    throw IdxError(IdxError::Kind::CountMismatch,
                   "image count " + std::to_string(n) + " != label count " + std::to_string(ln));
  }

  size_t pixels = static_cast<size_t>(n) * h * w;
  std::vector<unsigned char> raw(pixels);
  imgs.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels));
  if (imgs.gcount() != static_cast<std::streamsize>(pixels)) {
    throw IdxError(IdxError::Kind::Truncated, "truncated pixel data in '" + images_path + "'");
  }
  std::vector<unsigned char> lraw(n);
  labs.read(reinterpret_cast<char*>(lraw.data()), static_cast<std::streamsize>(n));
  if (labs.gcount() != static_cast<std::streamsize>(n)) {
    throw IdxError(IdxError::Kind::Truncated, "truncated label data in '" + labels_path + "'");
  }

  Dataset ds;
  std::vector<double> px(pixels);
  for (size_t i = 0; i < pixels; ++i) px[i] = static_cast<double>(raw[i]) / 255.0;
  ds.images = Tensor({static_cast<int64_t>(n), static_cast<int64_t>(h), static_cast<int64_t>(w)},
                     std::move(px));
  ds.labels.assign(lraw.begin(), lraw.end());
  int max_label = 0;
  for (int l : ds.labels) max_label = std::max(max_label, l);
  ds.num_classes = std::max(10, max_label + 1);
  ds.name = images_path;
  return ds;
}

namespace {

Dataset gather(const Dataset& ds, const std::vector<int64_t>& idx, const std::string& name) {
  int64_t h = ds.images.dim(1), w = ds.images.dim(2);
  Dataset out;
  out.name = name;
  out.num_classes = ds.num_classes;
  out.images = Tensor({static_cast<int64_t>(idx.size()), h, w});
  out.labels.reserve(idx.size());
  int64_t plane = h * w;
  for (size_t i = 0; i < idx.size(); ++i) {
    const double* src = ds.images.data() + idx[i] * plane;
    std::copy(src, src + plane, out.images.data() + static_cast<int64_t>(i) * plane);
    out.labels.push_back(ds.labels[static_cast<size_t>(idx[i])]);
  }
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> subset_split(const Dataset& ds, int64_t train_n, int64_t test_n,
                                         uint64_t seed) {
  if (train_n < 0 || test_n < 0 || train_n + test_n > ds.size()) {
    throw std::invalid_argument("subset_split: train_n + test_n exceeds dataset size");
  }
  int classes = ds.num_classes;
  int64_t train_per = train_n / classes;
  int64_t test_per = test_n / classes;

  // Seeded shuffle of all indices, then a per-class sweep in shuffled order.
  Rng rng(seed);
  std::vector<int64_t> order = rng.permutation(ds.size());
  std::vector<std::vector<int64_t>> by_class(static_cast<size_t>(classes));
  for (int64_t i : order) {
    int c = ds.labels[static_cast<size_t>(i)];
    if (c < 0 || c >= classes) throw std::invalid_argument("subset_split: label out of range");
    by_class[static_cast<size_t>(c)].push_back(i);
  }
  for (int c = 0; c < classes; ++c) {
    if (static_cast<int64_t>(by_class[static_cast<size_t>(c)].size()) < train_per + test_per) {
      throw std::invalid_argument("subset_split: class " + std::to_string(c) + " has only " +
                                  std::to_string(by_class[static_cast<size_t>(c)].size()) +
                                  " samples, need " + std::to_string(train_per + test_per));
    }
  }
  std::vector<int64_t> train_idx, test_idx;
  for (int c = 0; c < classes; ++c) {
    const auto& pool = by_class[static_cast<size_t>(c)];
    train_idx.insert(train_idx.end(), pool.begin(), pool.begin() + train_per);
    test_idx.insert(test_idx.end(), pool.begin() + train_per, pool.begin() + train_per + test_per);
  }
  return {gather(ds, train_idx, ds.name + ":train"), gather(ds, test_idx, ds.name + ":test")};
}

Dataset synthetic_blobs(int num_classes, int64_t n_per_class, int64_t image_size, uint64_t seed) {
  if (num_classes < 1 || n_per_class < 1 || image_size < 1) {
    throw std::invalid_argument("synthetic_blobs: sizes must be >= 1");
  }
  Rng rng(seed);
  int64_t n = static_cast<int64_t>(num_classes) * n_per_class;
  Dataset ds;
  ds.name = "blobs";
  ds.num_classes = num_classes;
  ds.images = Tensor({n, image_size, image_size});
  ds.labels.resize(static_cast<size_t>(n));

  double center = (static_cast<double>(image_size) - 1.0) / 2.0;
  double ring = static_cast<double>(image_size) * 0.30;
  double sigma = static_cast<double>(image_size) / 8.0;
  double jitter = static_cast<double>(image_size) / 18.0;

  int64_t plane = image_size * image_size;
  for (int64_t s = 0; s < n; ++s) {
    int c = static_cast<int>(s % num_classes);
    ds.labels[static_cast<size_t>(s)] = c;
    double angle = 2.0 * 3.14159265358979323846 * static_cast<double>(c) /
                   static_cast<double>(num_classes);
    double cy = center + ring * std::sin(angle) + rng.uniform(-jitter, jitter);
    double cx = center + ring * std::cos(angle) + rng.uniform(-jitter, jitter);
    double* img = ds.images.data() + s * plane;
    for (int64_t i = 0; i < image_size; ++i) {
      for (int64_t j = 0; j < image_size; ++j) {
        double dy = (static_cast<double>(i) - cy) / sigma;
        double dx = (static_cast<double>(j) - cx) / sigma;
        double v = std::exp(-0.5 * (dy * dy + dx * dx)) + 0.05 * rng.gaussian();
        img[i * image_size + j] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return ds;
}

}  // namespace ulu
