#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ulu/tensor.hpp"

namespace ulu {

// Immutable after load; shared freely across threads.
struct Dataset {
  Tensor images;            // [N, H, W], values in [0, 1]
  std::vector<int> labels;  // class ids in [0, num_classes)
  std::string name;
  int num_classes = 10;

  int64_t size() const { return images.rank() > 0 ? images.dim(0) : 0; }
};

struct IdxError : std::runtime_error {
  enum class Kind { BadMagic, Truncated, CountMismatch };
  Kind kind;
  IdxError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// Reads the classic IDX pair (big-endian headers, magic 0x00000803 for
// images and 0x00000801 for labels). Pixel bytes are scaled by 1/255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Deterministic stratified split: per class, floor(train_n / classes)
// samples go to train and floor(test_n / classes) to test, drawn from a
// seeded shuffle; remainders are dropped, splits are disjoint.
std::pair<Dataset, Dataset> subset_split(const Dataset& ds, int64_t train_n, int64_t test_n,
                                         uint64_t seed);

// Offline stand-in for MNIST: one Gaussian intensity blob per class at a
// class-specific location, with per-sample jitter and pixel noise, clipped
// to [0,1]. Linearly separable enough for an MLP to clear 95% quickly.
Dataset synthetic_blobs(int num_classes, int64_t n_per_class, int64_t image_size, uint64_t seed);

}  // namespace ulu
