#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ulu/data.hpp"
#include "ulu/tensor.hpp"

namespace testutil {

// Independent IDX writer (big-endian headers, raw bytes). Deliberately
// not the library's reader inverted: headers are assembled by hand here.
inline void write_be_u32(std::ostream& os, uint32_t v) {
  char b[4] = {static_cast<char>((v >> 24) & 0xff), static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
  os.write(b, 4);
}

inline void write_idx_images(const std::string& path, const std::vector<unsigned char>& pixels,
                             uint32_t n, uint32_t h, uint32_t w, uint32_t magic = 0x00000803) {
  std::ofstream os(path, std::ios::binary);
  write_be_u32(os, magic);
  write_be_u32(os, n);
  write_be_u32(os, h);
  write_be_u32(os, w);
  os.write(reinterpret_cast<const char*>(pixels.data()),
           static_cast<std::streamsize>(pixels.size()));
}

inline void write_idx_labels(const std::string& path, const std::vector<unsigned char>& labels,
                             uint32_t magic = 0x00000801) {
  std::ofstream os(path, std::ios::binary);
  write_be_u32(os, magic);
  write_be_u32(os, static_cast<uint32_t>(labels.size()));
  os.write(reinterpret_cast<const char*>(labels.data()),
           static_cast<std::streamsize>(labels.size()));
}

// Quantizes a [0,1] dataset back to bytes; exact for data that came from
// bytes in the first place.
inline std::vector<unsigned char> to_bytes(const ulu::Tensor& images) {
  std::vector<unsigned char> out(static_cast<size_t>(images.numel()));
  for (int64_t i = 0; i < images.numel(); ++i) {
    out[static_cast<size_t>(i)] = static_cast<unsigned char>(images[i] * 255.0 + 0.5);
  }
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("ulukit_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() { std::filesystem::remove_all(dir_); }
  std::filesystem::path path() const { return dir_; }
  std::string str(const std::string& child) const { return (dir_ / child).string(); }

 private:
  std::filesystem::path dir_;
};

inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 1469598103934665603ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline uint64_t hash_tensor(const ulu::Tensor& t, uint64_t h = 1469598103934665603ULL) {
  return fnv1a(t.data(), static_cast<size_t>(t.numel()) * sizeof(double), h);
}

inline std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace testutil
