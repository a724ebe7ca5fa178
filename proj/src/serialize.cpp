#include "ulu/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ulu {

namespace {

constexpr char kMagic[4] = {'U', 'L', 'U', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

void put_f64(std::ostream& os, double d) {
  uint64_t v = std::bit_cast<uint64_t>(d);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw GraphError("truncated parameter file");
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw GraphError("truncated parameter file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

void save_params(const ParamStore& store, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw GraphError("cannot open '" + path + "' for writing");
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<uint32_t>(store.size()));
  for (size_t i = 0; i < store.size(); ++i) {
    const std::string& name = store.name(i);
    const Tensor& t = store.value(i);
    put_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<uint32_t>(t.rank()));
    for (int64_t d : t.shape()) put_u32(os, static_cast<uint32_t>(d));
    for (int64_t e = 0; e < t.numel(); ++e) put_f64(os, t[e]);
  }
  put_u32(os, static_cast<uint32_t>(store.adaptive.size()));
  for (const AdaptiveParams& p : store.adaptive) {
    put_f64(os, p.beta1);
    put_f64(os, p.beta2);
  }
  if (!os) throw GraphError("write failed for '" + path + "'");
}

ParamStore load_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw GraphError("cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw GraphError("'" + path + "' is not a ULUK parameter file");
  }
  uint32_t version = get_u32(is);
  if (version != kVersion) {
    throw GraphError("unsupported parameter file version " + std::to_string(version));
  }
  ParamStore store;
  uint32_t count = get_u32(is);
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = get_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw GraphError("truncated parameter file");
    uint32_t rank = get_u32(is);
    std::vector<int64_t> shape(rank);
    for (uint32_t r = 0; r < rank; ++r) shape[r] = get_u32(is);
    Tensor t(shape);
    for (int64_t e = 0; e < t.numel(); ++e) t[e] = get_f64(is);
    store.add(name, std::move(t));
  }
  uint32_t n_adaptive = get_u32(is);
  for (uint32_t i = 0; i < n_adaptive; ++i) {
    AdaptiveParams p;
    p.beta1 = get_f64(is);
    p.beta2 = get_f64(is);
    store.adaptive.push_back(p);
  }
  return store;
}

}  // namespace ulu
