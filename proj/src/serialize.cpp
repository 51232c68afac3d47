#include "cws/serialize.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace cws {

namespace {

void put_bytes(std::ostream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  put_bytes(out, b, 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  put_u32(out, static_cast<uint32_t>(v & 0xffffffffu));
  put_u32(out, static_cast<uint32_t>(v >> 32));
}

void put_f32(std::ostream& out, float v) {
  static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_string(std::ostream& out, const std::string& s) {
  if (s.size() > std::numeric_limits<uint32_t>::max())
    throw ModelError("string too long for model file");
  put_u32(out, static_cast<uint32_t>(s.size()));
  put_bytes(out, s.data(), s.size());
}

void get_bytes(std::istream& in, void* p, size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    throw ModelError("model file truncated");
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  get_bytes(in, b, 4);
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
         (uint32_t(b[3]) << 24);
}

uint64_t get_u64(std::istream& in) {
  uint64_t lo = get_u32(in);
  uint64_t hi = get_u32(in);
  return lo | (hi << 32);
}

float get_f32(std::istream& in) {
  uint32_t bits = get_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

std::string get_string(std::istream& in) {
  uint32_t n = get_u32(in);
  if (n > (1u << 30)) throw ModelError("unreasonable string length in model file");
  std::string s(n, '\0');
  if (n) get_bytes(in, s.data(), n);
  return s;
}

}  // namespace

const Tensor* ModelFile::find(std::string_view name) const {
  for (const Tensor& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

const Tensor& ModelFile::require(std::string_view name) const {
  const Tensor* t = find(name);
  if (!t) throw ModelError("model file missing tensor '" + std::string(name) + "'");
  return *t;
}

bool ModelFile::has_meta(std::string_view key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return true;
  return false;
}

std::string ModelFile::meta_value(std::string_view key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  throw ModelError("model file missing meta key '" + std::string(key) + "'");
}

void write_model(std::ostream& out, const ModelFile& mf) {
  put_bytes(out, kModelMagic, 4);
  put_u32(out, mf.version);
  put_string(out, mf.component);

  put_u32(out, static_cast<uint32_t>(mf.meta.size()));
  for (const auto& [k, v] : mf.meta) {
    put_string(out, k);
    put_string(out, v);
  }

  put_u32(out, static_cast<uint32_t>(mf.tensors.size()));
  for (const Tensor& t : mf.tensors) {
    put_string(out, t.name);
    put_u32(out, static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) {
      if (d < 0) throw ModelError("negative dimension in tensor '" + t.name + "'");
      put_u32(out, static_cast<uint32_t>(d));
    }
    put_u64(out, static_cast<uint64_t>(t.numel()));
  }
  for (const Tensor& t : mf.tensors)
    for (double x : t.v) put_f32(out, static_cast<float>(x));

  put_u32(out, static_cast<uint32_t>(mf.vocab.size()));
  for (const std::string& e : mf.vocab) put_string(out, e);

  if (!out) throw ModelError("write failed while saving model");
}

ModelFile read_model(std::istream& in) {
  char magic[4];
  get_bytes(in, magic, 4);
  if (std::memcmp(magic, kModelMagic, 4) != 0)
    throw ModelError("not a model file (bad magic)");

  ModelFile mf;
  mf.version = get_u32(in);
  if (mf.version != kModelFormatVersion)
    throw ModelError("unsupported model format version " + std::to_string(mf.version));
  mf.component = get_string(in);

  uint32_t nmeta = get_u32(in);
  mf.meta.reserve(nmeta);
  for (uint32_t i = 0; i < nmeta; ++i) {
    std::string k = get_string(in);
    std::string v = get_string(in);
    mf.meta.emplace_back(std::move(k), std::move(v));
  }

  uint32_t ntensors = get_u32(in);
  std::vector<uint64_t> counts;
  counts.reserve(ntensors);
  mf.tensors.reserve(ntensors);
  for (uint32_t i = 0; i < ntensors; ++i) {
    std::string name = get_string(in);
    uint32_t ndim = get_u32(in);
    if (ndim > 8) throw ModelError("tensor '" + name + "' has too many dimensions");
    std::vector<int> shape(ndim);
    for (uint32_t d = 0; d < ndim; ++d) {
      uint32_t dim = get_u32(in);
      if (dim > static_cast<uint32_t>(std::numeric_limits<int>::max()))
        throw ModelError("dimension overflow in tensor '" + name + "'");
      shape[d] = static_cast<int>(dim);
    }
    uint64_t count = get_u64(in);
    if (count != static_cast<uint64_t>(shape_numel(shape)))
      throw ModelError("element count mismatch in tensor '" + name + "'");
    counts.push_back(count);
    mf.tensors.emplace_back(std::move(name), std::move(shape));
  }
  for (uint32_t i = 0; i < ntensors; ++i) {
    Tensor& t = mf.tensors[i];
    for (uint64_t j = 0; j < counts[i]; ++j) t.v[j] = get_f32(in);
  }

  uint32_t nvocab = get_u32(in);
  mf.vocab.reserve(nvocab);
  for (uint32_t i = 0; i < nvocab; ++i) mf.vocab.push_back(get_string(in));

  return mf;
}

void save_model(const std::string& path, const ModelFile& mf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ModelError("cannot open '" + path + "' for writing");
  write_model(out, mf);
  out.flush();
  if (!out) throw ModelError("write failed while saving '" + path + "'");
}

ModelFile load_model(const std::string& path) {
  return load_model(path, nullptr);
}

ModelFile load_model(const std::string& path, std::string* fingerprint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open model file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  std::string bytes = std::move(buf).str();
  if (fingerprint) {
    uint64_t h = fnv1a64(bytes.data(), bytes.size());
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    *fingerprint = hex;
  }
  std::istringstream is(bytes);
  return read_model(is);
}

uint64_t fnv1a64(const void* data, size_t n) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = 14695981039346656037ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::string file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open '" + path + "' for fingerprinting");
  std::stringstream buf;
  buf << in.rdbuf();
  std::string bytes = std::move(buf).str();
  uint64_t h = fnv1a64(bytes.data(), bytes.size());
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

}  // namespace cws
