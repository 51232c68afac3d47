#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cws/errors.hpp"
#include "cws/tensor.hpp"

namespace cws {

// Versioned binary model container, shared by every trained component.
// Layout, all integers little-endian:
//
//   magic "CWSM"
//   u32 format version
//   string component tag               ("bilm" | "sgns" | "tagger")
//   u32 meta count, then (key, value) string pairs
//   u32 tensor count, then per tensor: string name, u32 ndim, u32 dims[],
//       u64 element count
//   payloads: element count x f32 per tensor, manifest order
//   u32 vocab size, then one string per id in id order
//
// where string = u32 byte length + UTF-8 bytes. Readers reject unknown
// versions and manifests whose element counts disagree with their shapes.
inline constexpr uint32_t kModelFormatVersion = 1;
inline constexpr char kModelMagic[4] = {'C', 'W', 'S', 'M'};

struct ModelFile {
  uint32_t version = kModelFormatVersion;
  std::string component;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<Tensor> tensors;  // values round-trip through f32
  std::vector<std::string> vocab;

  const Tensor* find(std::string_view name) const;
  const Tensor& require(std::string_view name) const;
  bool has_meta(std::string_view key) const;
  std::string meta_value(std::string_view key) const;
};

void write_model(std::ostream& out, const ModelFile& mf);
ModelFile read_model(std::istream& in);

void save_model(const std::string& path, const ModelFile& mf);
ModelFile load_model(const std::string& path);
// Loads and reports the fingerprint of the file's bytes in one pass.
ModelFile load_model(const std::string& path, std::string* fingerprint);

uint64_t fnv1a64(const void* data, size_t n);
// 16 lowercase hex digits of fnv1a64 over the whole file.
std::string file_fingerprint(const std::string& path);

}  // namespace cws
