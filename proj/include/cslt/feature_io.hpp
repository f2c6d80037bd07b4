#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "cslt/types.hpp"

namespace cslt {

// Binary feature container, bit-exact:
//   8-byte magic "CSLTFEAT", little-endian u32 F, u32 D,
//   then F*D little-endian 32-bit floats, row-major.
inline constexpr char kFeatureMagic[8] = {'C', 'S', 'L', 'T', 'F', 'E', 'A', 'T'};

static_assert(std::endian::native == std::endian::little,
              "feature container I/O assumes a little-endian host");

inline VisualFeatureSequence read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file: " + path.string());

  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kFeatureMagic, 8) != 0)
    throw DataError("feature magic mismatch: " + path.string());

  uint32_t f = 0, d = 0;
  if (!in.read(reinterpret_cast<char*>(&f), 4) || !in.read(reinterpret_cast<char*>(&d), 4))
    throw DataError("feature header truncated: " + path.string());
  if (f == 0 || d == 0) throw DataError("feature header has zero dimension: " + path.string());

  VisualFeatureSequence seq;
  seq.features.resize(f, d);
  const std::streamsize payload = std::streamsize(f) * d * 4;
  if (!in.read(reinterpret_cast<char*>(seq.features.data()), payload))
    throw DataError("feature payload truncated: " + path.string());
  if (!seq.features.allFinite())
    throw DataError("non-finite feature entry: " + path.string());
  return seq;
}

inline void write_feature_file(const std::filesystem::path& path, const MatF& features) {
  if (features.rows() < 1 || features.cols() < 1)
    throw DataError("refusing to write empty feature matrix");
  if (!features.allFinite()) throw DataError("refusing to write non-finite features");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature file: " + path.string());
  out.write(kFeatureMagic, 8);
  const uint32_t f = static_cast<uint32_t>(features.rows());
  const uint32_t d = static_cast<uint32_t>(features.cols());
  out.write(reinterpret_cast<const char*>(&f), 4);
  out.write(reinterpret_cast<const char*>(&d), 4);
  out.write(reinterpret_cast<const char*>(features.data()), std::streamsize(f) * d * 4);
}

}  // namespace cslt
