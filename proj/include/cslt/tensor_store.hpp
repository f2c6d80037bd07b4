#pragma once

#include <iomanip>
#include <map>

#include "cslt/types.hpp"

namespace cslt {

// Flat named-tensor container for checkpoints. Entries are written sorted by
// name so identical contents produce identical bytes.
//
// Layout: "CSLTTENS" magic, u32 count, then per tensor:
//   u32 name_len, name bytes, u8 dtype (4 = f32, 8 = f64),
//   u32 rows, u32 cols, row-major little-endian payload.
template <typename S>
class TensorStore {
 public:
  void put(const std::string& name, const Mat<S>& m) { tensors_[name] = m; }

  const Mat<S>& get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw DataError("tensor missing from store: " + name);
    return it->second;
  }

  bool has(const std::string& name) const { return tensors_.count(name) > 0; }
  size_t size() const { return tensors_.size(); }
  const std::map<std::string, Mat<S>>& all() const { return tensors_; }

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write tensor store: " + path.string());
    out.write("CSLTTENS", 8);
    uint32_t count = static_cast<uint32_t>(tensors_.size());
    out.write(reinterpret_cast<const char*>(&count), 4);
    for (const auto& [name, m] : tensors_) {
      uint32_t len = static_cast<uint32_t>(name.size());
      out.write(reinterpret_cast<const char*>(&len), 4);
      out.write(name.data(), len);
      uint8_t dtype = sizeof(S);
      out.write(reinterpret_cast<const char*>(&dtype), 1);
      uint32_t rows = static_cast<uint32_t>(m.rows());
      uint32_t cols = static_cast<uint32_t>(m.cols());
      out.write(reinterpret_cast<const char*>(&rows), 4);
      out.write(reinterpret_cast<const char*>(&cols), 4);
      out.write(reinterpret_cast<const char*>(m.data()),
                std::streamsize(rows) * cols * sizeof(S));
    }
  }

  static TensorStore load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open tensor store: " + path.string());
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, "CSLTTENS", 8) != 0)
      throw DataError("tensor store magic mismatch: " + path.string());
    uint32_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 4);
    TensorStore store;
    for (uint32_t i = 0; i < count; ++i) {
      uint32_t len = 0;
      in.read(reinterpret_cast<char*>(&len), 4);
      std::string name(len, '\0');
      in.read(name.data(), len);
      uint8_t dtype = 0;
      in.read(reinterpret_cast<char*>(&dtype), 1);
      if (dtype != sizeof(S))
        throw DataError("tensor dtype mismatch for " + name + " in " + path.string());
      uint32_t rows = 0, cols = 0;
      in.read(reinterpret_cast<char*>(&rows), 4);
      in.read(reinterpret_cast<char*>(&cols), 4);
      Mat<S> m(rows, cols);
      if (!in.read(reinterpret_cast<char*>(m.data()), std::streamsize(rows) * cols * sizeof(S)))
        throw DataError("tensor store truncated at " + name + " in " + path.string());
      store.tensors_[name] = std::move(m);
    }
    return store;
  }

 private:
  std::map<std::string, Mat<S>> tensors_;
};

template <typename S>
std::string tensor_digest(const Mat<S>& m) {
  uint64_t h = fnv1a64(m.data(), size_t(m.size()) * sizeof(S));
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

}  // namespace cslt
