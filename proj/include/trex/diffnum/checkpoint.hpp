#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "trex/diffnum/tensor.hpp"

namespace trex::diffnum {

enum class DType { F32, F64 };

/// Named tensors in a single file: a plain-text header followed by raw
/// little-endian payloads. Layout (see docs/formats.md):
///
///   TREXCKPT 1\n
///   tensors <count>\n
///   <name> <f32|f64> <d0,d1,...> <offset> <nbytes>\n   (one per tensor)
///   end\n
///   <payload bytes; offsets are relative to the first payload byte>
class Checkpoint {
 public:
  struct Entry {
    std::string name;
    DType dtype = DType::F32;
    Shape shape;
    std::vector<std::byte> bytes;
  };

  void add(const std::string& name, const Tensor<float>& t);
  void add(const std::string& name, const Tensor<double>& t);

  bool contains(const std::string& name) const;
  /// Converts to the requested precision when the stored dtype differs.
  template <typename T>
  Tensor<T> get(const std::string& name) const;

  const std::vector<Entry>& entries() const noexcept { return entries_; }

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  const Entry& find(const std::string& name) const;
  std::vector<Entry> entries_;
};

}  // namespace trex::diffnum
