#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "nlos/tensor.hpp"

namespace nlos {

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

/// Named-tensor file:
///   "NTC1", u16 version, u32 count, then per entry
///   u16 name length, name bytes, u8 dtype, u8 ndim, u32 dims[ndim], payload
/// all little-endian, payload row-major.
struct TensorContainer {
  struct Entry {
    Tensor value;
    DType dtype = DType::F64;
  };
  std::map<std::string, Entry> entries;

  void put(const std::string& name, const Tensor& t, DType dtype = DType::F64);
  bool contains(const std::string& name) const { return entries.count(name) != 0; }
  const Tensor& get(const std::string& name) const;

  std::string serialize() const;
  static TensorContainer deserialize(const std::string& bytes);
  void save(const std::filesystem::path& path) const;
  static TensorContainer load(const std::filesystem::path& path);
};

constexpr std::uint16_t kContainerVersion = 1;

}  // namespace nlos
