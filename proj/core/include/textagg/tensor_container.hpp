#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace textagg {

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<float> data;  // row-major

  std::uint64_t element_count() const;
};

// "AGGT" container of named f32 tensors.
//   magic "AGGT", u32 version = 1, u32 tensor_count,
//   per tensor: u32 name_len, name bytes (UTF-8), u32 rank, u64 dims[rank],
//               f32 data[prod(dims)]
// All integers and floats little-endian.
class TensorContainer {
 public:
  static constexpr std::uint32_t kVersion = 1;

  // Throws DuplicateNameError or SizeMismatchError.
  void add(NamedTensor tensor);

  const NamedTensor* find(const std::string& name) const;
  // Throws InvalidArgument naming the missing tensor.
  const NamedTensor& at(const std::string& name) const;
  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  std::size_t size() const { return tensors_.size(); }

  std::vector<std::uint8_t> serialize() const;
  static TensorContainer deserialize(std::span<const std::uint8_t> bytes);

  void write(const std::filesystem::path& path) const;
  static TensorContainer read(const std::filesystem::path& path);

 private:
  std::vector<NamedTensor> tensors_;
};

}  // namespace textagg
