#include "textagg/tensor_container.hpp"

#include <fstream>
#include <iterator>

#include "textagg/binary_io.hpp"

namespace textagg {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                   text.size()));
}

std::uint64_t NamedTensor::element_count() const {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) n *= d;
  return n;
}

void TensorContainer::add(NamedTensor tensor) {
  if (find(tensor.name) != nullptr) {
    throw DuplicateNameError("tensor container: duplicate tensor name \"" +
                             tensor.name + "\"");
  }
  if (tensor.element_count() != tensor.data.size()) {
    throw SizeMismatchError("tensor \"" + tensor.name + "\": dims declare " +
                            std::to_string(tensor.element_count()) +
                            " elements but data has " +
                            std::to_string(tensor.data.size()));
  }
  tensors_.push_back(std::move(tensor));
}

const NamedTensor* TensorContainer::find(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const NamedTensor& TensorContainer::at(const std::string& name) const {
  if (const auto* t = find(name)) return *t;
  throw InvalidArgument("tensor container: missing tensor \"" + name + "\"");
}

std::vector<std::uint8_t> TensorContainer::serialize() const {
  ByteWriter w;
  w.magic("AGGT");
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(tensors_.size()));
  for (const auto& t : tensors_) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.dims.size()));
    for (std::uint64_t d : t.dims) w.u64(d);
    w.f32s(t.data);
  }
  return w.take();
}

TensorContainer TensorContainer::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "tensor container");
  r.expect_magic("AGGT");
  r.expect_version(kVersion);
  const std::uint32_t count = r.u32();
  TensorContainer out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.str();
    const std::uint32_t rank = r.u32();
    r.need(std::uint64_t{rank} * 8, "dims");
    t.dims.resize(rank);
    for (auto& d : t.dims) d = r.u64();
    const std::uint64_t n = t.element_count();
    const std::uint64_t left = r.remaining();
    if (i + 1 == count && left < n * 4 && left % 4 == 0) {
      throw SizeMismatchError("tensor container: tensor \"" + t.name + "\" declares " +
                              std::to_string(n) + " values, file holds " +
                              std::to_string(left / 4));
    }
    r.need(n * 4, "tensor data");
    t.data.resize(n);
    r.f32s(t.data);
    out.add(std::move(t));
  }
  r.expect_end();
  return out;
}

void TensorContainer::write(const std::filesystem::path& path) const {
  write_file_bytes(path, serialize());
}

TensorContainer TensorContainer::read(const std::filesystem::path& path) {
  return deserialize(read_file_bytes(path));
}

}  // namespace textagg
