#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "modviz/common/errors.hpp"

namespace modviz {

static_assert(std::endian::native == std::endian::little,
              "binary containers are written little-endian; big-endian hosts need byte swapping");

void write_file_bytes(const std::string& path, const std::vector<char>& bytes);
std::vector<char> read_file_bytes(const std::string& path);

/// Append-only little-endian byte buffer.
class ByteWriter {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put_array(const T* data, std::size_t n) {
    const auto* p = reinterpret_cast<const char*>(data);
    bytes_.insert(bytes_.end(), p, p + n * sizeof(T));
  }

  const std::vector<char>& bytes() const { return bytes_; }
  void write_file(const std::string& path) const { write_file_bytes(path, bytes_); }

 private:
  std::vector<char> bytes_;
};

/// Bounds-checked cursor over a byte buffer; running past the end throws
/// FormatError(TruncatedPayload).
class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}
  static ByteReader from_file(const std::string& path) { return ByteReader(read_file_bytes(path)); }

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
    requires std::is_arithmetic_v<T>
  void get_array(T* out, std::size_t n) {
    need(n * sizeof(T));
    std::memcpy(out, bytes_.data() + pos_, n * sizeof(T));
    pos_ += n * sizeof(T);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw FormatError(FormatError::Kind::TruncatedPayload, "truncated payload");
  }

  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace modviz
