#pragma once

// Internal little-endian byte readers/writers shared by the TVB1 and TVBM1
// container code. Not installed.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tvb/common.hpp"
#include "tvb/vecstore.hpp"

namespace tvb::detail {

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string origin)
      : bytes_(bytes), origin_(std::move(origin)) {}

  std::uint64_t offset() const { return offset_; }
  const std::string& origin() const { return origin_; }

  void require(std::size_t n, const char* what) {
    if (offset_ + n > bytes_.size()) {
      throw FormatError(origin_ + ": truncated file while reading " + what, offset_);
    }
  }

  std::uint8_t u8(const char* what) {
    require(1, what);
    return bytes_[offset_++];
  }

  std::uint32_t u32(const char* what) {
    require(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[offset_ + i]) << (8 * i);
    offset_ += 4;
    return v;
  }

  double scalar(FloatWidth width, const char* what) {
    if (width == FloatWidth::f32) {
      require(4, what);
      std::uint32_t v = 0;
      for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[offset_ + i]) << (8 * i);
      offset_ += 4;
      return static_cast<double>(std::bit_cast<float>(v));
    }
    require(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes_[offset_ + i]) << (8 * i);
    offset_ += 8;
    return std::bit_cast<double>(v);
  }

  std::string bytes(std::size_t n, const char* what) {
    require(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data()) + offset_, n);
    offset_ += n;
    return s;
  }

  bool exhausted() const { return offset_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::string origin_;
  std::uint64_t offset_ = 0;
};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(std::uint8_t(v >> (8 * i)));
  }

  void scalar(double x, FloatWidth width) {
    if (width == FloatWidth::f32) {
      std::uint32_t v = std::bit_cast<std::uint32_t>(static_cast<float>(x));
      for (int i = 0; i < 4; ++i) out_.push_back(std::uint8_t(v >> (8 * i)));
    } else {
      std::uint64_t v = std::bit_cast<std::uint64_t>(x);
      for (int i = 0; i < 8; ++i) out_.push_back(std::uint8_t(v >> (8 * i)));
    }
  }

  void raw(const std::string& s) { out_.insert(out_.end(), s.begin(), s.end()); }

  const std::vector<std::uint8_t>& bytes() const { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace tvb::detail
