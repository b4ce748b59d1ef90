#pragma once

// Little-endian cursor helpers shared by the binary containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "binseg/errors.hpp"
#include "binseg/tensor_io.hpp"

namespace binseg::detail {

class ByteWriter {
 public:
  explicit ByteWriter(std::size_t reserve = 0) { out_.reserve(reserve); }

  void tag(std::string_view magic) { out_.insert(out_.end(), magic.begin(), magic.end()); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  Bytes take() && { return std::move(out_); }

 private:
  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(ByteView bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  bool tag_matches(std::string_view magic) const {
    return remaining() >= magic.size() &&
           std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) == 0;
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }

  void expect_end() const {
    if (pos_ != bytes_.size()) {
      throw FormatError(ErrorCode::trailing_bytes, pos_,
                        std::to_string(bytes_.size() - pos_) + " trailing bytes after payload");
    }
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw FormatError(ErrorCode::truncated, pos_, "unexpected end of data");
    }
  }

  ByteView bytes_;
  std::size_t pos_ = 0;
};

}  // namespace binseg::detail
