#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace rtmc {

// Incremental MD5 (RFC 1321). Only used for short content fingerprints, never
// for anything security related.
class Md5 {
 public:
  using Digest = std::array<std::uint8_t, 16>;

  Md5();

  void update(std::span<const std::uint8_t> bytes);
  void update(std::string_view text);
  Digest finish();

  static Digest digest(std::string_view text);
  static std::string hex(const Digest& d);

 private:
  void transform(const std::uint8_t* block);

  std::array<std::uint32_t, 4> state_;
  std::array<std::uint8_t, 64> buffer_{};
  std::uint64_t length_ = 0;
};

}  // namespace rtmc
