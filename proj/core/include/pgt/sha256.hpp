#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace pgt {

// Minimal SHA-256 (FIPS 180-4). Used for prompt fingerprints, config hashes
// and artifact hashes; verified against the standard test vectors.
class Sha256 {
 public:
  Sha256();
  void update(const void* data, size_t len);
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::array<uint8_t, 32> digest();  // finalizes; object must not be reused

  static std::string hex(std::string_view data);
  static std::string hex_of_file(const std::string& path);

 private:
  void process_block(const uint8_t* block);

  std::array<uint32_t, 8> state_;
  std::array<uint8_t, 64> buffer_;
  uint64_t bit_len_ = 0;
  size_t buffer_len_ = 0;
};

}  // namespace pgt
