#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace skillguard {

/// Incremental SHA-256. Self-contained so the library has no runtime
/// dependency on a crypto library; test code checks it against an
/// independent implementation and the published test vectors.
class Sha256 {
 public:
  Sha256();

  void update(const void* data, std::size_t len);
  void update(std::string_view data) { update(data.data(), data.size()); }

  /// Finalizes and returns the 32-byte digest. The object must not be
  /// updated again afterwards.
  std::array<std::uint8_t, 32> finish();

  static std::array<std::uint8_t, 32> digest(std::string_view data);

 private:
  void compress(const std::uint8_t* block);

  std::array<std::uint32_t, 8> state_;
  std::array<std::uint8_t, 64> buffer_;
  std::uint64_t total_len_ = 0;
  std::size_t buffer_len_ = 0;
};

std::string to_hex(const std::uint8_t* data, std::size_t len);
std::string to_hex(const std::array<std::uint8_t, 32>& digest);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view data);

}  // namespace skillguard
