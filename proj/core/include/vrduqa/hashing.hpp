#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace vrduqa {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_hex(std::span<const std::uint8_t> data);

/// Standard base64 with padding, no line breaks.
std::string base64_encode(std::span<const std::uint8_t> data);
std::string base64_encode(std::string_view data);

/// Throws IngestionError on malformed input.
std::string base64_decode(std::string_view encoded);

/// 64-bit FNV-1a; used only for seed derivation.
std::uint64_t fnv1a64(std::string_view data);

}  // namespace vrduqa
