#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace swarmbus::crypto {

// Byte strings are carried as std::string throughout.

std::string sha1(std::string_view data);
std::string sha256(std::string_view data);
std::string hmac_sha1(std::string_view key, std::string_view data);
std::string hmac_sha256(std::string_view key, std::string_view data);
std::string pbkdf2_hmac_sha1(std::string_view password, std::string_view salt,
                             int iterations, size_t key_len);

/// Cryptographically strong random bytes.
std::string random_bytes(size_t count);

/// Random printable nonce drawn from the base64 alphabet.
std::string random_nonce(size_t chars = 24);

std::string to_hex(std::string_view bytes);
std::string from_hex(std::string_view hex);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

/// Constant-time comparison for secrets.
bool secure_equal(std::string_view a, std::string_view b);

} // namespace swarmbus::crypto
