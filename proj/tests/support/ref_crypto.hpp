#pragma once

// Reference crypto used only by tests: straight transcriptions of FIPS
// 180-4 (SHA-1, SHA-256), RFC 2104 (HMAC) and RFC 2898 (PBKDF2), plus
// hex/base64 helpers. Deliberately shares no code with the library so the
// two can check each other.

#include <cstdint>
#include <string>

namespace refcrypto {

std::string sha1(const std::string& data);   // 20 raw bytes
std::string sha256(const std::string& data); // 32 raw bytes

std::string hmac_sha1(const std::string& key, const std::string& data);
std::string hmac_sha256(const std::string& key, const std::string& data);

std::string pbkdf2_hmac_sha1(const std::string& password, const std::string& salt,
                             std::uint32_t iterations, std::size_t dklen);

std::string to_hex(const std::string& raw);
std::string from_hex(const std::string& hex);
std::string base64_encode(const std::string& raw);
std::string base64_decode(const std::string& encoded);

} // namespace refcrypto
