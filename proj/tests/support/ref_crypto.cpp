#include "ref_crypto.hpp"

#include <array>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace refcrypto {
namespace {

std::uint32_t rotl(std::uint32_t x, int n) { return (x << n) | (x >> (32 - n)); }
std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

std::string pad_message(const std::string& data) {
    // Identical padding for SHA-1 and SHA-256: 0x80, zeros, 64-bit length.
    std::string m = data;
    std::uint64_t bitlen = static_cast<std::uint64_t>(data.size()) * 8;
    m.push_back('\x80');
    while (m.size() % 64 != 56) m.push_back('\0');
    for (int i = 7; i >= 0; --i) m.push_back(static_cast<char>((bitlen >> (8 * i)) & 0xff));
    return m;
}

std::uint32_t load_be32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

std::string store_be32(const std::uint32_t* words, std::size_t count) {
    std::string out;
    out.reserve(count * 4);
    for (std::size_t i = 0; i < count; ++i)
        for (int b = 3; b >= 0; --b) out.push_back(static_cast<char>((words[i] >> (8 * b)) & 0xff));
    return out;
}

} // namespace

std::string sha1(const std::string& data) {
    std::uint32_t h[5] = {0x67452301, 0xEFCDAB89, 0x98BADCFE, 0x10325476, 0xC3D2E1F0};
    std::string m = pad_message(data);
    for (std::size_t off = 0; off < m.size(); off += 64) {
        const unsigned char* block = reinterpret_cast<const unsigned char*>(m.data() + off);
        std::uint32_t w[80];
        for (int t = 0; t < 16; ++t) w[t] = load_be32(block + 4 * t);
        for (int t = 16; t < 80; ++t) w[t] = rotl(w[t - 3] ^ w[t - 8] ^ w[t - 14] ^ w[t - 16], 1);
        std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
        for (int t = 0; t < 80; ++t) {
            std::uint32_t f, k;
            if (t < 20) {
                f = (b & c) | ((~b) & d);
                k = 0x5A827999;
            } else if (t < 40) {
                f = b ^ c ^ d;
                k = 0x6ED9EBA1;
            } else if (t < 60) {
                f = (b & c) | (b & d) | (c & d);
                k = 0x8F1BBCDC;
            } else {
                f = b ^ c ^ d;
                k = 0xCA62C1D6;
            }
            std::uint32_t tmp = rotl(a, 5) + f + e + k + w[t];
            e = d;
            d = c;
            c = rotl(b, 30);
            b = a;
            a = tmp;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
    }
    return store_be32(h, 5);
}

std::string sha256(const std::string& data) {
    static const std::uint32_t k[64] = {
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
        0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
        0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
        0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
        0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
        0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
        0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
        0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
        0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
        0xc67178f2};
    std::uint32_t h[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                          0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
    std::string m = pad_message(data);
    for (std::size_t off = 0; off < m.size(); off += 64) {
        const unsigned char* block = reinterpret_cast<const unsigned char*>(m.data() + off);
        std::uint32_t w[64];
        for (int t = 0; t < 16; ++t) w[t] = load_be32(block + 4 * t);
        for (int t = 16; t < 64; ++t) {
            std::uint32_t s0 = rotr(w[t - 15], 7) ^ rotr(w[t - 15], 18) ^ (w[t - 15] >> 3);
            std::uint32_t s1 = rotr(w[t - 2], 17) ^ rotr(w[t - 2], 19) ^ (w[t - 2] >> 10);
            w[t] = w[t - 16] + s0 + w[t - 7] + s1;
        }
        std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3];
        std::uint32_t e = h[4], f = h[5], g = h[6], hh = h[7];
        for (int t = 0; t < 64; ++t) {
            std::uint32_t S1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            std::uint32_t ch = (e & f) ^ ((~e) & g);
            std::uint32_t t1 = hh + S1 + ch + k[t] + w[t];
            std::uint32_t S0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
            std::uint32_t t2 = S0 + maj;
            hh = g;
            g = f;
            f = e;
            e = d + t1;
            d = c;
            c = b;
            b = a;
            a = t1 + t2;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
        h[5] += f;
        h[6] += g;
        h[7] += hh;
    }
    return store_be32(h, 8);
}

namespace {

template <typename Hash>
std::string hmac(Hash hash, std::size_t block_size, const std::string& key,
                 const std::string& data) {
    std::string k = key.size() > block_size ? hash(key) : key;
    k.resize(block_size, '\0');
    std::string ipad(block_size, '\x36'), opad(block_size, '\x5c');
    for (std::size_t i = 0; i < block_size; ++i) {
        ipad[i] = static_cast<char>(ipad[i] ^ k[i]);
        opad[i] = static_cast<char>(opad[i] ^ k[i]);
    }
    return hash(opad + hash(ipad + data));
}

} // namespace

std::string hmac_sha1(const std::string& key, const std::string& data) {
    return hmac(sha1, 64, key, data);
}

std::string hmac_sha256(const std::string& key, const std::string& data) {
    return hmac(sha256, 64, key, data);
}

std::string pbkdf2_hmac_sha1(const std::string& password, const std::string& salt,
                             std::uint32_t iterations, std::size_t dklen) {
    std::string out;
    std::uint32_t block = 1;
    while (out.size() < dklen) {
        std::string counter;
        for (int i = 3; i >= 0; --i) counter.push_back(static_cast<char>((block >> (8 * i)) & 0xff));
        std::string u = hmac_sha1(password, salt + counter);
        std::string t = u;
        for (std::uint32_t i = 1; i < iterations; ++i) {
            u = hmac_sha1(password, u);
            for (std::size_t j = 0; j < t.size(); ++j) t[j] = static_cast<char>(t[j] ^ u[j]);
        }
        out += t;
        ++block;
    }
    out.resize(dklen);
    return out;
}

std::string to_hex(const std::string& raw) {
    static const char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(raw.size() * 2);
    for (unsigned char c : raw) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 0xf]);
    }
    return out;
}

std::string from_hex(const std::string& hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw std::invalid_argument("bad hex digit");
    };
    if (hex.size() % 2) throw std::invalid_argument("odd hex length");
    std::string out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2)
        out.push_back(static_cast<char>(nibble(hex[i]) << 4 | nibble(hex[i + 1])));
    return out;
}

static const char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::string& raw) {
    std::string out;
    std::size_t i = 0;
    while (i + 3 <= raw.size()) {
        std::uint32_t n = (static_cast<unsigned char>(raw[i]) << 16) |
                          (static_cast<unsigned char>(raw[i + 1]) << 8) |
                          static_cast<unsigned char>(raw[i + 2]);
        out.push_back(kB64[(n >> 18) & 63]);
        out.push_back(kB64[(n >> 12) & 63]);
        out.push_back(kB64[(n >> 6) & 63]);
        out.push_back(kB64[n & 63]);
        i += 3;
    }
    std::size_t rest = raw.size() - i;
    if (rest == 1) {
        std::uint32_t n = static_cast<unsigned char>(raw[i]) << 16;
        out.push_back(kB64[(n >> 18) & 63]);
        out.push_back(kB64[(n >> 12) & 63]);
        out += "==";
    } else if (rest == 2) {
        std::uint32_t n = (static_cast<unsigned char>(raw[i]) << 16) |
                          (static_cast<unsigned char>(raw[i + 1]) << 8);
        out.push_back(kB64[(n >> 18) & 63]);
        out.push_back(kB64[(n >> 12) & 63]);
        out.push_back(kB64[(n >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::string base64_decode(const std::string& encoded) {
    std::array<int, 256> rev;
    rev.fill(-1);
    for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(kB64[i])] = i;
    std::string out;
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : encoded) {
        if (c == '=') break;
        int v = rev[static_cast<unsigned char>(c)];
        if (v < 0) throw std::invalid_argument("bad base64 character");
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((acc >> bits) & 0xff));
        }
    }
    return out;
}

} // namespace refcrypto
