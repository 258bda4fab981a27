#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "ref_crypto.hpp"
#include "swarmbus/crypto.hpp"

using namespace swarmbus;

namespace {

std::string random_blob(std::mt19937_64& rng, std::size_t max_len) {
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<int> byte(0, 255);
    std::string out(len(rng), '\0');
    for (auto& c : out) c = static_cast<char>(byte(rng));
    return out;
}

} // namespace

TEST_CASE("digests match the published vectors") {
    CHECK(crypto::to_hex(crypto::sha1("abc")) == "a9993e364706816aba3e25717850c26c9cd0d89d");
    CHECK(crypto::to_hex(crypto::sha1("")) == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
    CHECK(crypto::to_hex(crypto::sha256("abc")) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(crypto::to_hex(crypto::hmac_sha1(std::string(20, '\x0b'), "Hi There")) ==
          "b617318655057264e28bc0b6fb378c8ef146be00");
    CHECK(crypto::to_hex(crypto::pbkdf2_hmac_sha1("password", "salt", 4096, 20)) ==
          "4b007901b765489abead49d926f721d065a429c1");
}

TEST_CASE("digests agree with the independent reference on random inputs") {
    std::mt19937_64 rng(7001);
    for (int i = 0; i < 300; ++i) {
        std::string data = random_blob(rng, 300);
        std::string key = random_blob(rng, 100);
        CHECK(crypto::sha1(data) == refcrypto::sha1(data));
        CHECK(crypto::sha256(data) == refcrypto::sha256(data));
        CHECK(crypto::hmac_sha1(key, data) == refcrypto::hmac_sha1(key, data));
        CHECK(crypto::hmac_sha256(key, data) == refcrypto::hmac_sha256(key, data));
    }
    for (int i = 0; i < 10; ++i) {
        std::string pw = random_blob(rng, 30);
        std::string salt = random_blob(rng, 30);
        CHECK(crypto::pbkdf2_hmac_sha1(pw, salt, 37, 25) ==
              refcrypto::pbkdf2_hmac_sha1(pw, salt, 37, 25));
    }
}

TEST_CASE("base64 and hex round-trip and agree with the reference") {
    std::mt19937_64 rng(7002);
    for (int i = 0; i < 200; ++i) {
        std::string data = random_blob(rng, 200);
        CHECK(crypto::base64_encode(data) == refcrypto::base64_encode(data));
        CHECK(crypto::base64_decode(crypto::base64_encode(data)) == data);
        CHECK(crypto::to_hex(data) == refcrypto::to_hex(data));
        CHECK(crypto::from_hex(crypto::to_hex(data)) == data);
    }
}

TEST_CASE("random_bytes and nonces have the promised shape") {
    CHECK(crypto::random_bytes(32).size() == 32);
    CHECK(crypto::random_bytes(0).empty());
    std::set<std::string> seen;
    for (int i = 0; i < 64; ++i) seen.insert(crypto::random_bytes(16));
    CHECK(seen.size() == 64); // collisions would mean a broken generator

    std::string nonce = crypto::random_nonce();
    CHECK(nonce.size() == 24);
    for (char c : nonce) {
        bool in_alphabet = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                           (c >= '0' && c <= '9') || c == '+' || c == '/';
        CHECK(in_alphabet);
    }
}

TEST_CASE("secure_equal compares content, not identity") {
    CHECK(crypto::secure_equal("abc", "abc"));
    CHECK_FALSE(crypto::secure_equal("abc", "abd"));
    CHECK_FALSE(crypto::secure_equal("abc", "abcd"));
    CHECK(crypto::secure_equal("", ""));
}
