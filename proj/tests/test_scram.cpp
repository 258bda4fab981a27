#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <string>

#include "ref_crypto.hpp"
#include "swarmbus/crypto.hpp"
#include "swarmbus/scram.hpp"

using namespace swarmbus;

namespace {

// The published SCRAM-SHA-1 example exchange: user "user", password
// "pencil", salt QSXCR+Q6sek8bf92, 4096 rounds, both nonces fixed.
const std::string kUser = "user";
const std::string kPencil = "pencil";
const std::string kSaltB64 = "QSXCR+Q6sek8bf92";
const std::string kClientNonce = "fyko+d2lbbFgONRv9qkxdawL";
const std::string kServerNonce = "3rfcNHYJY1ZVvWVs7j";

ScramCredential pencil_credential() {
    return derive_credential(kUser, kPencil, refcrypto::base64_decode(kSaltB64), 4096);
}

std::string random_word(std::mt19937_64& rng, std::size_t len) {
    static const char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789";
    std::string out;
    for (std::size_t i = 0; i < len; ++i) out += alphabet[rng() % (sizeof(alphabet) - 1)];
    return out;
}

} // namespace

TEST_CASE("credential derivation matches the reference construction") {
    auto cred = pencil_credential();
    CHECK(cred.username == kUser);
    CHECK(cred.iterations == 4096);

    auto salt = refcrypto::base64_decode(kSaltB64);
    auto salted = refcrypto::pbkdf2_hmac_sha1(kPencil, salt, 4096, 20);
    auto client_key = refcrypto::hmac_sha1(salted, "Client Key");
    CHECK(cred.stored_key == refcrypto::sha1(client_key));
    CHECK(cred.server_key == refcrypto::hmac_sha1(salted, "Server Key"));

    // Known digest of the published example's storedKey.
    CHECK(refcrypto::to_hex(cred.stored_key) == "e9d94660c39d65c38fbad91c358f14da0eef2bd6");
}

TEST_CASE("credential derivation rejects weak or malformed input") {
    auto salt = refcrypto::base64_decode(kSaltB64);
    CHECK_THROWS_AS(derive_credential(kUser, kPencil, salt, 1024), SwarmError);
    try {
        derive_credential(kUser, kPencil, salt, kMinScramIterations - 1);
        FAIL("expected WEAK_ITERATIONS");
    } catch (const SwarmError& e) {
        CHECK(e.code() == Errc::WEAK_ITERATIONS);
    }
    CHECK_THROWS_AS(derive_credential("a,b", kPencil, salt, 4096), SwarmError);
    CHECK_THROWS_AS(derive_credential("a=b", kPencil, salt, 4096), SwarmError);
    CHECK_THROWS_AS(derive_credential("", kPencil, salt, 4096), SwarmError);
    CHECK(derive_credential(kUser, kPencil, salt, kMinScramIterations).iterations == 4096);
}

TEST_CASE("the published example exchange, message for message") {
    MemoryCredentialStore store;
    store.add(pencil_credential());
    ScramClient client(kUser, kPencil, kClientNonce);
    ScramServer server(store, kServerNonce);

    auto c1 = client.step("");
    REQUIRE(c1.outgoing.has_value());
    CHECK(*c1.outgoing == "n,,n=user,r=fyko+d2lbbFgONRv9qkxdawL");
    CHECK(client.phase() == HandshakeState::Phase::CLIENT_FIRST_SENT);

    auto s1 = server.step(*c1.outgoing);
    REQUIRE(s1.outgoing.has_value());
    CHECK(*s1.outgoing ==
          "r=fyko+d2lbbFgONRv9qkxdawL3rfcNHYJY1ZVvWVs7j,s=QSXCR+Q6sek8bf92,i=4096");

    auto c2 = client.step(*s1.outgoing);
    REQUIRE(c2.outgoing.has_value());
    CHECK(*c2.outgoing == "c=biws,r=fyko+d2lbbFgONRv9qkxdawL3rfcNHYJY1ZVvWVs7j,"
                          "p=v0X8v3Bz2T0CJGbJQyF0X+HI4Ts=");

    auto s2 = server.step(*c2.outgoing);
    REQUIRE(s2.outgoing.has_value());
    CHECK(*s2.outgoing == "v=rmF9pqV8S7suAoZWja4dJRkFsKQ=");
    CHECK(server.authenticated());
    CHECK(server.principal() == kUser);

    auto c3 = client.step(*s2.outgoing);
    CHECK(!c3.outgoing.has_value());
    CHECK(client.authenticated());
    CHECK(client.principal() == kUser);

    // Both ends derive the same channel key, reproducible from scratch.
    REQUIRE(client.session_key() == server.session_key());
    std::string auth_message =
        "n=user,r=fyko+d2lbbFgONRv9qkxdawL,"
        "r=fyko+d2lbbFgONRv9qkxdawL3rfcNHYJY1ZVvWVs7j,s=QSXCR+Q6sek8bf92,i=4096,"
        "c=biws,r=fyko+d2lbbFgONRv9qkxdawL3rfcNHYJY1ZVvWVs7j";
    auto expected = refcrypto::hmac_sha1(pencil_credential().stored_key, auth_message + "Session");
    CHECK(client.session_key() == expected);
    CHECK(refcrypto::to_hex(expected) == "2175310f104f75287b66ed0b2880a0451a026718");
}

TEST_CASE("random handshakes agree end to end") {
    std::mt19937_64 rng(0x5c7a3001);
    for (int i = 0; i < 100; ++i) {
        auto user = random_word(rng, 3 + rng() % 12);
        auto password = random_word(rng, 1 + rng() % 20);
        MemoryCredentialStore store;
        store.add(derive_credential(user, password, crypto::random_bytes(16),
                                    kMinScramIterations + static_cast<std::uint32_t>(rng() % 4096)));
        ScramClient client(user, password);
        ScramServer server(store);
        auto c1 = client.step("");
        auto s1 = server.step(*c1.outgoing);
        auto c2 = client.step(*s1.outgoing);
        auto s2 = server.step(*c2.outgoing);
        REQUIRE(server.authenticated());
        client.step(*s2.outgoing);
        REQUIRE(client.authenticated());
        REQUIRE(client.session_key() == server.session_key());
        CHECK(client.session_key().size() == 20);
        CHECK(server.principal() == user);
    }
}

TEST_CASE("a wrong password dies at the proof, after a full exchange") {
    MemoryCredentialStore store;
    store.add(pencil_credential());
    ScramClient client(kUser, "tepcil");
    ScramServer server(store);
    auto c1 = client.step("");
    auto s1 = server.step(*c1.outgoing);
    auto c2 = client.step(*s1.outgoing);
    auto s2 = server.step(*c2.outgoing);
    CHECK(!s2.outgoing.has_value());
    CHECK(server.failed());
    CHECK(server.failure_code() == Errc::PROOF_MISMATCH);
    CHECK_THROWS_AS(server.session_key(), SwarmError);
    CHECK_THROWS_AS(server.principal(), SwarmError);
}

TEST_CASE("unknown users walk the same path as wrong passwords") {
    MemoryCredentialStore empty;
    ScramClient client("phantom", "whatever", kClientNonce);
    ScramServer server(empty, kServerNonce);
    auto c1 = client.step("");
    auto s1 = server.step(*c1.outgoing);
    // The server answers with a plausible challenge instead of admitting
    // the username is unknown.
    REQUIRE(s1.outgoing.has_value());
    CHECK(s1.outgoing->find("s=") != std::string::npos);
    CHECK(s1.outgoing->find("i=4096") != std::string::npos);
    auto c2 = client.step(*s1.outgoing);
    auto s2 = server.step(*c2.outgoing);
    CHECK(server.failed());
    CHECK(server.failure_code() == Errc::PROOF_MISMATCH);

    // And the dummy challenge is stable: probing twice reveals nothing.
    ScramServer again(empty, kServerNonce);
    ScramClient probe("phantom", "other-guess", kClientNonce);
    auto p1 = probe.step("");
    auto a1 = again.step(*p1.outgoing);
    CHECK(*a1.outgoing == *s1.outgoing);
}

TEST_CASE("nonce tampering is detected on both sides") {
    SUBCASE("client rejects a server-first that drops its nonce") {
        MemoryCredentialStore store;
    store.add(pencil_credential());
        ScramClient client(kUser, kPencil, kClientNonce);
        client.step("");
        auto hijacked = "r=EVILNONCEEVILNONCEEVILNON3rfcNHYJY1ZVvWVs7j,s=" + kSaltB64 + ",i=4096";
        auto out = client.step(hijacked);
        CHECK(!out.outgoing.has_value());
        CHECK(client.failed());
        CHECK(client.failure_code() == Errc::NONCE_MISMATCH);
    }
    SUBCASE("server rejects a client-final with a swapped nonce") {
        MemoryCredentialStore store;
    store.add(pencil_credential());
        ScramClient client(kUser, kPencil, kClientNonce);
        ScramServer server(store, kServerNonce);
        auto c1 = client.step("");
        auto s1 = server.step(*c1.outgoing);
        auto c2 = client.step(*s1.outgoing);
        auto tampered = *c2.outgoing;
        auto pos = tampered.find("r=");
        tampered[pos + 2] = tampered[pos + 2] == 'X' ? 'Y' : 'X';
        auto s2 = server.step(tampered);
        CHECK(server.failed());
        CHECK(server.failure_code() == Errc::NONCE_MISMATCH);
    }
}

TEST_CASE("channel binding marker must be the bindingless constant") {
    MemoryCredentialStore store;
    store.add(pencil_credential());
    ScramClient client(kUser, kPencil, kClientNonce);
    ScramServer server(store, kServerNonce);
    auto c1 = client.step("");
    auto s1 = server.step(*c1.outgoing);
    auto c2 = client.step(*s1.outgoing);
    auto tampered = *c2.outgoing;
    REQUIRE(tampered.rfind("c=biws", 0) == 0);
    tampered.replace(0, 6, "c=eSws");
    auto s2 = server.step(tampered);
    CHECK(server.failed());
    CHECK(server.failure_code() == Errc::MALFORMED_MESSAGE);
}

TEST_CASE("client validates the server signature") {
    MemoryCredentialStore store;
    store.add(pencil_credential());
    ScramClient client(kUser, kPencil, kClientNonce);
    ScramServer server(store, kServerNonce);
    auto c1 = client.step("");
    auto s1 = server.step(*c1.outgoing);
    auto c2 = client.step(*s1.outgoing);
    server.step(*c2.outgoing);
    auto out = client.step("v=AAAAAAAAAAAAAAAAAAAAAAAAAAA=");
    CHECK(client.failed());
    CHECK(client.failure_code() == Errc::PROOF_MISMATCH);
}

TEST_CASE("client enforces the iteration floor") {
    ScramClient client(kUser, kPencil, kClientNonce);
    client.step("");
    auto weak = "r=" + kClientNonce + kServerNonce + ",s=" + kSaltB64 + ",i=1024";
    client.step(weak);
    CHECK(client.failed());
    // Handshake failures stay within the three protocol codes; a weak
    // count from the peer is just a bad message.
    CHECK(client.failure_code() == Errc::MALFORMED_MESSAGE);
    CHECK(client.failure_detail().find("iteration") != std::string::npos);
}

TEST_CASE("garbage at any stage is malformed, and failure is sticky") {
    MemoryCredentialStore store;
    store.add(pencil_credential());
    SUBCASE("server, client-first") {
        ScramServer server(store);
        auto out = server.step("howdy");
        CHECK(!out.outgoing.has_value());
        CHECK(server.failed());
        CHECK(server.failure_code() == Errc::MALFORMED_MESSAGE);
        // FAILED absorbs further traffic without reviving.
        auto again = server.step("n,,n=user,r=fyko+d2lbbFgONRv9qkxdawL");
        CHECK(again.phase == HandshakeState::Phase::FAILED);
        CHECK(!again.outgoing.has_value());
    }
    SUBCASE("client, server-first") {
        ScramClient client(kUser, kPencil);
        client.step("");
        client.step("r=,s=,i=");
        CHECK(client.failed());
        auto again = client.step("anything");
        CHECK(again.phase == HandshakeState::Phase::FAILED);
        CHECK(!again.outgoing.has_value());
        CHECK(!client.authenticated());
    }
    SUBCASE("server, client-final") {
        ScramServer server(store, kServerNonce);
        ScramClient client(kUser, kPencil, kClientNonce);
        server.step(*client.step("").outgoing);
        auto out = server.step("c=biws,r=fyko+d2lbbFgONRv9qkxdawL3rfcNHYJY1ZVvWVs7j,p=!!!");
        CHECK(server.failed());
        CHECK(server.failure_code() == Errc::MALFORMED_MESSAGE);
    }
}

TEST_CASE("finished handshakes refuse further steps") {
    MemoryCredentialStore store;
    store.add(pencil_credential());
    ScramClient client(kUser, kPencil);
    ScramServer server(store);
    auto c1 = client.step("");
    auto s1 = server.step(*c1.outgoing);
    auto c2 = client.step(*s1.outgoing);
    auto s2 = server.step(*c2.outgoing);
    client.step(*s2.outgoing);
    CHECK_THROWS_AS(client.step(""), SwarmError);
    CHECK_THROWS_AS(server.step(""), SwarmError);
}

TEST_CASE("generated nonces have the right shape") {
    ScramClient a("user1", "pw");
    ScramClient b("user1", "pw");
    auto out_a = *a.step("").outgoing;
    auto out_b = *b.step("").outgoing;
    CHECK(out_a != out_b); // fresh randomness
    auto nonce = out_a.substr(out_a.rfind("r=") + 2);
    CHECK(nonce.size() == kScramNonceLength);
    for (char c : nonce)
        CHECK(((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
               c == '+' || c == '/'));
}

TEST_CASE("caller supplied nonces must stay in the base64 alphabet") {
    static MemoryCredentialStore store;
    CHECK_THROWS_AS(ScramClient("user1", "pw", "bad,nonce"), SwarmError);
    CHECK_THROWS_AS(ScramServer(store, "with space"), SwarmError);
}
