#include "swarmbus/scram.hpp"

#include <algorithm>
#include <vector>

#include "swarmbus/crypto.hpp"

namespace swarmbus {

namespace {

bool valid_scram_name(const std::string& s) {
    return !s.empty() && s.find(',') == std::string::npos && s.find('=') == std::string::npos;
}

bool valid_nonce(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
               c == '+' || c == '/';
    });
}

/// Splits "k1=v1,k2=v2,..." preserving order; single-letter keys only.
std::optional<std::vector<std::pair<char, std::string>>> parse_attributes(const std::string& text) {
    std::vector<std::pair<char, std::string>> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        std::string part =
            comma == std::string::npos ? text.substr(pos) : text.substr(pos, comma - pos);
        if (part.size() < 2 || part[1] != '=') return std::nullopt;
        out.emplace_back(part[0], part.substr(2));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::string xor_bytes(const std::string& a, const std::string& b) {
    std::string out(a.size(), '\0');
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = static_cast<char>(a[i] ^ b[i]);
    return out;
}

std::string derive_session_key(const std::string& stored_key, const std::string& auth_message) {
    return crypto::hmac_sha1(stored_key, auth_message + "Session");
}

/// Stable within one process so an unknown username sees the same salt on
/// every attempt (no enumeration via changing salts).
const std::string& dummy_credential_secret() {
    static const std::string secret = crypto::random_bytes(20);
    return secret;
}

} // namespace

ScramCredential derive_credential(const std::string& username, const std::string& password,
                                  const std::string& salt, std::uint32_t iterations) {
    if (iterations < kMinScramIterations)
        fail(Errc::WEAK_ITERATIONS,
             "iteration count " + std::to_string(iterations) + " below " +
                 std::to_string(kMinScramIterations));
    if (!valid_scram_name(username))
        fail(Errc::INVALID_ARGUMENT, "username must be non-empty without ',' or '='");
    ScramCredential c;
    c.username = username;
    c.salt = salt;
    c.iterations = iterations;
    std::string salted = crypto::pbkdf2_hmac_sha1(password, salt, iterations, 20);
    std::string client_key = crypto::hmac_sha1(salted, "Client Key");
    c.stored_key = crypto::sha1(client_key);
    c.server_key = crypto::hmac_sha1(salted, "Server Key");
    return c;
}

void MemoryCredentialStore::add(const ScramCredential& credential) {
    std::lock_guard lock(mutex_);
    credentials_[credential.username] = credential;
}

std::optional<ScramCredential> MemoryCredentialStore::find(const std::string& username) const {
    std::lock_guard lock(mutex_);
    auto it = credentials_.find(username);
    if (it == credentials_.end()) return std::nullopt;
    return it->second;
}

const char* handshake_phase_name(HandshakeState::Phase p) {
    switch (p) {
    case HandshakeState::Phase::INIT: return "INIT";
    case HandshakeState::Phase::CLIENT_FIRST_SENT: return "CLIENT_FIRST_SENT";
    case HandshakeState::Phase::SERVER_FIRST_SENT: return "SERVER_FIRST_SENT";
    case HandshakeState::Phase::CLIENT_FINAL_SENT: return "CLIENT_FINAL_SENT";
    case HandshakeState::Phase::AUTHENTICATED: return "AUTHENTICATED";
    case HandshakeState::Phase::FAILED: return "FAILED";
    }
    return "?";
}

const std::string& HandshakeState::session_key() const {
    if (phase_ != Phase::AUTHENTICATED)
        fail(Errc::INVALID_ARGUMENT, "no session key before AUTHENTICATED");
    return session_key_;
}

const std::string& HandshakeState::principal() const {
    if (phase_ != Phase::AUTHENTICATED)
        fail(Errc::INVALID_ARGUMENT, "no principal before AUTHENTICATED");
    return principal_;
}

HandshakeState::Step HandshakeState::advance(Phase next, std::optional<std::string> outgoing) {
    phase_ = next;
    return {phase_, std::move(outgoing)};
}

HandshakeState::Step HandshakeState::fail_handshake(Errc code, std::string detail) {
    phase_ = Phase::FAILED;
    failure_code_ = code;
    failure_detail_ = std::move(detail);
    session_key_.clear();
    principal_.clear();
    return {phase_, std::nullopt};
}

void HandshakeState::require_phase(Phase expected) const {
    if (phase_ == Phase::AUTHENTICATED)
        fail(Errc::INVALID_ARGUMENT, "handshake already finished");
    if (phase_ != expected && phase_ != Phase::FAILED)
        fail(Errc::INVALID_ARGUMENT, std::string("handshake step out of order: at ") +
                                         handshake_phase_name(phase_));
}

ScramClient::ScramClient(std::string username, std::string password, std::string client_nonce)
    : username_(std::move(username)), password_(std::move(password)),
      client_nonce_(std::move(client_nonce)) {
    if (!valid_scram_name(username_))
        fail(Errc::INVALID_ARGUMENT, "username must be non-empty without ',' or '='");
    if (client_nonce_.empty()) client_nonce_ = crypto::random_nonce(kScramNonceLength);
    if (!valid_nonce(client_nonce_)) fail(Errc::INVALID_ARGUMENT, "nonce outside base64 alphabet");
}

HandshakeState::Step ScramClient::step(const std::string& incoming) {
    if (phase_ == Phase::FAILED) return {phase_, std::nullopt};
    switch (phase_) {
    case Phase::INIT: {
        if (!incoming.empty())
            fail(Errc::INVALID_ARGUMENT, "client-first takes no incoming message");
        client_first_bare_ = "n=" + username_ + ",r=" + client_nonce_;
        return advance(Phase::CLIENT_FIRST_SENT, "n,," + client_first_bare_);
    }
    case Phase::CLIENT_FIRST_SENT: {
        auto attrs = parse_attributes(incoming);
        if (!attrs || attrs->size() != 3 || (*attrs)[0].first != 'r' ||
            (*attrs)[1].first != 's' || (*attrs)[2].first != 'i')
            return fail_handshake(Errc::MALFORMED_MESSAGE, "bad server-first");
        const std::string& combined = (*attrs)[0].second;
        if (combined.size() <= client_nonce_.size() ||
            combined.compare(0, client_nonce_.size(), client_nonce_) != 0 ||
            !valid_nonce(combined))
            return fail_handshake(Errc::NONCE_MISMATCH, "server nonce does not extend ours");
        std::string salt;
        try {
            salt = crypto::base64_decode((*attrs)[1].second);
        } catch (const SwarmError&) {
            return fail_handshake(Errc::MALFORMED_MESSAGE, "bad salt base64");
        }
        const std::string& iter_text = (*attrs)[2].second;
        if (iter_text.empty() || iter_text.size() > 9 ||
            !std::all_of(iter_text.begin(), iter_text.end(),
                         [](char c) { return c >= '0' && c <= '9'; }))
            return fail_handshake(Errc::MALFORMED_MESSAGE, "bad iteration count");
        std::uint32_t iterations = static_cast<std::uint32_t>(std::stoul(iter_text));
        if (iterations < kMinScramIterations)
            return fail_handshake(Errc::MALFORMED_MESSAGE, "iteration count below " +
                                                               std::to_string(kMinScramIterations));

        std::string salted = crypto::pbkdf2_hmac_sha1(password_, salt, iterations, 20);
        std::string client_key = crypto::hmac_sha1(salted, "Client Key");
        stored_key_ = crypto::sha1(client_key);
        server_key_ = crypto::hmac_sha1(salted, "Server Key");

        std::string without_proof = "c=biws,r=" + combined;
        auth_message_ = client_first_bare_ + "," + incoming + "," + without_proof;
        std::string client_signature = crypto::hmac_sha1(stored_key_, auth_message_);
        std::string proof = xor_bytes(client_key, client_signature);
        return advance(Phase::CLIENT_FINAL_SENT,
                       without_proof + ",p=" + crypto::base64_encode(proof));
    }
    case Phase::CLIENT_FINAL_SENT: {
        auto attrs = parse_attributes(incoming);
        if (!attrs || attrs->size() != 1 || (*attrs)[0].first != 'v')
            return fail_handshake(Errc::MALFORMED_MESSAGE, "bad server-final");
        std::string signature;
        try {
            signature = crypto::base64_decode((*attrs)[0].second);
        } catch (const SwarmError&) {
            return fail_handshake(Errc::MALFORMED_MESSAGE, "bad signature base64");
        }
        std::string expected = crypto::hmac_sha1(server_key_, auth_message_);
        if (!crypto::secure_equal(signature, expected))
            return fail_handshake(Errc::PROOF_MISMATCH, "server signature mismatch");
        session_key_ = derive_session_key(stored_key_, auth_message_);
        principal_ = username_;
        return advance(Phase::AUTHENTICATED);
    }
    default:
        fail(Errc::INVALID_ARGUMENT, "handshake already finished");
    }
}

ScramServer::ScramServer(const CredentialStore& store, std::string server_nonce)
    : store_(store), server_nonce_(std::move(server_nonce)) {
    phase_ = Phase::CLIENT_FIRST_SENT; // server starts by receiving client-first
    if (server_nonce_.empty()) server_nonce_ = crypto::random_nonce(kScramNonceLength);
    if (!valid_nonce(server_nonce_)) fail(Errc::INVALID_ARGUMENT, "nonce outside base64 alphabet");
}

HandshakeState::Step ScramServer::step(const std::string& incoming) {
    if (phase_ == Phase::FAILED) return {phase_, std::nullopt};
    switch (phase_) {
    case Phase::CLIENT_FIRST_SENT: {
        if (incoming.rfind("n,,", 0) != 0)
            return fail_handshake(Errc::MALFORMED_MESSAGE,
                                  "client-first must start n,, (channel binding disabled)");
        std::string bare = incoming.substr(3);
        auto attrs = parse_attributes(bare);
        if (!attrs || attrs->size() != 2 || (*attrs)[0].first != 'n' || (*attrs)[1].first != 'r')
            return fail_handshake(Errc::MALFORMED_MESSAGE, "bad client-first");
        const std::string& username = (*attrs)[0].second;
        const std::string& client_nonce = (*attrs)[1].second;
        if (!valid_scram_name(username) || !valid_nonce(client_nonce))
            return fail_handshake(Errc::MALFORMED_MESSAGE, "bad username or nonce");

        auto found = store_.find(username);
        if (found) {
            credential_ = *found;
        } else {
            // Stable per-username dummy keeps timing and message shape
            // identical for unknown users; the proof check then fails.
            std::string seed = crypto::hmac_sha1(dummy_credential_secret(), username);
            credential_ = derive_credential(username, crypto::to_hex(seed),
                                            seed.substr(0, 16), kMinScramIterations);
        }

        combined_nonce_ = client_nonce + server_nonce_;
        std::string server_first = "r=" + combined_nonce_ +
                                   ",s=" + crypto::base64_encode(credential_.salt) +
                                   ",i=" + std::to_string(credential_.iterations);
        auth_message_prefix_ = bare + "," + server_first + ",";
        return advance(Phase::SERVER_FIRST_SENT, server_first);
    }
    case Phase::SERVER_FIRST_SENT: {
        auto attrs = parse_attributes(incoming);
        if (!attrs || attrs->size() != 3 || (*attrs)[0].first != 'c' ||
            (*attrs)[1].first != 'r' || (*attrs)[2].first != 'p')
            return fail_handshake(Errc::MALFORMED_MESSAGE, "bad client-final");
        if ((*attrs)[0].second != "biws")
            return fail_handshake(Errc::MALFORMED_MESSAGE, "unexpected channel binding");
        if ((*attrs)[1].second != combined_nonce_)
            return fail_handshake(Errc::NONCE_MISMATCH, "combined nonce mismatch");
        std::string proof;
        try {
            proof = crypto::base64_decode((*attrs)[2].second);
        } catch (const SwarmError&) {
            return fail_handshake(Errc::MALFORMED_MESSAGE, "bad proof base64");
        }
        if (proof.size() != 20) return fail_handshake(Errc::MALFORMED_MESSAGE, "bad proof length");

        std::string without_proof = "c=biws,r=" + combined_nonce_;
        std::string auth_message = auth_message_prefix_ + without_proof;
        std::string client_signature = crypto::hmac_sha1(credential_.stored_key, auth_message);
        std::string recovered_key = xor_bytes(proof, client_signature);
        if (!crypto::secure_equal(crypto::sha1(recovered_key), credential_.stored_key))
            return fail_handshake(Errc::PROOF_MISMATCH, "client proof mismatch");

        session_key_ = derive_session_key(credential_.stored_key, auth_message);
        principal_ = credential_.username;
        std::string server_signature = crypto::hmac_sha1(credential_.server_key, auth_message);
        return advance(Phase::AUTHENTICATED, "v=" + crypto::base64_encode(server_signature));
    }
    default:
        fail(Errc::INVALID_ARGUMENT, "handshake already finished");
    }
}

} // namespace swarmbus
