#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "swarmbus/errors.hpp"

namespace swarmbus {

constexpr std::uint32_t kMinScramIterations = 4096;
constexpr std::size_t kScramNonceLength = 24;

/// Server-side verifier material; the password itself is never stored.
struct ScramCredential {
    std::string username;
    std::string salt; // raw bytes
    std::uint32_t iterations = 0;
    std::string stored_key; // 20 raw bytes, SHA-1(clientKey)
    std::string server_key; // 20 raw bytes, HMAC(saltedPassword, "Server Key")
};

/// saltedPassword = PBKDF2-HMAC-SHA-1(password, salt, iterations, 20);
/// clientKey = HMAC(saltedPassword, "Client Key"); storedKey = SHA-1(clientKey);
/// serverKey = HMAC(saltedPassword, "Server Key").
/// WEAK_ITERATIONS below 4096. Usernames must not contain ',' or '='.
ScramCredential derive_credential(const std::string& username, const std::string& password,
                                  const std::string& salt, std::uint32_t iterations);

class CredentialStore {
public:
    virtual ~CredentialStore() = default;
    virtual std::optional<ScramCredential> find(const std::string& username) const = 0;
};

class MemoryCredentialStore final : public CredentialStore {
public:
    void add(const ScramCredential& credential);
    std::optional<ScramCredential> find(const std::string& username) const override;

private:
    mutable std::mutex mutex_;
    std::map<std::string, ScramCredential> credentials_;
};

/// One side of the mutual handshake. Driving it:
///   client: step("") -> client-first; step(server-first) -> client-final;
///           step(server-final) -> AUTHENTICATED, no outgoing
///   server: step(client-first) -> server-first;
///           step(client-final) -> server-final and AUTHENTICATED
/// Message grammar accepted (channel binding disabled):
///   client-first  n,,n=<user>,r=<cnonce>
///   server-first  r=<cnonce><snonce>,s=<salt-b64>,i=<n>
///   client-final  c=biws,r=<cnonce><snonce>,p=<proof-b64>
///   server-final  v=<sig-b64>
/// Bad input moves the state to FAILED with one of PROOF_MISMATCH,
/// NONCE_MISMATCH, MALFORMED_MESSAGE and it stays there; a FAILED state
/// never yields a session key. Stepping a finished handshake is caller
/// error (INVALID_ARGUMENT).
class HandshakeState {
public:
    enum class Phase {
        INIT,
        CLIENT_FIRST_SENT,
        SERVER_FIRST_SENT,
        CLIENT_FINAL_SENT,
        AUTHENTICATED,
        FAILED,
    };

    struct Step {
        Phase phase = Phase::INIT;
        std::optional<std::string> outgoing;
    };

    virtual ~HandshakeState() = default;

    virtual Step step(const std::string& incoming) = 0;

    Phase phase() const { return phase_; }
    bool authenticated() const { return phase_ == Phase::AUTHENTICATED; }
    bool failed() const { return phase_ == Phase::FAILED; }

    /// HMAC-SHA-1(storedKey, authMessage || "Session"): keys the transport
    /// frame MACs. RFC 5802 authenticates but does not key the channel;
    /// this derivation is this project's documented extension.
    const std::string& session_key() const;

    /// Authenticated username. Server side: who the peer proved to be.
    const std::string& principal() const;

    Errc failure_code() const { return failure_code_; }
    const std::string& failure_detail() const { return failure_detail_; }

protected:
    Step advance(Phase next, std::optional<std::string> outgoing = std::nullopt);
    Step fail_handshake(Errc code, std::string detail);
    void require_phase(Phase expected) const;

    Phase phase_ = Phase::INIT;
    std::string session_key_;
    std::string principal_;
    Errc failure_code_ = Errc::MALFORMED_MESSAGE;
    std::string failure_detail_;
};

const char* handshake_phase_name(HandshakeState::Phase p);

class ScramClient final : public HandshakeState {
public:
    /// Empty nonce means a fresh random one.
    ScramClient(std::string username, std::string password, std::string client_nonce = "");

    Step step(const std::string& incoming) override;

private:
    std::string username_;
    std::string password_;
    std::string client_nonce_;
    std::string client_first_bare_;
    std::string auth_message_;
    std::string stored_key_;
    std::string server_key_;
};

class ScramServer final : public HandshakeState {
public:
    /// The store is consulted on client-first. Unknown users get a stable
    /// dummy credential so the exchange runs to the proof check and fails
    /// there (PROOF_MISMATCH), indistinguishable from a wrong password.
    explicit ScramServer(const CredentialStore& store, std::string server_nonce = "");

    Step step(const std::string& incoming) override;

private:
    const CredentialStore& store_;
    std::string server_nonce_;
    std::string combined_nonce_;
    std::string auth_message_prefix_;
    ScramCredential credential_;
};

} // namespace swarmbus
