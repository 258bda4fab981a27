#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace swarmbus {

enum class Errc {
    // descriptor / launch
    UNKNOWN_DESCRIPTOR,
    VERSION_EXISTS,
    VERIFICATION_FAILED,
    BAD_LAUNCH_FIELDS,
    NO_CONSENT,
    // instance lifecycle
    UNKNOWN_INSTANCE,
    NOT_RUNNING,
    ADAPTER_UNREACHABLE,
    HANDLER_FAULT,
    OUTPUT_VIOLATION,
    // registration / channels
    UNAUTHENTICATED,
    IDENTITY_MISMATCH,
    CHANNEL_CLOSED,
    REPLAY,
    SEQ_GAP,
    MAC_FAIL,
    // framing
    TRUNCATED,
    UNKNOWN_TYPE,
    LENGTH_OVERFLOW,
    // scram
    WEAK_ITERATIONS,
    PROOF_MISMATCH,
    NONCE_MISMATCH,
    MALFORMED_MESSAGE,
    // ledger
    STORE_UNAVAILABLE,
    UNKNOWN_TOKEN,
    // demo
    NOT_OWNER,
    UNKNOWN_RECORD,
    UNKNOWN_TICKET,
    UNKNOWN_PROFILE,
    // generic
    INVALID_ARGUMENT,
    IO_ERROR,
};

const char* errc_name(Errc code);
std::optional<Errc> errc_from_name(std::string_view name);

/// Domain error carrying a stable code plus human-readable detail.
class SwarmError : public std::runtime_error {
public:
    SwarmError(Errc code, const std::string& detail = "");
    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& detail = "");

} // namespace swarmbus
