#include "swarmbus/errors.hpp"

namespace swarmbus {

const char* errc_name(Errc code) {
    switch (code) {
    case Errc::UNKNOWN_DESCRIPTOR: return "UNKNOWN_DESCRIPTOR";
    case Errc::VERSION_EXISTS: return "VERSION_EXISTS";
    case Errc::VERIFICATION_FAILED: return "VERIFICATION_FAILED";
    case Errc::BAD_LAUNCH_FIELDS: return "BAD_LAUNCH_FIELDS";
    case Errc::NO_CONSENT: return "NO_CONSENT";
    case Errc::UNKNOWN_INSTANCE: return "UNKNOWN_INSTANCE";
    case Errc::NOT_RUNNING: return "NOT_RUNNING";
    case Errc::ADAPTER_UNREACHABLE: return "ADAPTER_UNREACHABLE";
    case Errc::HANDLER_FAULT: return "HANDLER_FAULT";
    case Errc::OUTPUT_VIOLATION: return "OUTPUT_VIOLATION";
    case Errc::UNAUTHENTICATED: return "UNAUTHENTICATED";
    case Errc::IDENTITY_MISMATCH: return "IDENTITY_MISMATCH";
    case Errc::CHANNEL_CLOSED: return "CHANNEL_CLOSED";
    case Errc::REPLAY: return "REPLAY";
    case Errc::SEQ_GAP: return "SEQ_GAP";
    case Errc::MAC_FAIL: return "MAC_FAIL";
    case Errc::TRUNCATED: return "TRUNCATED";
    case Errc::UNKNOWN_TYPE: return "UNKNOWN_TYPE";
    case Errc::LENGTH_OVERFLOW: return "LENGTH_OVERFLOW";
    case Errc::WEAK_ITERATIONS: return "WEAK_ITERATIONS";
    case Errc::PROOF_MISMATCH: return "PROOF_MISMATCH";
    case Errc::NONCE_MISMATCH: return "NONCE_MISMATCH";
    case Errc::MALFORMED_MESSAGE: return "MALFORMED_MESSAGE";
    case Errc::STORE_UNAVAILABLE: return "STORE_UNAVAILABLE";
    case Errc::UNKNOWN_TOKEN: return "UNKNOWN_TOKEN";
    case Errc::NOT_OWNER: return "NOT_OWNER";
    case Errc::UNKNOWN_RECORD: return "UNKNOWN_RECORD";
    case Errc::UNKNOWN_TICKET: return "UNKNOWN_TICKET";
    case Errc::UNKNOWN_PROFILE: return "UNKNOWN_PROFILE";
    case Errc::INVALID_ARGUMENT: return "INVALID_ARGUMENT";
    case Errc::IO_ERROR: return "IO_ERROR";
    }
    return "UNKNOWN";
}

std::optional<Errc> errc_from_name(std::string_view name) {
    for (int i = 0; i <= static_cast<int>(Errc::IO_ERROR); ++i) {
        Errc code = static_cast<Errc>(i);
        if (name == errc_name(code)) return code;
    }
    return std::nullopt;
}

static std::string make_message(Errc code, const std::string& detail) {
    std::string msg = errc_name(code);
    if (!detail.empty()) {
        msg += ": ";
        msg += detail;
    }
    return msg;
}

SwarmError::SwarmError(Errc code, const std::string& detail)
    : std::runtime_error(make_message(code, detail)), code_(code) {}

void fail(Errc code, const std::string& detail) {
    throw SwarmError(code, detail);
}

} // namespace swarmbus
