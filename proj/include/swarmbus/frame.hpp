#pragma once

#include <cstdint>
#include <string>

namespace swarmbus {

enum class FrameType : std::uint8_t {
    AUTH = 0x01,
    DELIVER = 0x02,
    RETURN = 0x03,
    CONTROL = 0x04,
    ERROR = 0x05,
};

const char* frame_type_name(FrameType t);

constexpr std::size_t kMaxFrameBody = 16u * 1024 * 1024;
constexpr std::size_t kFrameHeaderSize = 4 + 1 + 8; // length, type, seqNo
constexpr std::size_t kFrameMacSize = 20;

/// Wire layout: 4-byte big-endian body length, 1 type byte, 8-byte
/// big-endian seqNo, body, 20-byte MAC. AUTH frames carry no MAC (they
/// precede the session key). seqNo counts every frame sent in one
/// direction of a channel, handshake frames included.
struct Frame {
    FrameType type = FrameType::CONTROL;
    std::uint64_t seq_no = 0;
    std::string body;
    std::string mac; // raw 20 bytes; empty on AUTH

    bool operator==(const Frame&) const = default;
};

/// mac = HMAC-SHA-1(sessionKey, type-byte || seqNo-8-bytes || body).
std::string compute_frame_mac(const std::string& session_key, FrameType type,
                              std::uint64_t seq_no, const std::string& body);

/// INVALID_ARGUMENT on a frame violating the layout (oversized body, MAC
/// present on AUTH or missing elsewhere).
std::string encode_frame(const Frame& f);

/// The buffer must hold exactly one frame. TRUNCATED on short or trailing
/// bytes, UNKNOWN_TYPE, LENGTH_OVERFLOW above the 16 MiB body cap.
Frame decode_frame(const std::string& bytes);

} // namespace swarmbus
