#include "swarmbus/frame.hpp"

#include "swarmbus/crypto.hpp"
#include "swarmbus/errors.hpp"

namespace swarmbus {

const char* frame_type_name(FrameType t) {
    switch (t) {
    case FrameType::AUTH: return "AUTH";
    case FrameType::DELIVER: return "DELIVER";
    case FrameType::RETURN: return "RETURN";
    case FrameType::CONTROL: return "CONTROL";
    case FrameType::ERROR: return "ERROR";
    }
    return "?";
}

namespace {

void put_u32_be(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v >> 24));
    out.push_back(static_cast<char>(v >> 16));
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v));
}

void put_u64_be(std::string& out, std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8)
        out.push_back(static_cast<char>(v >> shift));
}

std::uint32_t get_u32_be(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

std::uint64_t get_u64_be(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
    return v;
}

bool known_type(std::uint8_t t) {
    return t >= static_cast<std::uint8_t>(FrameType::AUTH) &&
           t <= static_cast<std::uint8_t>(FrameType::ERROR);
}

} // namespace

std::string compute_frame_mac(const std::string& session_key, FrameType type,
                              std::uint64_t seq_no, const std::string& body) {
    std::string covered;
    covered.reserve(1 + 8 + body.size());
    covered.push_back(static_cast<char>(type));
    put_u64_be(covered, seq_no);
    covered += body;
    return crypto::hmac_sha1(session_key, covered);
}

std::string encode_frame(const Frame& f) {
    if (f.body.size() > kMaxFrameBody)
        fail(Errc::LENGTH_OVERFLOW, "frame body " + std::to_string(f.body.size()) + " bytes");
    bool is_auth = f.type == FrameType::AUTH;
    if (is_auth && !f.mac.empty()) fail(Errc::INVALID_ARGUMENT, "AUTH frames carry no MAC");
    if (!is_auth && f.mac.size() != kFrameMacSize)
        fail(Errc::INVALID_ARGUMENT, "frame MAC must be 20 bytes");
    std::string out;
    out.reserve(kFrameHeaderSize + f.body.size() + f.mac.size());
    put_u32_be(out, static_cast<std::uint32_t>(f.body.size()));
    out.push_back(static_cast<char>(f.type));
    put_u64_be(out, f.seq_no);
    out += f.body;
    out += f.mac;
    return out;
}

Frame decode_frame(const std::string& bytes) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < kFrameHeaderSize)
        fail(Errc::TRUNCATED, "frame header needs 13 bytes, got " + std::to_string(bytes.size()));
    std::uint32_t body_len = get_u32_be(p);
    if (body_len > kMaxFrameBody)
        fail(Errc::LENGTH_OVERFLOW, "declared body " + std::to_string(body_len) + " bytes");
    std::uint8_t type_byte = p[4];
    if (!known_type(type_byte))
        fail(Errc::UNKNOWN_TYPE, "frame type byte " + std::to_string(type_byte));
    Frame f;
    f.type = static_cast<FrameType>(type_byte);
    f.seq_no = get_u64_be(p + 5);
    std::size_t mac_len = f.type == FrameType::AUTH ? 0 : kFrameMacSize;
    std::size_t expected = kFrameHeaderSize + body_len + mac_len;
    if (bytes.size() != expected)
        fail(Errc::TRUNCATED, "frame needs " + std::to_string(expected) + " bytes, got " +
                                  std::to_string(bytes.size()));
    f.body = bytes.substr(kFrameHeaderSize, body_len);
    f.mac = bytes.substr(kFrameHeaderSize + body_len, mac_len);
    return f;
}

} // namespace swarmbus
