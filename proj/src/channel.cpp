#include "swarmbus/channel.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>
#include <deque>

#include "swarmbus/crypto.hpp"

namespace swarmbus {

void read_exact(ByteStream& stream, char* buf, std::size_t len) {
    std::size_t got = 0;
    while (got < len) {
        std::size_t n = stream.read_some(buf + got, len - got);
        if (n == 0) {
            if (got == 0) fail(Errc::CHANNEL_CLOSED, "peer closed the stream");
            fail(Errc::TRUNCATED, "stream ended mid-frame");
        }
        got += n;
    }
}

namespace {

/// Shared half-duplex buffer: one side's writes are the other's reads.
struct PipeBuffer {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<char> data;
    bool closed = false;

    void write(const char* buf, std::size_t len) {
        std::lock_guard lock(mutex);
        if (closed) fail(Errc::CHANNEL_CLOSED, "pipe closed");
        data.insert(data.end(), buf, buf + len);
        cv.notify_all();
    }

    std::size_t read(char* buf, std::size_t len) {
        std::unique_lock lock(mutex);
        cv.wait(lock, [this] { return !data.empty() || closed; });
        if (data.empty()) return 0; // closed and drained
        std::size_t n = std::min(len, data.size());
        for (std::size_t i = 0; i < n; ++i) {
            buf[i] = data.front();
            data.pop_front();
        }
        return n;
    }

    void close() {
        std::lock_guard lock(mutex);
        closed = true;
        cv.notify_all();
    }
};

class PipeStream final : public ByteStream {
public:
    PipeStream(std::shared_ptr<PipeBuffer> in, std::shared_ptr<PipeBuffer> out)
        : in_(std::move(in)), out_(std::move(out)) {}
    ~PipeStream() override { close(); }

    std::size_t read_some(char* buf, std::size_t len) override { return in_->read(buf, len); }
    void write_all(const char* buf, std::size_t len) override { out_->write(buf, len); }
    void close() override {
        in_->close();
        out_->close();
    }

private:
    std::shared_ptr<PipeBuffer> in_;
    std::shared_ptr<PipeBuffer> out_;
};

} // namespace

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_pipe_pair() {
    auto a_to_b = std::make_shared<PipeBuffer>();
    auto b_to_a = std::make_shared<PipeBuffer>();
    return {std::make_unique<PipeStream>(b_to_a, a_to_b),
            std::make_unique<PipeStream>(a_to_b, b_to_a)};
}

std::unique_ptr<TcpStream> TcpStream::connect(const std::string& host, std::uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) fail(Errc::IO_ERROR, std::string("socket: ") + std::strerror(errno));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        fail(Errc::INVALID_ARGUMENT, "bad IPv4 address: " + host);
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        int err = errno;
        ::close(fd);
        fail(Errc::IO_ERROR, "connect " + host + ":" + std::to_string(port) + ": " +
                                 std::strerror(err));
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return std::make_unique<TcpStream>(fd);
}

TcpStream::~TcpStream() { close(); }

std::size_t TcpStream::read_some(char* buf, std::size_t len) {
    while (true) {
        ssize_t n = ::recv(fd_, buf, len, 0);
        if (n >= 0) return static_cast<std::size_t>(n);
        if (errno == EINTR) continue;
        if (errno == EBADF || errno == ECONNRESET) return 0; // treat as EOF
        fail(Errc::IO_ERROR, std::string("recv: ") + std::strerror(errno));
    }
}

void TcpStream::write_all(const char* buf, std::size_t len) {
    std::size_t sent = 0;
    while (sent < len) {
        ssize_t n = ::send(fd_, buf + sent, len - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail(Errc::CHANNEL_CLOSED, std::string("send: ") + std::strerror(errno));
        }
        sent += static_cast<std::size_t>(n);
    }
}

void TcpStream::close() {
    std::lock_guard lock(close_mutex_);
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
}

TcpListener::TcpListener(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) fail(Errc::IO_ERROR, std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(fd_, 64) != 0) {
        int err = errno;
        ::close(fd_);
        fd_ = -1;
        fail(Errc::IO_ERROR, "bind/listen port " + std::to_string(port) + ": " +
                                 std::strerror(err));
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { close(); }

std::unique_ptr<TcpStream> TcpListener::accept() {
    while (true) {
        int fd = ::accept(fd_, nullptr, nullptr);
        if (fd >= 0) {
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            return std::make_unique<TcpStream>(fd);
        }
        if (errno == EINTR) continue;
        fail(Errc::CHANNEL_CLOSED, std::string("accept: ") + std::strerror(errno));
    }
}

void TcpListener::close() {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
}

namespace {

void write_frame(ByteStream& stream, const Frame& f) {
    std::string bytes = encode_frame(f);
    stream.write_all(bytes.data(), bytes.size());
}

/// Reads one frame off the stream, validating the header fields as they
/// arrive so an oversized or unknown frame never allocates its body.
Frame read_frame(ByteStream& stream) {
    char header[kFrameHeaderSize];
    read_exact(stream, header, sizeof header);
    const auto* p = reinterpret_cast<const unsigned char*>(header);
    std::uint32_t body_len = (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
                             (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
    if (body_len > kMaxFrameBody)
        fail(Errc::LENGTH_OVERFLOW, "declared body " + std::to_string(body_len) + " bytes");
    std::uint8_t type_byte = p[4];
    if (type_byte < static_cast<std::uint8_t>(FrameType::AUTH) ||
        type_byte > static_cast<std::uint8_t>(FrameType::ERROR))
        fail(Errc::UNKNOWN_TYPE, "frame type byte " + std::to_string(type_byte));
    Frame f;
    f.type = static_cast<FrameType>(type_byte);
    f.seq_no = 0;
    for (int i = 5; i < 13; ++i) f.seq_no = (f.seq_no << 8) | p[i];
    f.body.resize(body_len);
    if (body_len > 0) read_exact(stream, f.body.data(), body_len);
    if (f.type != FrameType::AUTH) {
        f.mac.resize(kFrameMacSize);
        read_exact(stream, f.mac.data(), kFrameMacSize);
    }
    return f;
}

envelope::Value error_body(Errc code, const std::string& detail) {
    envelope::Value v;
    v["code"] = errc_name(code);
    v["detail"] = detail;
    return v;
}

} // namespace

Channel::Channel(std::unique_ptr<ByteStream> stream, std::string session_key,
                 std::string principal, std::uint64_t next_send_seq, std::uint64_t next_recv_seq)
    : stream_(std::move(stream)), session_key_(std::move(session_key)),
      principal_(std::move(principal)), send_seq_(next_send_seq), recv_seq_(next_recv_seq) {}

Channel::~Channel() { close(); }

void Channel::send(FrameType type, const std::string& body) {
    if (type == FrameType::AUTH) fail(Errc::INVALID_ARGUMENT, "AUTH only occurs in the handshake");
    std::lock_guard lock(send_mutex_);
    if (closed()) fail(Errc::CHANNEL_CLOSED, "channel is closed");
    Frame f;
    f.type = type;
    f.seq_no = send_seq_;
    f.body = body;
    f.mac = compute_frame_mac(session_key_, type, f.seq_no, body);
    write_frame(*stream_, f);
    ++send_seq_;
}

void Channel::send_error(Errc code, const std::string& detail) {
    send(FrameType::ERROR, envelope::encode(error_body(code, detail)));
}

Channel::Message Channel::receive() {
    if (closed()) fail(Errc::CHANNEL_CLOSED, "channel is closed");
    Frame f;
    try {
        f = read_frame(*stream_);
    } catch (const SwarmError&) {
        close();
        throw;
    }
    if (f.type == FrameType::AUTH) {
        close();
        fail(Errc::MALFORMED_MESSAGE, "AUTH frame after handshake");
    }
    std::string expected_mac = compute_frame_mac(session_key_, f.type, f.seq_no, f.body);
    if (!crypto::secure_equal(f.mac, expected_mac)) {
        close();
        fail(Errc::MAC_FAIL, "frame MAC invalid at seq " + std::to_string(f.seq_no));
    }
    if (f.seq_no != recv_seq_) {
        Errc code = f.seq_no < recv_seq_ ? Errc::REPLAY : Errc::SEQ_GAP;
        close();
        fail(code, "expected seq " + std::to_string(recv_seq_) + ", got " +
                       std::to_string(f.seq_no));
    }
    ++recv_seq_;
    return {f.type, std::move(f.body)};
}

void Channel::close() {
    std::lock_guard lock(state_mutex_);
    if (!closed_) {
        closed_ = true;
        stream_->close();
    }
}

bool Channel::closed() const {
    std::lock_guard lock(state_mutex_);
    return closed_;
}

void throw_channel_error(const Channel::Message& msg) {
    Errc code = Errc::MALFORMED_MESSAGE;
    std::string detail = "peer error frame";
    try {
        envelope::Value v = envelope::decode(msg.body);
        if (auto parsed = errc_from_name(v.at("code").get<std::string>())) code = *parsed;
        detail = v.at("detail").get<std::string>();
    } catch (const std::exception&) {
        // fall through with the defaults; the peer sent a garbled error
    }
    // Peers often relay e.what(), which already carries the code name.
    std::string prefix = std::string(errc_name(code)) + ": ";
    if (detail.rfind(prefix, 0) == 0) detail = detail.substr(prefix.size());
    fail(code, detail);
}

namespace {

Frame read_auth_frame(ByteStream& stream, std::uint64_t expected_seq) {
    Frame f = read_frame(stream);
    if (f.type == FrameType::ERROR) {
        Channel::Message msg{f.type, f.body};
        throw_channel_error(msg);
    }
    if (f.type != FrameType::AUTH)
        fail(Errc::MALFORMED_MESSAGE,
             std::string("expected AUTH frame, got ") + frame_type_name(f.type));
    if (f.seq_no != expected_seq)
        fail(Errc::SEQ_GAP, "handshake frame out of order");
    return f;
}

void write_auth_frame(ByteStream& stream, std::uint64_t seq, const std::string& body) {
    Frame f;
    f.type = FrameType::AUTH;
    f.seq_no = seq;
    f.body = body;
    write_frame(stream, f);
}

void write_error_frame(ByteStream& stream, std::uint64_t seq, Errc code,
                       const std::string& detail) {
    // Pre-session errors cannot be MAC'd; an all-zero MAC marks them. The
    // receiving side only trusts them to the extent of aborting.
    Frame f;
    f.type = FrameType::ERROR;
    f.seq_no = seq;
    f.body = envelope::encode(error_body(code, detail));
    f.mac.assign(kFrameMacSize, '\0');
    write_frame(stream, f);
}

[[noreturn]] void abort_handshake(ByteStream& stream, std::uint64_t seq,
                                  const HandshakeState& state) {
    try {
        write_error_frame(stream, seq, state.failure_code(), state.failure_detail());
    } catch (const SwarmError&) {
        // peer already gone; the original failure still stands
    }
    stream.close();
    fail(state.failure_code(), state.failure_detail());
}

} // namespace

std::unique_ptr<Channel> open_channel(std::unique_ptr<ByteStream> stream,
                                      const std::string& username, const std::string& password) {
    ScramClient client(username, password);
    std::uint64_t send_seq = 0, recv_seq = 0;

    auto first = client.step("");
    write_auth_frame(*stream, send_seq++, *first.outgoing);

    Frame server_first = read_auth_frame(*stream, recv_seq++);
    auto final_step = client.step(server_first.body);
    if (client.failed()) abort_handshake(*stream, send_seq, client);
    write_auth_frame(*stream, send_seq++, *final_step.outgoing);

    Frame server_final = read_auth_frame(*stream, recv_seq++);
    client.step(server_final.body);
    if (client.failed()) abort_handshake(*stream, send_seq, client);

    return std::make_unique<Channel>(std::move(stream), client.session_key(), client.principal(),
                                     send_seq, recv_seq);
}

std::unique_ptr<Channel> accept_channel(std::unique_ptr<ByteStream> stream,
                                        const CredentialStore& credentials) {
    ScramServer server(credentials);
    std::uint64_t send_seq = 0, recv_seq = 0;

    Frame client_first = read_auth_frame(*stream, recv_seq++);
    auto first = server.step(client_first.body);
    if (server.failed()) abort_handshake(*stream, send_seq, server);
    write_auth_frame(*stream, send_seq++, *first.outgoing);

    Frame client_final = read_auth_frame(*stream, recv_seq++);
    auto final_step = server.step(client_final.body);
    if (server.failed()) abort_handshake(*stream, send_seq, server);
    write_auth_frame(*stream, send_seq++, *final_step.outgoing);

    return std::make_unique<Channel>(std::move(stream), server.session_key(), server.principal(),
                                     send_seq, recv_seq);
}

} // namespace swarmbus
