#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include "swarmbus/envelope.hpp"
#include "swarmbus/frame.hpp"
#include "swarmbus/scram.hpp"

namespace swarmbus {

constexpr std::uint16_t kDefaultBusPort = 7468;

/// Reliable, ordered byte stream. One reader and one writer activity per
/// stream; write_all is atomic with respect to other writers only if the
/// caller serializes (Channel does).
class ByteStream {
public:
    virtual ~ByteStream() = default;
    /// Up to len bytes; returns 0 on clean EOF; blocks otherwise.
    virtual std::size_t read_some(char* buf, std::size_t len) = 0;
    virtual void write_all(const char* buf, std::size_t len) = 0;
    virtual void close() = 0;
};

/// CHANNEL_CLOSED on EOF at offset 0, TRUNCATED on EOF mid-read.
void read_exact(ByteStream& stream, char* buf, std::size_t len);

/// In-process bidirectional pipe; each returned stream reads what the
/// other wrote. Used by tests and same-process bus/adapter wiring.
std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_pipe_pair();

class TcpStream final : public ByteStream {
public:
    static std::unique_ptr<TcpStream> connect(const std::string& host, std::uint16_t port);
    explicit TcpStream(int fd) : fd_(fd) {}
    ~TcpStream() override;

    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;

    std::size_t read_some(char* buf, std::size_t len) override;
    void write_all(const char* buf, std::size_t len) override;
    void close() override;

private:
    int fd_ = -1;
    std::mutex close_mutex_;
};

class TcpListener {
public:
    /// Binds 127.0.0.1:<port>; port 0 picks a free one (see port()).
    explicit TcpListener(std::uint16_t port);
    ~TcpListener();

    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    std::unique_ptr<TcpStream> accept();
    std::uint16_t port() const { return port_; }
    void close();

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

/// Post-handshake framed channel: every frame MAC'd with the SCRAM session
/// key and strictly sequenced per direction. A duplicate seqNo is REPLAY,
/// a jump is SEQ_GAP, a bad MAC is MAC_FAIL; each closes the channel
/// before the frame reaches the application.
class Channel {
public:
    struct Message {
        FrameType type = FrameType::CONTROL;
        std::string body;
    };

    Channel(std::unique_ptr<ByteStream> stream, std::string session_key, std::string principal,
            std::uint64_t next_send_seq, std::uint64_t next_recv_seq);
    ~Channel();

    Channel(const Channel&) = delete;
    Channel& operator=(const Channel&) = delete;

    void send(FrameType type, const std::string& body);
    /// Sends an ERROR frame carrying {code, detail}; the channel stays
    /// open (ERROR is a negative reply, not a teardown).
    void send_error(Errc code, const std::string& detail);

    /// Blocks for the next verified in-order frame. Throws CHANNEL_CLOSED
    /// after close or peer EOF, and the specific code on a security check
    /// failure (which also closes the channel).
    Message receive();

    const std::string& principal() const { return principal_; }
    const std::string& session_key() const { return session_key_; }
    void close();
    bool closed() const;

private:
    std::unique_ptr<ByteStream> stream_;
    std::string session_key_;
    std::string principal_;
    std::mutex send_mutex_;
    std::uint64_t send_seq_ = 0;
    std::uint64_t recv_seq_ = 0;
    mutable std::mutex state_mutex_;
    bool closed_ = false;
};

/// Decodes an ERROR frame body into (code, detail) and throws it.
[[noreturn]] void throw_channel_error(const Channel::Message& msg);

/// Client side: runs the SCRAM handshake over AUTH frames and returns the
/// authenticated channel. Throws the handshake failure (and sends an
/// ERROR frame when the failure is ours to report).
std::unique_ptr<Channel> open_channel(std::unique_ptr<ByteStream> stream,
                                      const std::string& username, const std::string& password);

/// Server side of the same exchange.
std::unique_ptr<Channel> accept_channel(std::unique_ptr<ByteStream> stream,
                                        const CredentialStore& credentials);

} // namespace swarmbus
