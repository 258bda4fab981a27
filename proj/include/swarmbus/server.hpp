#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "swarmbus/adapter.hpp"
#include "swarmbus/bus.hpp"
#include "swarmbus/channel.hpp"
#include "swarmbus/erasure.hpp"

namespace swarmbus {

/// TCP front door for one bus. Every connection authenticates first; the
/// opening frame then decides its role. An adapter registration hands the
/// channel over to the bus as that adapter's link, anything else becomes
/// an operator session answering request/reply control frames.
class BusServer {
public:
    BusServer(Bus& bus, ErasureEngine* erasure, std::shared_ptr<CredentialStore> credentials,
              std::uint16_t port = kDefaultBusPort);
    ~BusServer();

    BusServer(const BusServer&) = delete;
    BusServer& operator=(const BusServer&) = delete;

    std::uint16_t port() const { return listener_.port(); }
    void start();
    void stop();

private:
    void accept_loop();
    void serve_connection(std::unique_ptr<TcpStream> stream);
    envelope::Value dispatch(const std::string& op, const envelope::Value& req,
                             const std::string& principal);

    Bus& bus_;
    ErasureEngine* erasure_;
    std::shared_ptr<CredentialStore> credentials_;
    TcpListener listener_;
    std::thread accept_thread_;
    std::atomic<bool> stopping_{false};
    std::mutex workers_mutex_;
    std::vector<std::thread> workers_;
    std::vector<std::shared_ptr<Channel>> session_channels_;
};

/// Operator-side counterpart: one authenticated control channel, strict
/// request/reply. An ERROR reply is rethrown as the SwarmError it carries.
class BusClient {
public:
    static BusClient connect(const std::string& host, std::uint16_t port,
                             const std::string& username, const std::string& password);

    envelope::Value call(const std::string& op, envelope::Value args = {});
    const std::string& principal() const { return channel_->principal(); }
    void close() { channel_->close(); }

private:
    explicit BusClient(std::unique_ptr<Channel> channel) : channel_(std::move(channel)) {}

    std::unique_ptr<Channel> channel_;
    std::mutex mutex_;
};

/// Connects, authenticates, registers the adapter, and serves deliveries
/// until the bus goes away.
void run_adapter(AdapterHost& host, const std::string& bus_host, std::uint16_t port,
                 const std::string& username, const std::string& password);

} // namespace swarmbus
