#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "swarmbus/bus.hpp"
#include "swarmbus/channel.hpp"
#include "swarmbus/errors.hpp"
#include "swarmbus/model.hpp"

namespace swarmbus {

// Wire bodies for the adapter protocol. A delivery goes out as a DELIVER
// frame, the phase result comes back as a RETURN frame, and maintenance
// operations ride CONTROL frames with an "op" discriminator.
envelope::Value to_envelope(const Delivery& d);
Delivery delivery_from_envelope(const envelope::Value& v);
std::string encode_phase_result(const std::string& instance_id, const std::string& phase,
                                const PhaseResult& result);
PhaseResult phase_result_from_envelope(const envelope::Value& v);

/// Adapter-process side of the bus protocol. Owns the phase handlers and
/// the at-most-once cache: a redelivered (instance, phase) pair returns
/// the recorded result without running the handler again.
class AdapterHost {
public:
    explicit AdapterHost(AdapterIdentity identity) : identity_(std::move(identity)) {}

    AdapterIdentity identity() const { return identity_; }
    void on_phase(const std::string& phase, PhaseHandler handler);

    /// Registers over the channel and serves deliveries until the bus
    /// goes away (orderly return) or the channel fails (throws).
    void serve(Channel& channel);

    /// One local dispatch through the cache, same semantics as a
    /// delivery arriving over the wire.
    PhaseResult handle(const Delivery& delivery);

    std::size_t erase_instances(const std::vector<std::string>& instance_ids);
    std::vector<std::string> scan_cache(const std::string& subject_id) const;
    std::size_t cache_size() const;

private:
    AdapterIdentity identity_;
    std::map<std::string, PhaseHandler> handlers_;
    mutable std::mutex mutex_;
    std::map<std::pair<std::string, std::string>, PhaseResult> done_;
};

/// In-process link for same-process bus/adapter wiring: all calls land
/// on the host directly, so there is a single at-most-once cache.
class HostLink : public AdapterLink {
public:
    explicit HostLink(std::shared_ptr<AdapterHost> host) : host_(std::move(host)) {}

    PhaseResult deliver(const Delivery& delivery) override {
        if (closed_) fail(Errc::ADAPTER_UNREACHABLE, "adapter link closed");
        return host_->handle(delivery);
    }
    void close() override { closed_ = true; }
    bool alive() const override { return !closed_; }
    std::size_t erase_instances(const std::vector<std::string>& instance_ids) override {
        return host_->erase_instances(instance_ids);
    }
    std::vector<std::string> residual_scan(const std::string& subject_id) override {
        return host_->scan_cache(subject_id);
    }

private:
    std::shared_ptr<AdapterHost> host_;
    std::atomic<bool> closed_{false};
};

/// Bus-side link to a remote adapter. Owns the authenticated channel and
/// serializes calls on it: one request in flight per adapter.
class ChannelAdapterLink : public AdapterLink {
public:
    explicit ChannelAdapterLink(std::shared_ptr<Channel> channel)
        : channel_(std::move(channel)) {}

    PhaseResult deliver(const Delivery& delivery) override;
    void close() override;
    bool alive() const override;
    std::size_t erase_instances(const std::vector<std::string>& instance_ids) override;
    std::vector<std::string> residual_scan(const std::string& subject_id) override;

private:
    envelope::Value call(FrameType type, const std::string& body, FrameType expect);

    std::shared_ptr<Channel> channel_;
    std::mutex mutex_;
};

} // namespace swarmbus
