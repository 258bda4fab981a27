#pragma once

#include <cstdint>
#include <memory>

#include "swarmbus/healthfuse.hpp"

namespace swarmbus::healthfuse {

/// Citizen-facing portal: login, insurance requests, medical records,
/// consents, GDPR actions, support tickets. Plain HTTP at desk scale;
/// TLS termination is a deployment concern. All JSON uses the canonical
/// envelope grammar.
class PortalService {
public:
    /// port 0 binds a free one; see port() after start().
    explicit PortalService(HealthfuseWorld& world, std::uint16_t port = 0);
    ~PortalService();

    PortalService(const PortalService&) = delete;
    PortalService& operator=(const PortalService&) = delete;

    void start();
    void stop();
    std::uint16_t port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace swarmbus::healthfuse
