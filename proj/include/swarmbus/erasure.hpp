#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "swarmbus/audit.hpp"
#include "swarmbus/store.hpp"

namespace swarmbus {

struct ErasureReport {
    std::string subject_id;
    std::int64_t started_at_ms = 0;
    std::vector<std::pair<std::string, std::size_t>> per_store; // (targetName, itemsDeleted)
    std::vector<std::string> cancelled_instances;
    std::vector<std::string> residual_findings;

    bool success() const { return residual_findings.empty(); }
};

envelope::Value to_envelope(const ErasureReport& r);

/// Right-to-erasure propagation: commands every registered target (stores,
/// the bus, the consent registry), then walks them all for residuals, then
/// appends the ERASE entry that triggers derived redaction of the
/// subject's audit history. Erasure needs no consent.
class ErasureEngine {
public:
    explicit ErasureEngine(AuditLog& audit) : audit_(audit) {}

    void register_target(std::shared_ptr<ErasureTarget> target);

    /// An unreachable target does not abort the pass; it lands in
    /// residual_findings so the caller can retry. The ERASE entry is
    /// appended either way (idempotent retries append another).
    ErasureReport erase_subject(const std::string& subject_id, const std::string& actor_id);

private:
    AuditLog& audit_;
    std::mutex mutex_; // serializes erasure passes
    std::vector<std::shared_ptr<ErasureTarget>> targets_;
};

} // namespace swarmbus
