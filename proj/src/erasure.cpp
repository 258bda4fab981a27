#include "swarmbus/erasure.hpp"

#include "swarmbus/errors.hpp"

namespace swarmbus {

envelope::Value to_envelope(const ErasureReport& r) {
    envelope::Value v;
    v["cancelledInstances"] = envelope::Value::array();
    for (const auto& id : r.cancelled_instances) v["cancelledInstances"].push_back(id);
    v["perStore"] = envelope::Value::array();
    for (const auto& [store, n] : r.per_store) {
        envelope::Value row;
        row["itemsDeleted"] = n;
        row["storeName"] = store;
        v["perStore"].push_back(row);
    }
    v["residualFindings"] = envelope::Value::array();
    for (const auto& f : r.residual_findings) v["residualFindings"].push_back(f);
    v["startedAtUtc"] = r.started_at_ms;
    v["subjectId"] = r.subject_id;
    return v;
}

void ErasureEngine::register_target(std::shared_ptr<ErasureTarget> target) {
    std::lock_guard lock(mutex_);
    targets_.push_back(std::move(target));
}

ErasureReport ErasureEngine::erase_subject(const std::string& subject_id,
                                           const std::string& actor_id) {
    std::lock_guard lock(mutex_);
    ErasureReport report;
    report.subject_id = subject_id;
    report.started_at_ms = now_utc_ms();

    std::vector<ErasureTarget*> reachable;
    for (const auto& target : targets_) {
        try {
            ErasureOutcome outcome = target->erase_subject_data(subject_id);
            report.per_store.emplace_back(outcome.target_name, outcome.items_deleted);
            for (auto& id : outcome.cancelled_instances)
                report.cancelled_instances.push_back(std::move(id));
            for (auto& f : outcome.residual_findings)
                report.residual_findings.push_back(std::move(f));
            reachable.push_back(target.get());
        } catch (const SwarmError& e) {
            report.residual_findings.push_back("target " + target->erasure_target_name() +
                                               " unreachable: " + e.what());
        }
    }
    for (ErasureTarget* target : reachable)
        for (auto& f : target->residual_scan(subject_id))
            report.residual_findings.push_back(std::move(f));

    AuditDraft d;
    d.action = AuditAction::ERASE;
    d.actor_id = actor_id;
    d.subject_id = subject_id;
    if (!report.residual_findings.empty())
        d.detail = "residual findings: " + std::to_string(report.residual_findings.size());
    audit_.append(d);
    return report;
}

} // namespace swarmbus
