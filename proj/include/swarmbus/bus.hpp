#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "swarmbus/audit.hpp"
#include "swarmbus/consent.hpp"
#include "swarmbus/model.hpp"
#include "swarmbus/store.hpp"
#include "swarmbus/verifier.hpp"

namespace swarmbus {

/// What one phase hop hands to an adapter: exactly the phase's declared
/// inputFields; everything else stays in bus escrow.
struct Delivery {
    std::string instance_id;
    std::string descriptor_name;
    std::uint32_t descriptor_version = 0;
    std::string phase;
    std::map<std::string, envelope::Value> fields;
};

struct PhaseResult {
    std::map<std::string, envelope::Value> outputs; // keys ⊆ declared outputFields
    std::optional<envelope::Value> verdict_hint;    // diagnostic only; routing reads fields
};

/// The bus's handle on one adapter, local or across a channel. deliver()
/// throws ADAPTER_UNREACHABLE (retryable) or HANDLER_FAULT (fatal to the
/// instance); output-violation checking is the bus's job, not the link's.
class AdapterLink {
public:
    virtual ~AdapterLink() = default;
    virtual PhaseResult deliver(const Delivery& delivery) = 0;
    virtual void close() = 0;
    virtual bool alive() const = 0;
    /// Drops the adapter-side idempotence cache for these instances.
    virtual std::size_t erase_instances(const std::vector<std::string>& instance_ids) = 0;
    virtual std::vector<std::string> residual_scan(const std::string& subject_id) = 0;
};

using PhaseHandler = std::function<PhaseResult(const Delivery&)>;

/// In-process adapter: runs the handler on the stepping thread, with the
/// same at-most-once cache per (instanceId, phase) a remote adapter keeps.
class LocalAdapterLink final : public AdapterLink {
public:
    explicit LocalAdapterLink(PhaseHandler handler) : handler_(std::move(handler)) {}

    PhaseResult deliver(const Delivery& delivery) override;
    void close() override;
    bool alive() const override;
    std::size_t erase_instances(const std::vector<std::string>& instance_ids) override;
    std::vector<std::string> residual_scan(const std::string& subject_id) override;

private:
    PhaseHandler handler_;
    std::mutex mutex_;
    bool closed_ = false;
    std::map<std::pair<std::string, std::string>, PhaseResult> done_; // (instance, phase)
};

/// Payload-free instance view for status queries.
struct StatusView {
    std::string instance_id;
    std::string descriptor_name;
    std::uint32_t descriptor_version = 0;
    InstanceStatus status = InstanceStatus::RUNNING;
    std::string current_phase;
    std::vector<HopRecord> hop_trail; // field names only, chronological
    std::string reason_phase;         // phase that fired a DENIED/FAILED ending
    std::string failure_reason;       // FAILED only
};

envelope::Value to_envelope(const StatusView& s);
StatusView status_view_from_envelope(const envelope::Value& v);

struct BusConfig {
    std::shared_ptr<AuditLog> audit;              // required
    std::shared_ptr<SubjectStore> instance_store; // optional durability
    std::vector<int> retry_backoff_ms = {100, 400, 900};
    std::string actor_id = "bus";
};

/// The integration layer: registries, routing with payload minimization,
/// escrow accounting and the audit hooks. Thread-safe; steps of one
/// instance are strictly serialized, distinct instances run concurrently.
class Bus : public ErasureTarget {
public:
    Bus(BusConfig config, ConsentRegistry& consents);
    ~Bus() override;

    /// channel_principal is the SCRAM-authenticated username of the
    /// connection the identity arrived on; it must equal the adapterId
    /// (IDENTITY_MISMATCH) and must not be empty (UNAUTHENTICATED).
    /// Duplicate adapterId replaces the old link (closing it) and audits
    /// the replacement.
    std::string register_adapter(const AdapterIdentity& identity,
                                 std::shared_ptr<AdapterLink> link,
                                 const std::string& channel_principal);

    /// Verifies against the currently registered adapters; stores the
    /// descriptor only when the report is ok. Duplicate (name, version)
    /// is VERSION_EXISTS. Running instances of other versions never see
    /// the new registration.
    VerificationReport register_descriptor(const SwarmDescriptor& d);

    /// NO_CONSENT unless an active grant covers (subject, descriptor
    /// name as purpose, every declared category). Launch payload keys
    /// must equal the declared launch fields exactly.
    std::string launch(const std::string& descriptor_name, std::uint32_t version,
                       const std::map<std::string, envelope::Value>& launch_payload,
                       const std::string& subject_id, const std::string& consent_token);

    /// Advances one phase: audits DELIVER, hands over exactly the
    /// inputFields, audits RETURN, merges outputs, takes the first
    /// matching transition. ADAPTER_UNREACHABLE leaves it RUNNING.
    SwarmInstance step(const std::string& instance_id);

    /// Steps until terminal (bounded by the phase count); unreachable
    /// adapters are retried per retry_backoff_ms, then the instance
    /// fails. Idempotent on terminal instances.
    SwarmInstance run_to_completion(const std::string& instance_id);

    StatusView status(const std::string& instance_id) const;

    /// Subject-access read of named payload fields, for handing results
    /// back to the person the instance is about. Appends a READ entry
    /// naming the caller, so every disclosure stays on the trail.
    std::map<std::string, envelope::Value> read_fields(const std::string& instance_id,
                                                       const FieldSet& fields,
                                                       const std::string& actor_id,
                                                       ActorClass actor_class);

    std::optional<SwarmDescriptor> find_descriptor(const std::string& name,
                                                   std::uint32_t version) const;
    std::vector<std::pair<std::string, std::uint32_t>> descriptor_versions() const;
    std::vector<AdapterIdentity> adapter_identities() const;
    std::vector<std::string> instance_ids() const;
    /// RUNNING instances reloaded from the store or left over; the server
    /// drives these to completion after a restart.
    std::vector<std::string> running_instance_ids() const;

    ConsentRegistry& consents() { return consents_; }
    AuditLog& audit() { return *config_.audit; }

    std::string erasure_target_name() const override { return "bus"; }
    ErasureOutcome erase_subject_data(const std::string& subject_id) override;
    std::vector<std::string> residual_scan(const std::string& subject_id) const override;

private:
    struct AdapterEntry {
        AdapterIdentity identity;
        std::shared_ptr<AdapterLink> link;
        std::uint64_t order = 0; // registration recency for last-wins roles
    };

    struct InstanceEntry {
        SwarmInstance instance;
        FieldSet escrow; // withheld field names; full payload when idle
        std::unique_ptr<std::mutex> step_mutex = std::make_unique<std::mutex>();
    };

    std::optional<std::pair<AdapterIdentity, std::shared_ptr<AdapterLink>>>
    adapter_for_role(const std::string& role) const;
    void persist_instance(const SwarmInstance& instance);
    void unpersist_instance(const std::string& subject_id, const std::string& instance_id);
    SwarmInstance step_locked(InstanceEntry& entry);

    BusConfig config_;
    ConsentRegistry& consents_;

    mutable std::mutex registry_mutex_; // adapters + descriptors
    std::map<std::string, AdapterEntry> adapters_;
    std::map<std::pair<std::string, std::uint32_t>, SwarmDescriptor> descriptors_;
    std::uint64_t registration_counter_ = 0;

    mutable std::mutex instances_mutex_;
    std::map<std::string, InstanceEntry> instances_;
};

} // namespace swarmbus
