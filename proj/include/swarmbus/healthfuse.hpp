#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "swarmbus/adapter.hpp"
#include "swarmbus/bus.hpp"
#include "swarmbus/erasure.hpp"
#include "swarmbus/scram.hpp"
#include "swarmbus/server.hpp"

namespace swarmbus::healthfuse {

inline constexpr const char* kDescriptorName = "issue_ehic";
inline constexpr const char* kPortalActor = "healthfuse-portal";

/// What each mock registry knows about one citizen. Reference data for the
/// institution adapters, not subject records (those live in the stores).
struct CitizenProfile {
    std::string person_id;
    bool identity_valid = true;
    bool employed = true;
    bool income_declared = true;
    bool income_confirmed = true;
    bool taxes_paid = true;
    bool has_dividends = false;
    bool dividend_statistics_ok = true;
};

envelope::Value to_envelope(const CitizenProfile& p);
CitizenProfile citizen_from_envelope(const envelope::Value& v);

/// Populated once at startup and then shared read-only (the handlers hold
/// shared_ptr<const>), so no locking.
class CitizenDirectory {
public:
    void put(CitizenProfile profile);
    std::optional<CitizenProfile> find(const std::string& person_id) const;
    std::vector<std::string> person_ids() const;

    std::string encode() const;
    static CitizenDirectory decode(std::string_view bytes);
    static CitizenDirectory load_file(const std::string& path);
    void save_file(const std::string& path) const;

    /// The four demo citizens: a dividends case, a plain employee, a tax
    /// debtor, and an unemployed person.
    static CitizenDirectory demo_fixtures();

private:
    std::map<std::string, CitizenProfile> citizens_;
};

/// Six phases in the order a citizen used to walk them between buildings:
/// identity card, employment proof, income declaration and confirmation,
/// tax receipt, dividend statistics (only when dividends exist), and the
/// issuing decision. A failed check routes forward to issueDecision with
/// the deny flag set, so every request ends in an auditable decision.
SwarmDescriptor build_issue_ehic_descriptor();

/// The five institution adapters with the minimal grants the descriptor
/// needs: each may run exactly its phases and read only the categories
/// those phases deliver.
std::vector<AdapterIdentity> demo_adapter_identities();
AdapterIdentity demo_identity_for_role(const std::string& role);

/// Adapter host answering every phase the given role serves, from fixture
/// data. Phase handlers never see fields outside their declared inputs.
std::shared_ptr<AdapterHost> make_institution_host(
    const std::string& role, std::shared_ptr<const CitizenDirectory> citizens);

std::vector<std::string> demo_roles();

/// Outcome handed back to the citizen. Exactly one of card_id (ISSUED)
/// and reason_phase (DENIED) is set.
struct InsuranceDecision {
    std::string instance_id;
    InstanceStatus outcome = InstanceStatus::RUNNING;
    std::string reason_phase;
    std::string card_id;
};

envelope::Value to_envelope(const InsuranceDecision& d);

/// Chunked per-subject file storage with every access audited under the
/// medical category. Content round-trips bit-identically up to 16 MiB.
class MedicalRecordStore : public ErasureTarget {
public:
    static constexpr std::size_t kChunkSize = 1u << 20;
    static constexpr std::size_t kMaxRecordBytes = 16u << 20;

    struct RecordInfo {
        std::string record_id;
        std::string filename;
        std::size_t size = 0;
        std::int64_t uploaded_at_ms = 0;
    };

    MedicalRecordStore(AuditLog& audit, ConsentRegistry& consents,
                       std::shared_ptr<SubjectStore> store);

    std::string upload(const std::string& subject_id, const std::string& filename,
                       const std::string& content, const std::string& actor_id);
    std::string download(const std::string& subject_id, const std::string& record_id,
                         const std::string& actor_id);
    void remove(const std::string& subject_id, const std::string& record_id,
                const std::string& actor_id);
    std::vector<RecordInfo> list(const std::string& subject_id) const;

    std::string erasure_target_name() const override { return "medical-records"; }
    ErasureOutcome erase_subject_data(const std::string& subject_id) override;
    std::vector<std::string> residual_scan(const std::string& subject_id) const override;

private:
    void require_consent(const std::string& subject_id) const;
    std::optional<std::string> owner_of(const std::string& record_id) const;

    AuditLog& audit_;
    ConsentRegistry& consents_;
    std::shared_ptr<SubjectStore> store_;
    mutable std::mutex mutex_; // serializes per-record chunk sequences
    std::map<std::string, std::string> owners_; // record id -> subject
};

/// The one door through which a human may see subject data, and only with
/// an active support-purpose consent. Every view lands on the audit trail
/// as SUPPORT_ACCESS by a human-class actor.
class SupportDesk {
public:
    struct TicketView {
        std::string ticket_id;
        std::string subject_id;
        std::string description;
        std::int64_t opened_at_ms = 0;
    };

    SupportDesk(AuditLog& audit, ConsentRegistry& consents);

    void register_staff(const std::string& staff_id);
    std::string open_ticket(const std::string& subject_id, const std::string& description,
                            const std::string& consent_token);
    TicketView view(const std::string& staff_id, const std::string& ticket_id);
    std::vector<std::string> tickets_for(const std::string& subject_id) const;

private:
    struct Ticket {
        std::string ticket_id;
        std::string subject_id;
        std::string description;
        std::string consent_token;
        std::int64_t opened_at_ms = 0;
    };

    AuditLog& audit_;
    ConsentRegistry& consents_;
    mutable std::mutex mutex_;
    std::set<std::string> staff_;
    std::map<std::string, Ticket> tickets_;
};

/// One fully wired deployment: audit log, consent registry, bus, record
/// store, support desk, erasure engine, and the credential store for
/// citizens, operators, and adapters. With an empty data_dir everything
/// lives in memory; otherwise state sits under data_dir and survives
/// restarts.
struct WorldConfig {
    std::string data_dir;       // "" = in-memory
    bool register_local_adapters = true;
    bool seed_demo_data = true; // fixtures and login credentials
};

class HealthfuseWorld {
public:
    explicit HealthfuseWorld(WorldConfig config = {});

    AuditLog& audit() { return *audit_; }
    Bus& bus() { return *bus_; }
    ConsentRegistry& consents() { return *consents_; }
    MedicalRecordStore& records() { return *records_; }
    SupportDesk& support() { return *support_; }
    ErasureEngine& erasure() { return *erasure_; }
    std::shared_ptr<CredentialStore> credentials() { return credentials_; }
    std::shared_ptr<const CitizenDirectory> citizens() const { return citizens_; }

    /// Launches issue_ehic for the citizen. The consent check and every
    /// later disclosure run inside the bus.
    std::string request_insurance(const std::string& subject_id,
                                  const std::string& insurance_type);
    InsuranceDecision run_and_decide(const std::string& instance_id);
    InsuranceDecision decision(const std::string& instance_id);

private:
    std::shared_ptr<AuditLog> audit_;
    std::shared_ptr<ConsentRegistry> consents_;
    std::shared_ptr<Bus> bus_;
    std::shared_ptr<MedicalRecordStore> records_;
    std::shared_ptr<SupportDesk> support_;
    std::shared_ptr<ErasureEngine> erasure_;
    std::shared_ptr<MemoryCredentialStore> credentials_;
    std::shared_ptr<CitizenDirectory> citizens_mutable_;
    std::shared_ptr<const CitizenDirectory> citizens_;
    std::vector<std::shared_ptr<AdapterHost>> hosts_;
};

/// Demo login secrets, shipped with the fixtures so the scenarios and the
/// HTTP flow can authenticate. Not production key material.
struct DemoCredential {
    std::string username;
    std::string password;
};
std::vector<DemoCredential> demo_credentials();
void seed_credentials(MemoryCredentialStore& store);

} // namespace swarmbus::healthfuse
