#pragma once

#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "swarmbus/audit.hpp"
#include "swarmbus/model.hpp"
#include "swarmbus/store.hpp"

namespace swarmbus {

/// Purposes that are not descriptor names.
inline constexpr const char* kPurposeSupport = "support";
inline constexpr const char* kPurposeRecords = "records";

struct ConsentRecord {
    std::string token; // unique, opaque
    std::string subject_id;
    std::string purpose; // descriptor name, "support" or "records"
    std::set<DataCategory> categories;
    std::int64_t granted_at_ms = 0;
    std::optional<std::int64_t> revoked_at_ms; // a token is never reactivated

    bool active() const { return !revoked_at_ms.has_value(); }
};

envelope::Value to_envelope(const ConsentRecord& r);
ConsentRecord consent_record_from_envelope(const envelope::Value& v);

/// Linearizable registry of purpose- and category-scoped grants. Every
/// grant and revocation lands in the audit chain; the entry's fieldNames
/// carry the category labels (names, not values, as everywhere). With a
/// store attached, records persist (item key = token) and reload on
/// construction.
class ConsentRegistry : public ErasureTarget {
public:
    explicit ConsentRegistry(AuditLog& audit, std::shared_ptr<SubjectStore> store = nullptr);

    /// Returns the fresh token. Categories must be non-empty.
    std::string grant(const std::string& subject_id, const std::string& purpose,
                      const std::set<DataCategory>& categories,
                      const std::string& actor_id);

    /// UNKNOWN_TOKEN when the token was never issued; revoking twice is a
    /// no-op (already inactive).
    void revoke(const std::string& token, const std::string& actor_id);

    /// True iff an active record for the subject matches the purpose and
    /// its categories are a superset of the requested set.
    bool check(const std::string& subject_id, const std::string& purpose,
               const std::set<DataCategory>& categories) const;

    std::optional<ConsentRecord> find(const std::string& token) const;
    std::vector<ConsentRecord> for_subject(const std::string& subject_id) const;

    /// Drops the subject's records entirely (erasure path; the audit chain
    /// keeps the redacted CONSENT_* history).
    std::size_t erase_subject(const std::string& subject_id);

    std::vector<ConsentRecord> snapshot() const;

    std::string erasure_target_name() const override { return "consents"; }
    ErasureOutcome erase_subject_data(const std::string& subject_id) override;
    std::vector<std::string> residual_scan(const std::string& subject_id) const override;

private:
    AuditLog& audit_;
    std::shared_ptr<SubjectStore> store_;
    mutable std::mutex mutex_;
    std::vector<ConsentRecord> records_; // grant order
};

} // namespace swarmbus
