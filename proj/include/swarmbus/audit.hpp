#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "swarmbus/envelope.hpp"
#include "swarmbus/model.hpp"

namespace swarmbus {

enum class AuditAction {
    REGISTER,
    LAUNCH,
    DELIVER,
    RETURN,
    READ,
    WRITE,
    DELETE,
    ERASE,
    CONSENT_GRANT,
    CONSENT_REVOKE,
    SUPPORT_ACCESS,
};

const char* audit_action_label(AuditAction a);
AuditAction audit_action_from_label(const std::string& s);

/// One link of the access-monitoring chain. Entries carry field NAMES and
/// category-level facts only, never payload values, so monitoring survives
/// erasure. `detail` is a short reason string under the same rule.
struct AuditEntry {
    std::uint64_t seq = 0;
    std::string prev_hash_hex; // 64 lowercase hex chars; genesis = all zeros
    std::string hash_hex;      // 64 lowercase hex chars
    std::int64_t timestamp_utc_ms = 0;
    std::string actor_id;
    ActorClass actor_class = ActorClass::software;
    AuditAction action = AuditAction::READ;
    std::string subject_id;  // empty when the action is not subject-scoped
    std::string instance_id; // empty when the action is not instance-scoped
    FieldSet field_names;
    bool redacted = false;
    std::string detail; // optional; omitted from the envelope when empty
};

/// Everything the caller supplies; seq, prevHash and hash are assigned by
/// the log at append time.
struct AuditDraft {
    AuditAction action = AuditAction::READ;
    std::string actor_id;
    ActorClass actor_class = ActorClass::software;
    std::string subject_id;
    std::string instance_id;
    FieldSet field_names;
    std::string detail;
};

/// Envelope with keys sorted canonically; include_hash=false yields the
/// exact byte string the chain digest covers.
envelope::Value to_envelope(const AuditEntry& e, bool include_hash = true);
AuditEntry audit_entry_from_envelope(const envelope::Value& v);

struct AccessRecord;
envelope::Value to_envelope(const AccessRecord& r);

/// hash = SHA-256(raw 32-byte prevHash || canonical bytes of the entry
/// without its hash field), rendered as lowercase hex.
std::string compute_entry_hash(const AuditEntry& e);

constexpr const char* kGenesisPrevHashHex =
    "0000000000000000000000000000000000000000000000000000000000000000";

/// Chain check over already-parsed entries: position i must carry seq i,
/// link to its predecessor's hash (genesis: zero bytes) and match its
/// recomputed digest. Returns the first failing position, or nullopt.
std::optional<std::uint64_t> verify_entries(const std::vector<AuditEntry>& entries);

struct AccessRecord {
    std::string actor_id;
    ActorClass actor_class = ActorClass::software;
    AuditAction action = AuditAction::READ;
    FieldSet field_names;
    std::int64_t timestamp_utc_ms = 0;
    std::string instance_id;
    bool redacted = false;
    std::string detail;
};

/// Serialized-writer audit log. The persisted file is append-only;
/// redaction is derived on read (an ERASE entry for a subject marks that
/// subject's earlier entries redacted) so the hash chain is never
/// rewritten.
class AuditLog {
public:
    virtual ~AuditLog() = default;

    /// Seals the draft into the chain. Durable before returning; a storage
    /// failure throws STORE_UNAVAILABLE and leaves the chain unchanged, so
    /// the caller must treat the guarded action as failed.
    std::uint64_t append(const AuditDraft& draft);

    /// Snapshot with derived redaction applied.
    std::vector<AuditEntry> entries() const;

    std::uint64_t size() const;

    /// Recomputes the whole chain from the raw in-memory entries.
    std::optional<std::uint64_t> verify_chain() const;

    /// All entries for the subject, chronological, redacted ones included
    /// (their field names are preserved by design).
    std::vector<AccessRecord> who_accessed(const std::string& subject_id) const;

protected:
    /// Called under the writer lock; must make the entry durable or throw.
    virtual void persist(const AuditEntry& sealed) = 0;

    mutable std::mutex mutex_;
    std::vector<AuditEntry> entries_; // raw, as persisted (redacted flag as written)
};

class MemoryAuditLog final : public AuditLog {
protected:
    void persist(const AuditEntry&) override {}
};

/// One canonical envelope per line, UTF-8, LF-terminated. On open an
/// existing file is loaded and its chain verified; a broken chain refuses
/// to load rather than silently extending a tampered log.
class FileAuditLog final : public AuditLog {
public:
    explicit FileAuditLog(const std::string& path, bool fsync_each = false);
    ~FileAuditLog() override;

    FileAuditLog(const FileAuditLog&) = delete;
    FileAuditLog& operator=(const FileAuditLog&) = delete;

    const std::string& path() const { return path_; }

protected:
    void persist(const AuditEntry& sealed) override;

private:
    std::string path_;
    bool fsync_each_ = false;
    int fd_ = -1;
};

struct FileChainCheck {
    std::optional<std::uint64_t> first_bad_seq; // nullopt = chain ok
    std::uint64_t entries_checked = 0;
    std::vector<AuditEntry> entries; // parsed prefix up to the first bad line
};

/// Strict file-level verification: every line must be byte-identical to
/// the canonical encoding of its own content (so any surviving-the-parser
/// mutation still trips), then the chain is recomputed. Lines are indexed
/// from 0; a malformed line is reported at its index.
FileChainCheck verify_audit_file(const std::string& path);

/// Lenient load for read paths (who_accessed over a copied log); throws
/// IO_ERROR when the file cannot be read, MALFORMED_MESSAGE on bad lines.
std::vector<AuditEntry> read_audit_file(const std::string& path);

/// Derived-redaction rule shared by every read path.
void apply_derived_redaction(std::vector<AuditEntry>& entries);

} // namespace swarmbus
