#include "swarmbus/audit.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "swarmbus/crypto.hpp"
#include "swarmbus/errors.hpp"

namespace swarmbus {

namespace {

constexpr const char* kActionLabels[] = {
    "REGISTER", "LAUNCH",        "DELIVER",        "RETURN",         "READ",
    "WRITE",    "DELETE",        "ERASE",          "CONSENT_GRANT",  "CONSENT_REVOKE",
    "SUPPORT_ACCESS",
};

} // namespace

const char* audit_action_label(AuditAction a) {
    return kActionLabels[static_cast<int>(a)];
}

AuditAction audit_action_from_label(const std::string& s) {
    for (int i = 0; i < static_cast<int>(std::size(kActionLabels)); ++i)
        if (s == kActionLabels[i]) return static_cast<AuditAction>(i);
    fail(Errc::MALFORMED_MESSAGE, "unknown audit action: " + s);
}

envelope::Value to_envelope(const AuditEntry& e, bool include_hash) {
    envelope::Value v;
    v["action"] = audit_action_label(e.action);
    v["actorClass"] = actor_class_label(e.actor_class);
    v["actorId"] = e.actor_id;
    if (!e.detail.empty()) v["detail"] = e.detail;
    v["fieldNames"] = envelope::Value::array();
    for (const auto& f : e.field_names) v["fieldNames"].push_back(f);
    if (include_hash) v["hash"] = e.hash_hex;
    v["instanceId"] = e.instance_id;
    v["prevHash"] = e.prev_hash_hex;
    v["redacted"] = e.redacted;
    v["seq"] = e.seq;
    v["subjectId"] = e.subject_id;
    v["timestampUtc"] = e.timestamp_utc_ms;
    return v;
}

namespace {

void check_keys(const envelope::Value& v, std::initializer_list<const char*> required,
                std::initializer_list<const char*> optional, const char* what) {
    if (!v.is_object()) fail(Errc::MALFORMED_MESSAGE, std::string(what) + ": not an object");
    for (const char* k : required)
        if (!v.contains(k)) fail(Errc::MALFORMED_MESSAGE, std::string(what) + ": missing key " + k);
    for (auto it = v.begin(); it != v.end(); ++it) {
        const std::string& key = it.key();
        bool known = std::any_of(required.begin(), required.end(),
                                 [&](const char* k) { return key == k; }) ||
                     std::any_of(optional.begin(), optional.end(),
                                 [&](const char* k) { return key == k; });
        if (!known) fail(Errc::MALFORMED_MESSAGE, std::string(what) + ": unknown key " + key);
    }
}

std::string require_string(const envelope::Value& v, const char* key) {
    if (!v.at(key).is_string()) fail(Errc::MALFORMED_MESSAGE, std::string("not a string: ") + key);
    return v.at(key).get<std::string>();
}

bool is_hex64(const std::string& s) {
    if (s.size() != 64) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
    });
}

} // namespace

AuditEntry audit_entry_from_envelope(const envelope::Value& v) {
    check_keys(v,
               {"action", "actorClass", "actorId", "fieldNames", "hash", "instanceId",
                "prevHash", "redacted", "seq", "subjectId", "timestampUtc"},
               {"detail"}, "audit entry");
    AuditEntry e;
    e.action = audit_action_from_label(require_string(v, "action"));
    auto cls = actor_class_from_label(require_string(v, "actorClass"));
    if (!cls) fail(Errc::MALFORMED_MESSAGE, "unknown actorClass");
    e.actor_class = *cls;
    e.actor_id = require_string(v, "actorId");
    if (v.contains("detail")) {
        e.detail = require_string(v, "detail");
        if (e.detail.empty()) fail(Errc::MALFORMED_MESSAGE, "audit entry: empty detail present");
    }
    if (!v.at("fieldNames").is_array()) fail(Errc::MALFORMED_MESSAGE, "fieldNames: not an array");
    for (const auto& f : v.at("fieldNames")) {
        if (!f.is_string()) fail(Errc::MALFORMED_MESSAGE, "fieldNames: non-string element");
        e.field_names.insert(f.get<std::string>());
    }
    e.hash_hex = require_string(v, "hash");
    e.instance_id = require_string(v, "instanceId");
    e.prev_hash_hex = require_string(v, "prevHash");
    if (!is_hex64(e.hash_hex) || !is_hex64(e.prev_hash_hex))
        fail(Errc::MALFORMED_MESSAGE, "audit entry: hash fields must be 64 lowercase hex chars");
    if (!v.at("redacted").is_boolean()) fail(Errc::MALFORMED_MESSAGE, "redacted: not a boolean");
    e.redacted = v.at("redacted").get<bool>();
    if (!v.at("seq").is_number_unsigned())
        fail(Errc::MALFORMED_MESSAGE, "seq: not a non-negative integer");
    e.seq = v.at("seq").get<std::uint64_t>();
    if (!v.at("subjectId").is_string()) fail(Errc::MALFORMED_MESSAGE, "subjectId: not a string");
    e.subject_id = v.at("subjectId").get<std::string>();
    if (!v.at("timestampUtc").is_number_integer())
        fail(Errc::MALFORMED_MESSAGE, "timestampUtc: not an integer");
    e.timestamp_utc_ms = v.at("timestampUtc").get<std::int64_t>();
    return e;
}

std::string compute_entry_hash(const AuditEntry& e) {
    std::string prev_raw = crypto::from_hex(e.prev_hash_hex);
    std::string body = envelope::encode(to_envelope(e, /*include_hash=*/false));
    return crypto::to_hex(crypto::sha256(prev_raw + body));
}

std::optional<std::uint64_t> verify_entries(const std::vector<AuditEntry>& entries) {
    for (std::uint64_t i = 0; i < entries.size(); ++i) {
        const AuditEntry& e = entries[i];
        if (e.seq != i) return i;
        const std::string& expected_prev =
            i == 0 ? std::string(kGenesisPrevHashHex) : entries[i - 1].hash_hex;
        if (e.prev_hash_hex != expected_prev) return i;
        if (compute_entry_hash(e) != e.hash_hex) return i;
    }
    return std::nullopt;
}

void apply_derived_redaction(std::vector<AuditEntry>& entries) {
    std::map<std::string, std::uint64_t> last_erase; // subjectId -> highest ERASE seq
    for (const auto& e : entries)
        if (e.action == AuditAction::ERASE && !e.subject_id.empty())
            last_erase[e.subject_id] = e.seq;
    for (auto& e : entries) {
        if (e.subject_id.empty()) continue;
        auto it = last_erase.find(e.subject_id);
        if (it != last_erase.end() && e.seq < it->second) e.redacted = true;
    }
}

std::uint64_t AuditLog::append(const AuditDraft& draft) {
    std::lock_guard lock(mutex_);
    AuditEntry e;
    e.seq = entries_.size();
    e.prev_hash_hex = entries_.empty() ? kGenesisPrevHashHex : entries_.back().hash_hex;
    e.timestamp_utc_ms = now_utc_ms();
    e.actor_id = draft.actor_id;
    e.actor_class = draft.actor_class;
    e.action = draft.action;
    e.subject_id = draft.subject_id;
    e.instance_id = draft.instance_id;
    e.field_names = draft.field_names;
    e.redacted = false;
    e.detail = draft.detail;
    e.hash_hex = compute_entry_hash(e);
    persist(e); // throws STORE_UNAVAILABLE on failure; chain stays unchanged
    entries_.push_back(std::move(e));
    return entries_.back().seq;
}

std::vector<AuditEntry> AuditLog::entries() const {
    std::lock_guard lock(mutex_);
    std::vector<AuditEntry> out = entries_;
    apply_derived_redaction(out);
    return out;
}

std::uint64_t AuditLog::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::optional<std::uint64_t> AuditLog::verify_chain() const {
    std::lock_guard lock(mutex_);
    return verify_entries(entries_);
}

envelope::Value to_envelope(const AccessRecord& r) {
    envelope::Value v;
    v["action"] = audit_action_label(r.action);
    v["actorClass"] = actor_class_label(r.actor_class);
    v["actorId"] = r.actor_id;
    if (!r.detail.empty()) v["detail"] = r.detail;
    v["fieldNames"] = envelope::Value::array();
    for (const auto& f : r.field_names) v["fieldNames"].push_back(f);
    if (!r.instance_id.empty()) v["instanceId"] = r.instance_id;
    v["redacted"] = r.redacted;
    v["timestampUtc"] = r.timestamp_utc_ms;
    return v;
}

std::vector<AccessRecord> AuditLog::who_accessed(const std::string& subject_id) const {
    std::vector<AccessRecord> out;
    for (const AuditEntry& e : entries()) {
        if (e.subject_id != subject_id) continue;
        out.push_back({e.actor_id, e.actor_class, e.action, e.field_names, e.timestamp_utc_ms,
                       e.instance_id, e.redacted, e.detail});
    }
    return out;
}

FileAuditLog::FileAuditLog(const std::string& path, bool fsync_each)
    : path_(path), fsync_each_(fsync_each) {
    std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
    }
    if (::access(path.c_str(), F_OK) == 0) {
        FileChainCheck check = verify_audit_file(path);
        if (check.first_bad_seq)
            fail(Errc::STORE_UNAVAILABLE,
                 "audit log " + path + " fails verification at seq " +
                     std::to_string(*check.first_bad_seq));
        entries_ = std::move(check.entries);
    }
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0600);
    if (fd_ < 0)
        fail(Errc::STORE_UNAVAILABLE, "cannot open audit log " + path + ": " + std::strerror(errno));
}

FileAuditLog::~FileAuditLog() {
    if (fd_ >= 0) ::close(fd_);
}

void FileAuditLog::persist(const AuditEntry& sealed) {
    std::string line = envelope::encode(to_envelope(sealed)) + "\n";
    const char* p = line.data();
    std::size_t left = line.size();
    while (left > 0) {
        ssize_t n = ::write(fd_, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail(Errc::STORE_UNAVAILABLE, std::string("audit write failed: ") + std::strerror(errno));
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
    if (fsync_each_ && ::fsync(fd_) != 0)
        fail(Errc::STORE_UNAVAILABLE, std::string("audit fsync failed: ") + std::strerror(errno));
}

FileChainCheck verify_audit_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::IO_ERROR, "cannot read audit log " + path);
    FileChainCheck check;
    std::string line;
    std::uint64_t index = 0;
    std::string prev_hash = kGenesisPrevHashHex;
    while (std::getline(in, line)) {
        AuditEntry e;
        try {
            envelope::Value v = envelope::decode(line);
            // Any byte change that still parses must change either the
            // canonical bytes or the decoded content; requiring the line to
            // BE its own canonical encoding closes the first escape route.
            if (envelope::encode(v) != line)
                fail(Errc::MALFORMED_MESSAGE, "non-canonical line");
            e = audit_entry_from_envelope(v);
        } catch (const SwarmError&) {
            check.first_bad_seq = index;
            return check;
        }
        if (e.seq != index || e.prev_hash_hex != prev_hash || compute_entry_hash(e) != e.hash_hex) {
            check.first_bad_seq = index;
            return check;
        }
        prev_hash = e.hash_hex;
        check.entries.push_back(std::move(e));
        ++index;
        ++check.entries_checked;
    }
    return check;
}

std::vector<AuditEntry> read_audit_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::IO_ERROR, "cannot read audit log " + path);
    std::vector<AuditEntry> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(audit_entry_from_envelope(envelope::decode(line)));
    }
    return out;
}

} // namespace swarmbus
