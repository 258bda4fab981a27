#include "swarmbus/consent.hpp"

#include <algorithm>

#include "swarmbus/errors.hpp"

namespace swarmbus {

envelope::Value to_envelope(const ConsentRecord& r) {
    envelope::Value v;
    v["categories"] = envelope::Value::array();
    for (DataCategory c : r.categories) v["categories"].push_back(category_label(c));
    v["grantedAtUtc"] = r.granted_at_ms;
    v["purpose"] = r.purpose;
    if (r.revoked_at_ms) v["revokedAtUtc"] = *r.revoked_at_ms;
    v["subjectId"] = r.subject_id;
    v["token"] = r.token;
    return v;
}

ConsentRecord consent_record_from_envelope(const envelope::Value& v) {
    if (!v.is_object()) fail(Errc::MALFORMED_MESSAGE, "consent record: not an object");
    for (const char* k : {"categories", "grantedAtUtc", "purpose", "subjectId", "token"})
        if (!v.contains(k))
            fail(Errc::MALFORMED_MESSAGE, std::string("consent record: missing key ") + k);
    ConsentRecord r;
    for (const auto& c : v.at("categories")) {
        auto cat = category_from_label(c.get<std::string>());
        if (!cat) fail(Errc::MALFORMED_MESSAGE, "consent record: unknown category");
        r.categories.insert(*cat);
    }
    r.granted_at_ms = v.at("grantedAtUtc").get<std::int64_t>();
    r.purpose = v.at("purpose").get<std::string>();
    if (v.contains("revokedAtUtc")) r.revoked_at_ms = v.at("revokedAtUtc").get<std::int64_t>();
    r.subject_id = v.at("subjectId").get<std::string>();
    r.token = v.at("token").get<std::string>();
    return r;
}

namespace {

FieldSet category_names(const std::set<DataCategory>& categories) {
    FieldSet names;
    for (DataCategory c : categories) names.insert(category_label(c));
    return names;
}

} // namespace

ConsentRegistry::ConsentRegistry(AuditLog& audit, std::shared_ptr<SubjectStore> store)
    : audit_(audit), store_(std::move(store)) {
    if (!store_) return;
    for (const std::string& subject : store_->subjects())
        for (const std::string& token : store_->list_items(subject))
            if (auto v = store_->get(subject, token))
                records_.push_back(consent_record_from_envelope(*v));
    std::sort(records_.begin(), records_.end(),
              [](const ConsentRecord& a, const ConsentRecord& b) {
                  return a.granted_at_ms < b.granted_at_ms;
              });
}

std::string ConsentRegistry::grant(const std::string& subject_id, const std::string& purpose,
                                   const std::set<DataCategory>& categories,
                                   const std::string& actor_id) {
    if (categories.empty()) fail(Errc::INVALID_ARGUMENT, "consent grant needs categories");
    if (!is_store_key(subject_id)) fail(Errc::INVALID_ARGUMENT, "bad subject id");
    ConsentRecord r;
    r.token = fresh_id();
    r.subject_id = subject_id;
    r.purpose = purpose;
    r.categories = categories;
    r.granted_at_ms = now_utc_ms();
    {
        std::lock_guard lock(mutex_);
        records_.push_back(r);
        if (store_) store_->put(subject_id, r.token, to_envelope(r));
    }
    AuditDraft d;
    d.action = AuditAction::CONSENT_GRANT;
    d.actor_id = actor_id;
    d.subject_id = subject_id;
    d.field_names = category_names(categories);
    d.detail = "purpose=" + purpose;
    audit_.append(d);
    return r.token;
}

void ConsentRegistry::revoke(const std::string& token, const std::string& actor_id) {
    std::string subject_id, purpose;
    std::set<DataCategory> categories;
    {
        std::lock_guard lock(mutex_);
        auto it = std::find_if(records_.begin(), records_.end(),
                               [&](const ConsentRecord& r) { return r.token == token; });
        if (it == records_.end()) fail(Errc::UNKNOWN_TOKEN, "no consent token " + token);
        if (it->active()) it->revoked_at_ms = now_utc_ms();
        subject_id = it->subject_id;
        purpose = it->purpose;
        categories = it->categories;
        if (store_) store_->put(subject_id, token, to_envelope(*it));
    }
    AuditDraft d;
    d.action = AuditAction::CONSENT_REVOKE;
    d.actor_id = actor_id;
    d.subject_id = subject_id;
    d.field_names = category_names(categories);
    d.detail = "purpose=" + purpose;
    audit_.append(d);
}

bool ConsentRegistry::check(const std::string& subject_id, const std::string& purpose,
                            const std::set<DataCategory>& categories) const {
    std::lock_guard lock(mutex_);
    return std::any_of(records_.begin(), records_.end(), [&](const ConsentRecord& r) {
        return r.active() && r.subject_id == subject_id && r.purpose == purpose &&
               std::includes(r.categories.begin(), r.categories.end(), categories.begin(),
                             categories.end());
    });
}

std::optional<ConsentRecord> ConsentRegistry::find(const std::string& token) const {
    std::lock_guard lock(mutex_);
    auto it = std::find_if(records_.begin(), records_.end(),
                           [&](const ConsentRecord& r) { return r.token == token; });
    if (it == records_.end()) return std::nullopt;
    return *it;
}

std::vector<ConsentRecord> ConsentRegistry::for_subject(const std::string& subject_id) const {
    std::lock_guard lock(mutex_);
    std::vector<ConsentRecord> out;
    for (const auto& r : records_)
        if (r.subject_id == subject_id) out.push_back(r);
    return out;
}

std::size_t ConsentRegistry::erase_subject(const std::string& subject_id) {
    std::lock_guard lock(mutex_);
    std::size_t before = records_.size();
    std::erase_if(records_, [&](const ConsentRecord& r) { return r.subject_id == subject_id; });
    if (store_) store_->erase_subject(subject_id);
    return before - records_.size();
}

std::vector<ConsentRecord> ConsentRegistry::snapshot() const {
    std::lock_guard lock(mutex_);
    return records_;
}

ErasureOutcome ConsentRegistry::erase_subject_data(const std::string& subject_id) {
    ErasureOutcome out;
    out.target_name = erasure_target_name();
    out.items_deleted = erase_subject(subject_id);
    return out;
}

std::vector<std::string> ConsentRegistry::residual_scan(const std::string& subject_id) const {
    std::vector<std::string> findings;
    {
        std::lock_guard lock(mutex_);
        for (const auto& r : records_)
            if (r.subject_id == subject_id) findings.push_back("consents/" + r.token);
    }
    if (store_)
        for (auto& f : store_->residual_scan(subject_id)) findings.push_back(std::move(f));
    return findings;
}

} // namespace swarmbus
