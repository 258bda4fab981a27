#include "swarmbus/healthfuse.hpp"

#include <fstream>
#include <sstream>

#include "swarmbus/crypto.hpp"
#include "swarmbus/errors.hpp"

namespace swarmbus::healthfuse {

envelope::Value to_envelope(const CitizenProfile& p) {
    envelope::Value v;
    v["dividendStatisticsOk"] = p.dividend_statistics_ok;
    v["employed"] = p.employed;
    v["hasDividends"] = p.has_dividends;
    v["identityValid"] = p.identity_valid;
    v["incomeConfirmed"] = p.income_confirmed;
    v["incomeDeclared"] = p.income_declared;
    v["personId"] = p.person_id;
    v["taxesPaid"] = p.taxes_paid;
    return v;
}

CitizenProfile citizen_from_envelope(const envelope::Value& v) {
    CitizenProfile p;
    p.dividend_statistics_ok = v.at("dividendStatisticsOk").get<bool>();
    p.employed = v.at("employed").get<bool>();
    p.has_dividends = v.at("hasDividends").get<bool>();
    p.identity_valid = v.at("identityValid").get<bool>();
    p.income_confirmed = v.at("incomeConfirmed").get<bool>();
    p.income_declared = v.at("incomeDeclared").get<bool>();
    p.person_id = v.at("personId").get<std::string>();
    p.taxes_paid = v.at("taxesPaid").get<bool>();
    return p;
}

void CitizenDirectory::put(CitizenProfile profile) {
    citizens_[profile.person_id] = std::move(profile);
}

std::optional<CitizenProfile> CitizenDirectory::find(const std::string& person_id) const {
    auto it = citizens_.find(person_id);
    if (it == citizens_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> CitizenDirectory::person_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : citizens_) out.push_back(id);
    return out;
}

std::string CitizenDirectory::encode() const {
    envelope::Value v;
    v["citizens"] = envelope::Value::array();
    for (const auto& [_, profile] : citizens_) v["citizens"].push_back(to_envelope(profile));
    return envelope::encode(v);
}

CitizenDirectory CitizenDirectory::decode(std::string_view bytes) {
    CitizenDirectory dir;
    envelope::Value v = envelope::decode(bytes);
    for (const auto& c : v.at("citizens")) dir.put(citizen_from_envelope(c));
    return dir;
}

CitizenDirectory CitizenDirectory::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::IO_ERROR, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return decode(buf.str());
}

void CitizenDirectory::save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::IO_ERROR, "cannot write " + path);
    out << encode() << '\n';
}

CitizenDirectory CitizenDirectory::demo_fixtures() {
    CitizenDirectory dir;
    dir.put({.person_id = "ana.pop", .has_dividends = true});
    dir.put({.person_id = "ion.vasile"});
    dir.put({.person_id = "radu.ilie", .taxes_paid = false});
    dir.put({.person_id = "maria.toma", .employed = false});
    return dir;
}

SwarmDescriptor build_issue_ehic_descriptor() {
    using C = DataCategory;
    using S = Sensitivity;
    SwarmDescriptor d;
    d.name = kDescriptorName;
    d.version = 1;
    d.entry_phase = "verifyIdentity";
    d.fields = {
        {"person_id", C::identity, S::personal},
        {"insurance_type", C::decision, S::non_personal},
        {"has_dividends", C::dividend, S::personal},
        {"identity_card", C::identity, S::personal},
        {"employment_proof", C::employment, S::personal},
        {"income_declaration", C::income, S::personal},
        {"taxes_due", C::tax, S::personal},
        {"tax_receipt", C::tax, S::personal},
        {"dividend_statistics", C::dividend, S::personal},
        {"deny", C::decision, S::personal},
        {"deny_phase", C::decision, S::personal},
        {"decision", C::decision, S::personal},
        {"card_id", C::decision, S::personal},
        {"reason_phase", C::decision, S::personal},
    };

    auto deny_to = [](const std::string& next) {
        Transition t;
        t.guard_field = "deny";
        t.guard_literal = true;
        t.next_phase = next;
        return t;
    };
    auto always_to = [](const std::string& next) {
        Transition t;
        t.always = true;
        t.next_phase = next;
        return t;
    };

    PhaseSpec verify_identity;
    verify_identity.name = "verifyIdentity";
    verify_identity.target_role = "identity-registry";
    verify_identity.input_fields = {"person_id"};
    verify_identity.output_fields = {"identity_card", "deny", "deny_phase"};
    verify_identity.purpose = "identity card check";
    verify_identity.transitions = {deny_to("issueDecision"), always_to("employmentProof")};

    PhaseSpec employment_proof;
    employment_proof.name = "employmentProof";
    employment_proof.target_role = "employment-registry";
    employment_proof.input_fields = {"person_id"};
    employment_proof.output_fields = {"employment_proof", "deny", "deny_phase"};
    employment_proof.purpose = "employment proof";
    employment_proof.transitions = {deny_to("issueDecision"), always_to("incomeDeclaration")};

    PhaseSpec income_declaration;
    income_declaration.name = "incomeDeclaration";
    income_declaration.target_role = "fiscal-agency";
    income_declaration.input_fields = {"person_id"};
    income_declaration.output_fields = {"income_declaration", "taxes_due", "deny", "deny_phase"};
    income_declaration.purpose = "income declaration and confirmation";
    income_declaration.transitions = {deny_to("issueDecision"), always_to("taxReceipt")};

    PhaseSpec tax_receipt;
    tax_receipt.name = "taxReceipt";
    tax_receipt.target_role = "fiscal-agency";
    tax_receipt.input_fields = {"person_id", "taxes_due"};
    tax_receipt.output_fields = {"tax_receipt", "deny", "deny_phase"};
    tax_receipt.purpose = "proof all taxes were paid";
    Transition dividends_branch;
    dividends_branch.guard_field = "has_dividends";
    dividends_branch.guard_literal = true;
    dividends_branch.next_phase = "dividendStatistics";
    tax_receipt.transitions = {deny_to("issueDecision"), dividends_branch,
                               always_to("issueDecision")};

    PhaseSpec dividend_statistics;
    dividend_statistics.name = "dividendStatistics";
    dividend_statistics.target_role = "finance-ministry";
    dividend_statistics.input_fields = {"person_id"};
    dividend_statistics.output_fields = {"dividend_statistics", "deny", "deny_phase"};
    dividend_statistics.purpose = "financial statistics for dividend income";
    dividend_statistics.transitions = {always_to("issueDecision")};

    PhaseSpec issue_decision;
    issue_decision.name = "issueDecision";
    issue_decision.target_role = "insurance-agency";
    issue_decision.input_fields = {"insurance_type", "identity_card", "deny", "deny_phase"};
    issue_decision.output_fields = {"decision", "card_id", "reason_phase"};
    issue_decision.purpose = "issue or deny the insurance card";
    Transition denied;
    denied.guard_field = "deny";
    denied.guard_literal = true;
    denied.terminal = Outcome::DENIED;
    Transition issued;
    issued.always = true;
    issued.terminal = Outcome::ISSUED;
    issue_decision.transitions = {denied, issued};

    d.phases = {verify_identity, employment_proof, income_declaration,
                tax_receipt,     dividend_statistics, issue_decision};
    return d;
}

std::vector<std::string> demo_roles() {
    return {"identity-registry", "employment-registry", "fiscal-agency", "finance-ministry",
            "insurance-agency"};
}

std::vector<AdapterIdentity> demo_adapter_identities() {
    using C = DataCategory;
    const std::string d = kDescriptorName;
    AdapterIdentity identity_registry;
    identity_registry.adapter_id = "identity-registry-1";
    identity_registry.role = "identity-registry";
    identity_registry.readable_categories = {C::identity};
    identity_registry.run_grants = {{d, "verifyIdentity"}};

    AdapterIdentity employment_registry;
    employment_registry.adapter_id = "employment-registry-1";
    employment_registry.role = "employment-registry";
    employment_registry.readable_categories = {C::identity, C::employment};
    employment_registry.run_grants = {{d, "employmentProof"}};

    AdapterIdentity fiscal_agency;
    fiscal_agency.adapter_id = "fiscal-agency-1";
    fiscal_agency.role = "fiscal-agency";
    fiscal_agency.readable_categories = {C::identity, C::income, C::tax};
    fiscal_agency.run_grants = {{d, "incomeDeclaration"}, {d, "taxReceipt"}};

    AdapterIdentity finance_ministry;
    finance_ministry.adapter_id = "finance-ministry-1";
    finance_ministry.role = "finance-ministry";
    finance_ministry.readable_categories = {C::identity, C::dividend};
    finance_ministry.run_grants = {{d, "dividendStatistics"}};

    AdapterIdentity insurance_agency;
    insurance_agency.adapter_id = "insurance-agency-1";
    insurance_agency.role = "insurance-agency";
    insurance_agency.readable_categories = {C::identity, C::decision};
    insurance_agency.run_grants = {{d, "issueDecision"}};

    return {identity_registry, employment_registry, fiscal_agency, finance_ministry,
            insurance_agency};
}

AdapterIdentity demo_identity_for_role(const std::string& role) {
    for (const auto& identity : demo_adapter_identities())
        if (identity.role == role) return identity;
    fail(Errc::INVALID_ARGUMENT, "no demo adapter for role " + role);
}

namespace {

const CitizenProfile& profile_for(const CitizenDirectory& citizens, const Delivery& delivery,
                                  CitizenProfile& storage) {
    auto it = delivery.fields.find("person_id");
    if (it == delivery.fields.end() || !it->second.is_string())
        fail(Errc::HANDLER_FAULT, "delivery carries no person_id");
    auto p = citizens.find(it->second.get<std::string>());
    if (!p) fail(Errc::UNKNOWN_PROFILE, it->second.get<std::string>() + " not in fixtures");
    storage = *p;
    return storage;
}

PhaseResult check_result(bool passed, const std::string& phase, const std::string& field,
                         const envelope::Value& value_when_passed) {
    PhaseResult r;
    r.outputs["deny"] = !passed;
    r.outputs["deny_phase"] = passed ? "" : phase;
    r.outputs[field] = passed ? value_when_passed : envelope::Value("");
    return r;
}

} // namespace

std::shared_ptr<AdapterHost> make_institution_host(
    const std::string& role, std::shared_ptr<const CitizenDirectory> citizens) {
    auto host = std::make_shared<AdapterHost>(demo_identity_for_role(role));
    if (role == "identity-registry") {
        host->on_phase("verifyIdentity", [citizens](const Delivery& d) {
            CitizenProfile p;
            profile_for(*citizens, d, p);
            return check_result(p.identity_valid, "verifyIdentity", "identity_card",
                                "IDC-" + p.person_id);
        });
    } else if (role == "employment-registry") {
        host->on_phase("employmentProof", [citizens](const Delivery& d) {
            CitizenProfile p;
            profile_for(*citizens, d, p);
            return check_result(p.employed, "employmentProof", "employment_proof",
                                "EMP-" + p.person_id);
        });
    } else if (role == "fiscal-agency") {
        host->on_phase("incomeDeclaration", [citizens](const Delivery& d) {
            CitizenProfile p;
            profile_for(*citizens, d, p);
            PhaseResult r = check_result(p.income_declared && p.income_confirmed,
                                         "incomeDeclaration", "income_declaration",
                                         "DECL-" + p.person_id);
            r.outputs["taxes_due"] = 1240; // flat demo assessment
            return r;
        });
        host->on_phase("taxReceipt", [citizens](const Delivery& d) {
            CitizenProfile p;
            profile_for(*citizens, d, p);
            return check_result(p.taxes_paid, "taxReceipt", "tax_receipt",
                                "RCPT-" + p.person_id);
        });
    } else if (role == "finance-ministry") {
        host->on_phase("dividendStatistics", [citizens](const Delivery& d) {
            CitizenProfile p;
            profile_for(*citizens, d, p);
            return check_result(p.dividend_statistics_ok, "dividendStatistics",
                                "dividend_statistics", "DIVSTAT-" + p.person_id);
        });
    } else if (role == "insurance-agency") {
        host->on_phase("issueDecision", [](const Delivery& d) {
            bool deny = d.fields.at("deny").get<bool>();
            PhaseResult r;
            if (deny) {
                r.outputs["decision"] = "denied";
                r.outputs["card_id"] = "";
                r.outputs["reason_phase"] = d.fields.at("deny_phase");
            } else {
                r.outputs["decision"] = "issued";
                r.outputs["card_id"] = "EHIC-" + d.instance_id.substr(0, 12);
                r.outputs["reason_phase"] = "";
            }
            return r;
        });
    } else {
        fail(Errc::INVALID_ARGUMENT, "unknown institution role " + role);
    }
    return host;
}

envelope::Value to_envelope(const InsuranceDecision& d) {
    envelope::Value v;
    if (!d.card_id.empty()) v["cardId"] = d.card_id;
    v["instanceId"] = d.instance_id;
    v["outcome"] = status_label(d.outcome);
    if (!d.reason_phase.empty()) v["reasonPhase"] = d.reason_phase;
    return v;
}

// ---------------------------------------------------------------------------
// Medical record store
// ---------------------------------------------------------------------------

MedicalRecordStore::MedicalRecordStore(AuditLog& audit, ConsentRegistry& consents,
                                       std::shared_ptr<SubjectStore> store)
    : audit_(audit), consents_(consents), store_(std::move(store)) {
    if (!store_) fail(Errc::INVALID_ARGUMENT, "record store needs backing storage");
    for (const auto& subject : store_->subjects())
        for (const auto& item : store_->list_items(subject))
            if (item.find(".c") == std::string::npos) owners_.emplace(item, subject);
}

void MedicalRecordStore::require_consent(const std::string& subject_id) const {
    if (!consents_.check(subject_id, kPurposeRecords, {DataCategory::medical}))
        fail(Errc::NO_CONSENT,
             "no active records consent covering medical data for " + subject_id);
}

std::optional<std::string> MedicalRecordStore::owner_of(const std::string& record_id) const {
    auto it = owners_.find(record_id);
    if (it == owners_.end()) return std::nullopt;
    return it->second;
}

std::string MedicalRecordStore::upload(const std::string& subject_id,
                                       const std::string& filename,
                                       const std::string& content,
                                       const std::string& actor_id) {
    if (content.size() > kMaxRecordBytes)
        fail(Errc::LENGTH_OVERFLOW, "record exceeds 16 MiB");
    require_consent(subject_id);
    std::string record_id = fresh_id();
    std::int64_t now = now_utc_ms();
    std::size_t chunks = (content.size() + kChunkSize - 1) / kChunkSize;
    if (chunks == 0) chunks = 1;
    {
        std::lock_guard lock(mutex_);
        for (std::size_t i = 0; i < chunks; ++i) {
            envelope::Value chunk;
            chunk["bytes"] = crypto::base64_encode(
                std::string_view(content).substr(i * kChunkSize,
                                                 std::min(kChunkSize, content.size() - i * kChunkSize)));
            store_->put(subject_id, record_id + ".c" + std::to_string(i), chunk);
        }
        envelope::Value meta;
        meta["chunkCount"] = static_cast<std::uint64_t>(chunks);
        meta["filename"] = filename;
        meta["recordId"] = record_id;
        meta["size"] = static_cast<std::uint64_t>(content.size());
        meta["uploadedAtUtc"] = now;
        store_->put(subject_id, record_id, meta);
        owners_.emplace(record_id, subject_id);
    }
    AuditDraft d;
    d.action = AuditAction::WRITE;
    d.actor_id = actor_id;
    d.subject_id = subject_id;
    d.field_names = {"contentBytes", "filename"};
    d.detail = "record " + record_id + " (" + filename + ", " +
               std::to_string(content.size()) + " bytes), category=medical";
    audit_.append(d);
    return record_id;
}

std::string MedicalRecordStore::download(const std::string& subject_id,
                                         const std::string& record_id,
                                         const std::string& actor_id) {
    require_consent(subject_id);
    std::string content;
    std::string filename;
    {
        std::lock_guard lock(mutex_);
        auto owner = owner_of(record_id);
        if (owner && *owner != subject_id) {
            AuditDraft denial;
            denial.action = AuditAction::READ;
            denial.actor_id = actor_id;
            denial.subject_id = *owner;
            denial.detail = "denied: NOT_OWNER (record " + record_id + " requested for " +
                            subject_id + "), category=medical";
            audit_.append(denial);
            fail(Errc::NOT_OWNER, "record " + record_id + " belongs to another subject");
        }
        auto meta = store_->get(subject_id, record_id);
        if (!owner || !meta) fail(Errc::UNKNOWN_RECORD, record_id);
        filename = meta->at("filename").get<std::string>();
        auto chunks = meta->at("chunkCount").get<std::uint64_t>();
        for (std::uint64_t i = 0; i < chunks; ++i) {
            auto chunk = store_->get(subject_id, record_id + ".c" + std::to_string(i));
            if (!chunk) fail(Errc::STORE_UNAVAILABLE, "missing chunk of " + record_id);
            content += crypto::base64_decode(chunk->at("bytes").get<std::string>());
        }
        if (content.size() != meta->at("size").get<std::uint64_t>())
            fail(Errc::STORE_UNAVAILABLE, "size mismatch reading " + record_id);
    }
    AuditDraft d;
    d.action = AuditAction::READ;
    d.actor_id = actor_id;
    d.subject_id = subject_id;
    d.field_names = {"contentBytes", "filename"};
    d.detail = "record " + record_id + " (" + filename + "), category=medical";
    audit_.append(d);
    return content;
}

void MedicalRecordStore::remove(const std::string& subject_id, const std::string& record_id,
                                const std::string& actor_id) {
    require_consent(subject_id);
    {
        std::lock_guard lock(mutex_);
        auto owner = owner_of(record_id);
        if (owner && *owner != subject_id) {
            AuditDraft denial;
            denial.action = AuditAction::DELETE;
            denial.actor_id = actor_id;
            denial.subject_id = *owner;
            denial.detail = "denied: NOT_OWNER (record " + record_id + " requested for " +
                            subject_id + "), category=medical";
            audit_.append(denial);
            fail(Errc::NOT_OWNER, "record " + record_id + " belongs to another subject");
        }
        auto meta = store_->get(subject_id, record_id);
        if (!owner || !meta) fail(Errc::UNKNOWN_RECORD, record_id);
        auto chunks = meta->at("chunkCount").get<std::uint64_t>();
        for (std::uint64_t i = 0; i < chunks; ++i)
            store_->remove(subject_id, record_id + ".c" + std::to_string(i));
        store_->remove(subject_id, record_id);
        owners_.erase(record_id);
    }
    AuditDraft d;
    d.action = AuditAction::DELETE;
    d.actor_id = actor_id;
    d.subject_id = subject_id;
    d.field_names = {"contentBytes", "filename"};
    d.detail = "record " + record_id + ", category=medical";
    audit_.append(d);
}

std::vector<MedicalRecordStore::RecordInfo> MedicalRecordStore::list(
    const std::string& subject_id) const {
    std::lock_guard lock(mutex_);
    std::vector<RecordInfo> out;
    for (const auto& item : store_->list_items(subject_id)) {
        if (item.find(".c") != std::string::npos) continue;
        auto meta = store_->get(subject_id, item);
        if (!meta) continue;
        RecordInfo info;
        info.record_id = meta->at("recordId").get<std::string>();
        info.filename = meta->at("filename").get<std::string>();
        info.size = meta->at("size").get<std::uint64_t>();
        info.uploaded_at_ms = meta->at("uploadedAtUtc").get<std::int64_t>();
        out.push_back(std::move(info));
    }
    return out;
}

ErasureOutcome MedicalRecordStore::erase_subject_data(const std::string& subject_id) {
    std::lock_guard lock(mutex_);
    ErasureOutcome out;
    out.target_name = erasure_target_name();
    out.items_deleted = store_->erase_subject(subject_id);
    std::erase_if(owners_, [&](const auto& kv) { return kv.second == subject_id; });
    return out;
}

std::vector<std::string> MedicalRecordStore::residual_scan(const std::string& subject_id) const {
    std::lock_guard lock(mutex_);
    return store_->residual_scan(subject_id);
}

// ---------------------------------------------------------------------------
// Support desk
// ---------------------------------------------------------------------------

SupportDesk::SupportDesk(AuditLog& audit, ConsentRegistry& consents)
    : audit_(audit), consents_(consents) {}

void SupportDesk::register_staff(const std::string& staff_id) {
    std::lock_guard lock(mutex_);
    staff_.insert(staff_id);
}

std::string SupportDesk::open_ticket(const std::string& subject_id,
                                     const std::string& description,
                                     const std::string& consent_token) {
    auto record = consents_.find(consent_token);
    if (!record || !record->active() || record->subject_id != subject_id ||
        record->purpose != kPurposeSupport)
        fail(Errc::NO_CONSENT, "support needs an active support-purpose consent");
    Ticket ticket;
    ticket.ticket_id = fresh_id();
    ticket.subject_id = subject_id;
    ticket.description = description;
    ticket.consent_token = consent_token;
    ticket.opened_at_ms = now_utc_ms();
    std::lock_guard lock(mutex_);
    tickets_.emplace(ticket.ticket_id, ticket);
    return ticket.ticket_id;
}

SupportDesk::TicketView SupportDesk::view(const std::string& staff_id,
                                          const std::string& ticket_id) {
    Ticket ticket;
    {
        std::lock_guard lock(mutex_);
        if (!staff_.count(staff_id))
            fail(Errc::UNAUTHENTICATED, staff_id + " is not registered support staff");
        auto it = tickets_.find(ticket_id);
        if (it == tickets_.end()) fail(Errc::UNKNOWN_TICKET, ticket_id);
        ticket = it->second;
    }
    // Consent is re-checked at view time: a revocation between opening
    // the ticket and looking at it closes the door.
    auto record = consents_.find(ticket.consent_token);
    if (!record || !record->active() || record->purpose != kPurposeSupport)
        fail(Errc::NO_CONSENT, "support consent no longer active");
    AuditDraft d;
    d.action = AuditAction::SUPPORT_ACCESS;
    d.actor_id = staff_id;
    d.actor_class = ActorClass::human;
    d.subject_id = ticket.subject_id;
    d.field_names = {"description", "person_id"};
    d.detail = "ticket " + ticket.ticket_id;
    audit_.append(d);
    TicketView view;
    view.ticket_id = ticket.ticket_id;
    view.subject_id = ticket.subject_id;
    view.description = ticket.description;
    view.opened_at_ms = ticket.opened_at_ms;
    return view;
}

std::vector<std::string> SupportDesk::tickets_for(const std::string& subject_id) const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, ticket] : tickets_)
        if (ticket.subject_id == subject_id) out.push_back(id);
    return out;
}

// ---------------------------------------------------------------------------
// World wiring
// ---------------------------------------------------------------------------

std::vector<DemoCredential> demo_credentials() {
    std::vector<DemoCredential> out;
    for (const auto& person : {"ana.pop", "ion.vasile", "radu.ilie", "maria.toma"})
        out.push_back({person, std::string(person) + "-parola"});
    for (const auto& adapter :
         {"identity-registry-1", "employment-registry-1", "fiscal-agency-1",
          "finance-ministry-1", "insurance-agency-1"})
        out.push_back({adapter, std::string(adapter) + "-secret"});
    out.push_back({"operator", "operator-secret"});
    return out;
}

void seed_credentials(MemoryCredentialStore& store) {
    for (const auto& c : demo_credentials())
        store.add(derive_credential(c.username, c.password,
                                    crypto::sha256(c.username).substr(0, 16),
                                    kMinScramIterations));
}

HealthfuseWorld::HealthfuseWorld(WorldConfig config) {
    std::shared_ptr<SubjectStore> instance_store;
    std::shared_ptr<SubjectStore> consent_store;
    std::shared_ptr<SubjectStore> medical_store;
    if (config.data_dir.empty()) {
        audit_ = std::make_shared<MemoryAuditLog>();
        instance_store = std::make_shared<MemoryStore>("instances");
        consent_store = std::make_shared<MemoryStore>("consents-store");
        medical_store = std::make_shared<MemoryStore>("medical");
    } else {
        audit_ = std::make_shared<FileAuditLog>(config.data_dir + "/audit.log");
        instance_store = std::make_shared<FileStore>(config.data_dir + "/instances", "instances");
        consent_store = std::make_shared<FileStore>(config.data_dir + "/consents", "consents-store");
        medical_store = std::make_shared<FileStore>(config.data_dir + "/medical", "medical");
    }
    consents_ = std::make_shared<ConsentRegistry>(*audit_, consent_store);
    BusConfig bus_config;
    bus_config.audit = audit_;
    bus_config.instance_store = instance_store;
    bus_ = std::make_shared<Bus>(bus_config, *consents_);
    records_ = std::make_shared<MedicalRecordStore>(*audit_, *consents_, medical_store);
    support_ = std::make_shared<SupportDesk>(*audit_, *consents_);
    erasure_ = std::make_shared<ErasureEngine>(*audit_);
    erasure_->register_target(bus_);
    erasure_->register_target(consents_);
    erasure_->register_target(records_);
    credentials_ = std::make_shared<MemoryCredentialStore>();

    auto citizens = std::make_shared<CitizenDirectory>();
    if (config.seed_demo_data) {
        *citizens = CitizenDirectory::demo_fixtures();
        seed_credentials(*credentials_);
        support_->register_staff("dana.suport");
    }
    citizens_mutable_ = citizens;
    citizens_ = citizens;

    if (config.register_local_adapters) {
        for (const auto& role : demo_roles()) {
            auto host = make_institution_host(role, citizens_);
            hosts_.push_back(host);
            bus_->register_adapter(host->identity(), std::make_shared<HostLink>(host),
                                   host->identity().adapter_id);
        }
        VerificationReport report = bus_->register_descriptor(build_issue_ehic_descriptor());
        if (!report.ok)
            fail(Errc::VERIFICATION_FAILED,
                 "demo descriptor failed verification: " + format_report(report));
    }
}

std::string HealthfuseWorld::request_insurance(const std::string& subject_id,
                                               const std::string& insurance_type) {
    auto profile = citizens_->find(subject_id);
    if (!profile) fail(Errc::UNKNOWN_PROFILE, subject_id + " not in fixtures");
    std::string token;
    for (const auto& record : consents_->for_subject(subject_id))
        if (record.active() && record.purpose == kDescriptorName) token = record.token;
    std::map<std::string, envelope::Value> payload;
    payload["person_id"] = subject_id;
    payload["insurance_type"] = insurance_type;
    payload["has_dividends"] = profile->has_dividends;
    return bus_->launch(kDescriptorName, 1, payload, subject_id, token);
}

InsuranceDecision HealthfuseWorld::decision(const std::string& instance_id) {
    StatusView s = bus_->status(instance_id);
    InsuranceDecision d;
    d.instance_id = instance_id;
    d.outcome = s.status;
    if (s.status != InstanceStatus::ISSUED && s.status != InstanceStatus::DENIED) return d;
    auto fields = bus_->read_fields(instance_id, {"card_id", "reason_phase"}, kPortalActor,
                                    ActorClass::software);
    if (s.status == InstanceStatus::ISSUED && fields.count("card_id"))
        d.card_id = fields["card_id"].get<std::string>();
    if (s.status == InstanceStatus::DENIED && fields.count("reason_phase"))
        d.reason_phase = fields["reason_phase"].get<std::string>();
    return d;
}

InsuranceDecision HealthfuseWorld::run_and_decide(const std::string& instance_id) {
    bus_->run_to_completion(instance_id);
    return decision(instance_id);
}

} // namespace swarmbus::healthfuse
