#include "swarmbus/bus.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include "swarmbus/errors.hpp"

namespace swarmbus {

PhaseResult LocalAdapterLink::deliver(const Delivery& delivery) {
    std::unique_lock lock(mutex_);
    if (closed_) fail(Errc::ADAPTER_UNREACHABLE, "adapter link closed");
    auto key = std::make_pair(delivery.instance_id, delivery.phase);
    auto it = done_.find(key);
    if (it != done_.end()) return it->second; // at-most-once per (instance, phase)
    lock.unlock();
    PhaseResult result = handler_(delivery); // may throw HANDLER_FAULT
    lock.lock();
    done_[key] = result;
    return result;
}

void LocalAdapterLink::close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
}

bool LocalAdapterLink::alive() const { return !closed_; }

std::size_t LocalAdapterLink::erase_instances(const std::vector<std::string>& instance_ids) {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& id : instance_ids)
        n += std::erase_if(done_, [&](const auto& kv) { return kv.first.first == id; });
    return n;
}

std::vector<std::string> LocalAdapterLink::residual_scan(const std::string& subject_id) {
    std::lock_guard lock(mutex_);
    std::vector<std::string> findings;
    for (const auto& [key, result] : done_)
        for (const auto& [name, value] : result.outputs)
            if (envelope::encode(value).find(subject_id) != std::string::npos)
                findings.push_back("adapter cache " + key.first + "/" + key.second);
    return findings;
}

envelope::Value to_envelope(const StatusView& s) {
    envelope::Value v;
    v["currentPhase"] = s.current_phase;
    v["descriptor"] = {{"name", s.descriptor_name}, {"version", s.descriptor_version}};
    if (!s.failure_reason.empty()) v["failureReason"] = s.failure_reason;
    v["hopTrail"] = envelope::Value::array();
    for (const auto& hop : s.hop_trail) v["hopTrail"].push_back(to_envelope(hop));
    v["instanceId"] = s.instance_id;
    if (!s.reason_phase.empty()) v["reasonPhase"] = s.reason_phase;
    v["status"] = status_label(s.status);
    return v;
}

StatusView status_view_from_envelope(const envelope::Value& v) {
    StatusView s;
    s.current_phase = v.at("currentPhase").get<std::string>();
    s.descriptor_name = v.at("descriptor").at("name").get<std::string>();
    s.descriptor_version = v.at("descriptor").at("version").get<std::uint32_t>();
    if (v.contains("failureReason")) s.failure_reason = v.at("failureReason").get<std::string>();
    for (const auto& hop : v.at("hopTrail")) s.hop_trail.push_back(hop_from_envelope(hop));
    s.instance_id = v.at("instanceId").get<std::string>();
    if (v.contains("reasonPhase")) s.reason_phase = v.at("reasonPhase").get<std::string>();
    auto st = status_from_label(v.at("status").get<std::string>());
    if (!st) fail(Errc::MALFORMED_MESSAGE, "unknown status");
    s.status = *st;
    return s;
}

Bus::Bus(BusConfig config, ConsentRegistry& consents)
    : config_(std::move(config)), consents_(consents) {
    if (!config_.audit) fail(Errc::INVALID_ARGUMENT, "bus needs an audit log");
    if (config_.instance_store) {
        for (const std::string& subject : config_.instance_store->subjects()) {
            for (const std::string& item : config_.instance_store->list_items(subject)) {
                auto v = config_.instance_store->get(subject, item);
                if (!v) continue;
                SwarmInstance inst = instance_from_envelope(*v);
                InstanceEntry entry;
                entry.escrow = FieldSet{};
                for (const auto& [name, _] : inst.payload) entry.escrow.insert(name);
                entry.instance = std::move(inst);
                instances_.emplace(entry.instance.instance_id, std::move(entry));
            }
        }
    }
}

Bus::~Bus() {
    std::lock_guard lock(registry_mutex_);
    for (auto& [id, entry] : adapters_) entry.link->close();
}

std::string Bus::register_adapter(const AdapterIdentity& identity,
                                  std::shared_ptr<AdapterLink> link,
                                  const std::string& channel_principal) {
    if (channel_principal.empty())
        fail(Errc::UNAUTHENTICATED, "adapter registration needs an authenticated channel");
    if (channel_principal != identity.adapter_id)
        fail(Errc::IDENTITY_MISMATCH, "channel principal " + channel_principal +
                                          " does not match adapter " + identity.adapter_id);
    if (!is_identifier(identity.adapter_id)) fail(Errc::INVALID_ARGUMENT, "bad adapter id");
    bool replaced = false;
    {
        std::lock_guard lock(registry_mutex_);
        auto it = adapters_.find(identity.adapter_id);
        if (it != adapters_.end()) {
            it->second.link->close();
            replaced = true;
        }
        adapters_[identity.adapter_id] = {identity, std::move(link), ++registration_counter_};
    }
    AuditDraft d;
    d.action = AuditAction::REGISTER;
    d.actor_id = identity.adapter_id;
    d.detail = replaced ? "adapter re-registered, stale channel closed" : "adapter registered";
    config_.audit->append(d);
    return identity.adapter_id;
}

VerificationReport Bus::register_descriptor(const SwarmDescriptor& d) {
    ValidationResult structural = validate_descriptor(d);
    if (!structural.ok())
        fail(Errc::INVALID_ARGUMENT, "descriptor invalid: " + structural.errors.front());
    std::vector<AdapterIdentity> identities = adapter_identities();
    VerificationReport report = verify(d, identities, d.launch_field_names());
    if (!report.ok) return report;
    {
        std::lock_guard lock(registry_mutex_);
        auto key = std::make_pair(d.name, d.version);
        if (descriptors_.count(key))
            fail(Errc::VERSION_EXISTS,
                 d.name + " v" + std::to_string(d.version) + " already registered");
        descriptors_.emplace(key, d);
    }
    AuditDraft draft;
    draft.action = AuditAction::REGISTER;
    draft.actor_id = config_.actor_id;
    draft.detail = "descriptor " + d.name + " v" + std::to_string(d.version);
    config_.audit->append(draft);
    return report;
}

std::optional<SwarmDescriptor> Bus::find_descriptor(const std::string& name,
                                                    std::uint32_t version) const {
    std::lock_guard lock(registry_mutex_);
    auto it = descriptors_.find({name, version});
    if (it == descriptors_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::pair<std::string, std::uint32_t>> Bus::descriptor_versions() const {
    std::lock_guard lock(registry_mutex_);
    std::vector<std::pair<std::string, std::uint32_t>> out;
    for (const auto& [key, _] : descriptors_) out.push_back(key);
    return out;
}

std::vector<AdapterIdentity> Bus::adapter_identities() const {
    std::lock_guard lock(registry_mutex_);
    // Registration order (recency) so resolve_roles' last-wins rule sees
    // the same order the registrations happened in.
    std::vector<const AdapterEntry*> entries;
    for (const auto& [id, entry] : adapters_) entries.push_back(&entry);
    std::sort(entries.begin(), entries.end(),
              [](const AdapterEntry* a, const AdapterEntry* b) { return a->order < b->order; });
    std::vector<AdapterIdentity> out;
    for (const AdapterEntry* e : entries) out.push_back(e->identity);
    return out;
}

std::optional<std::pair<AdapterIdentity, std::shared_ptr<AdapterLink>>>
Bus::adapter_for_role(const std::string& role) const {
    std::lock_guard lock(registry_mutex_);
    const AdapterEntry* best = nullptr;
    for (const auto& [id, entry] : adapters_)
        if (entry.identity.role == role && (!best || entry.order > best->order)) best = &entry;
    if (!best) return std::nullopt;
    return std::make_pair(best->identity, best->link);
}

void Bus::persist_instance(const SwarmInstance& instance) {
    if (!config_.instance_store || !is_store_key(instance.subject_id)) return;
    config_.instance_store->put(instance.subject_id, instance.instance_id,
                                to_envelope(instance));
}

void Bus::unpersist_instance(const std::string& subject_id, const std::string& instance_id) {
    if (!config_.instance_store) return;
    config_.instance_store->remove(subject_id, instance_id);
}

std::string Bus::launch(const std::string& descriptor_name, std::uint32_t version,
                        const std::map<std::string, envelope::Value>& launch_payload,
                        const std::string& subject_id, const std::string& consent_token) {
    auto descriptor = find_descriptor(descriptor_name, version);
    if (!descriptor)
        fail(Errc::UNKNOWN_DESCRIPTOR,
             descriptor_name + " v" + std::to_string(version) + " not registered");
    if (!consents_.check(subject_id, descriptor_name, descriptor->declared_categories()))
        fail(Errc::NO_CONSENT, "no active grant for " + subject_id + " covering purpose " +
                                   descriptor_name + " and all declared categories");

    FieldSet expected = descriptor->launch_field_names();
    FieldSet given;
    for (const auto& [name, value] : launch_payload) {
        given.insert(name);
        if (!value.is_string() && !value.is_boolean() && !value.is_number_integer())
            fail(Errc::BAD_LAUNCH_FIELDS, "field " + name + ": payload values must be scalars");
    }
    for (const auto& name : expected)
        if (!given.count(name)) fail(Errc::BAD_LAUNCH_FIELDS, "missing launch field " + name);
    for (const auto& name : given)
        if (!expected.count(name)) fail(Errc::BAD_LAUNCH_FIELDS, "extra launch field " + name);

    SwarmInstance inst;
    inst.instance_id = fresh_id();
    inst.descriptor_name = descriptor->name;
    inst.descriptor_version = descriptor->version;
    inst.current_phase = descriptor->entry_phase;
    inst.payload = launch_payload;
    inst.subject_id = subject_id;
    inst.status = InstanceStatus::RUNNING;
    inst.consent_token = consent_token;

    AuditDraft d;
    d.action = AuditAction::LAUNCH;
    d.actor_id = config_.actor_id;
    d.subject_id = subject_id;
    d.instance_id = inst.instance_id;
    d.field_names = expected;
    d.detail = descriptor->name + " v" + std::to_string(descriptor->version);
    config_.audit->append(d); // fail-closed: no unaudited instance creation

    persist_instance(inst);
    {
        std::lock_guard lock(instances_mutex_);
        InstanceEntry entry;
        entry.escrow = expected;
        entry.instance = inst;
        instances_.emplace(inst.instance_id, std::move(entry));
    }
    return inst.instance_id;
}

SwarmInstance Bus::step(const std::string& instance_id) {
    InstanceEntry* entry = nullptr;
    {
        std::lock_guard lock(instances_mutex_);
        auto it = instances_.find(instance_id);
        if (it == instances_.end()) fail(Errc::UNKNOWN_INSTANCE, instance_id);
        entry = &it->second;
    }
    std::lock_guard step_lock(*entry->step_mutex);
    if (entry->instance.terminal())
        fail(Errc::NOT_RUNNING, instance_id + " is " + status_label(entry->instance.status));
    return step_locked(*entry);
}

SwarmInstance Bus::step_locked(InstanceEntry& entry) {
    SwarmInstance& inst = entry.instance;
    auto descriptor = find_descriptor(inst.descriptor_name, inst.descriptor_version);
    if (!descriptor) fail(Errc::UNKNOWN_DESCRIPTOR, inst.descriptor_name);
    const PhaseSpec* phase = descriptor->find_phase(inst.current_phase);
    if (!phase) fail(Errc::INVALID_ARGUMENT, "instance at unknown phase " + inst.current_phase);

    auto adapter = adapter_for_role(phase->target_role);
    if (!adapter || !adapter->second->alive())
        fail(Errc::ADAPTER_UNREACHABLE, "no live adapter for role " + phase->target_role);
    const AdapterIdentity& identity = adapter->first;

    Delivery delivery;
    delivery.instance_id = inst.instance_id;
    delivery.descriptor_name = inst.descriptor_name;
    delivery.descriptor_version = inst.descriptor_version;
    delivery.phase = phase->name;
    for (const auto& field : phase->input_fields) {
        auto it = inst.payload.find(field);
        if (it == inst.payload.end())
            fail(Errc::INVALID_ARGUMENT,
                 "verified availability broken: " + field + " missing at " + phase->name);
        delivery.fields.emplace(field, it->second);
    }

    // Audit before anything leaves the bus (fail-closed monitoring), and
    // record the hop with it so trail and DELIVER entries stay 1:1.
    AuditDraft deliver_draft;
    deliver_draft.action = AuditAction::DELIVER;
    deliver_draft.actor_id = identity.adapter_id;
    deliver_draft.actor_class = identity.actor_class;
    deliver_draft.subject_id = inst.subject_id;
    deliver_draft.instance_id = inst.instance_id;
    deliver_draft.field_names = phase->input_fields;
    deliver_draft.detail = "phase " + phase->name;
    config_.audit->append(deliver_draft);

    HopRecord hop;
    hop.adapter_id = identity.adapter_id;
    hop.phase = phase->name;
    hop.timestamp_utc = now_utc_ms();
    hop.fields_read = phase->input_fields;
    inst.hop_trail.push_back(hop);

    // Escrow: only the delivered fields leave; the rest stay withheld.
    entry.escrow.clear();
    for (const auto& [name, _] : inst.payload)
        if (!phase->input_fields.count(name)) entry.escrow.insert(name);

    auto restore_escrow = [&] {
        entry.escrow.clear();
        for (const auto& [name, _] : inst.payload) entry.escrow.insert(name);
    };

    PhaseResult result;
    try {
        result = adapter->second->deliver(delivery);
    } catch (const SwarmError& e) {
        if (e.code() == Errc::ADAPTER_UNREACHABLE || e.code() == Errc::CHANNEL_CLOSED) {
            restore_escrow();
            persist_instance(inst);
            fail(Errc::ADAPTER_UNREACHABLE, std::string("delivery failed: ") + e.what());
        }
        // Handler faults end the run, with the reason on the audit trail.
        AuditDraft fault;
        fault.action = AuditAction::RETURN;
        fault.actor_id = identity.adapter_id;
        fault.actor_class = identity.actor_class;
        fault.subject_id = inst.subject_id;
        fault.instance_id = inst.instance_id;
        fault.detail = std::string("HANDLER_FAULT: ") + e.what();
        config_.audit->append(fault);
        inst.status = InstanceStatus::FAILED;
        inst.current_phase = kTerminalPhase;
        inst.failure_reason = std::string("HANDLER_FAULT at ") + phase->name + ": " + e.what();
        restore_escrow();
        persist_instance(inst);
        return inst;
    }

    // Undeclared outputs poison the run; nothing of the result is kept.
    for (const auto& [name, _] : result.outputs) {
        if (phase->output_fields.count(name)) continue;
        AuditDraft violation;
        violation.action = AuditAction::RETURN;
        violation.actor_id = identity.adapter_id;
        violation.actor_class = identity.actor_class;
        violation.subject_id = inst.subject_id;
        violation.instance_id = inst.instance_id;
        violation.detail = "OUTPUT_VIOLATION: undeclared field " + name;
        config_.audit->append(violation);
        inst.status = InstanceStatus::FAILED;
        inst.current_phase = kTerminalPhase;
        inst.failure_reason = "OUTPUT_VIOLATION: undeclared field " + name + " at " + phase->name;
        restore_escrow();
        persist_instance(inst);
        return inst;
    }

    AuditDraft return_draft;
    return_draft.action = AuditAction::RETURN;
    return_draft.actor_id = identity.adapter_id;
    return_draft.actor_class = identity.actor_class;
    return_draft.subject_id = inst.subject_id;
    return_draft.instance_id = inst.instance_id;
    for (const auto& [name, _] : result.outputs) return_draft.field_names.insert(name);
    return_draft.detail = "phase " + phase->name;
    if (result.verdict_hint)
        return_draft.detail += ", hint " + envelope::encode(*result.verdict_hint);
    config_.audit->append(return_draft);

    for (const auto& [name, value] : result.outputs) {
        inst.payload[name] = value;
        inst.hop_trail.back().fields_written.insert(name);
    }

    // First matching transition in declaration order decides the route;
    // the validator guarantees a final ALWAYS edge.
    const Transition* taken = nullptr;
    for (const Transition& t : phase->transitions) {
        if (t.always) {
            taken = &t;
            break;
        }
        auto it = inst.payload.find(t.guard_field);
        if (it != inst.payload.end() && it->second == t.guard_literal) {
            taken = &t;
            break;
        }
    }
    if (!taken) fail(Errc::INVALID_ARGUMENT, "no transition matched at " + phase->name);
    if (taken->is_terminal()) {
        switch (*taken->terminal) {
        case Outcome::ISSUED: inst.status = InstanceStatus::ISSUED; break;
        case Outcome::DENIED: inst.status = InstanceStatus::DENIED; break;
        case Outcome::FAILED: inst.status = InstanceStatus::FAILED; break;
        }
        inst.current_phase = kTerminalPhase;
    } else {
        inst.current_phase = taken->next_phase;
    }
    restore_escrow();
    persist_instance(inst);
    return inst;
}

SwarmInstance Bus::run_to_completion(const std::string& instance_id) {
    InstanceEntry* entry = nullptr;
    {
        std::lock_guard lock(instances_mutex_);
        auto it = instances_.find(instance_id);
        if (it == instances_.end()) fail(Errc::UNKNOWN_INSTANCE, instance_id);
        entry = &it->second;
    }
    std::lock_guard step_lock(*entry->step_mutex);
    while (!entry->instance.terminal()) {
        std::size_t attempt = 0;
        while (true) {
            try {
                step_locked(*entry);
                break;
            } catch (const SwarmError& e) {
                if (e.code() != Errc::ADAPTER_UNREACHABLE) throw;
                if (attempt >= config_.retry_backoff_ms.size()) {
                    SwarmInstance& inst = entry->instance;
                    inst.status = InstanceStatus::FAILED;
                    inst.current_phase = kTerminalPhase;
                    inst.failure_reason = std::string("ADAPTER_UNREACHABLE: ") + e.what();
                    persist_instance(inst);
                    break;
                }
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(config_.retry_backoff_ms[attempt]));
                ++attempt;
            }
        }
    }
    return entry->instance;
}

StatusView Bus::status(const std::string& instance_id) const {
    std::lock_guard lock(instances_mutex_);
    auto it = instances_.find(instance_id);
    if (it == instances_.end()) fail(Errc::UNKNOWN_INSTANCE, instance_id);
    const SwarmInstance& inst = it->second.instance;
    StatusView s;
    s.instance_id = inst.instance_id;
    s.descriptor_name = inst.descriptor_name;
    s.descriptor_version = inst.descriptor_version;
    s.status = inst.status;
    s.current_phase = inst.current_phase;
    s.hop_trail = inst.hop_trail;
    if ((inst.status == InstanceStatus::DENIED || inst.status == InstanceStatus::FAILED) &&
        !inst.hop_trail.empty())
        s.reason_phase = inst.hop_trail.back().phase;
    s.failure_reason = inst.failure_reason;
    return s;
}

std::map<std::string, envelope::Value> Bus::read_fields(const std::string& instance_id,
                                                        const FieldSet& fields,
                                                        const std::string& actor_id,
                                                        ActorClass actor_class) {
    std::map<std::string, envelope::Value> out;
    AuditDraft d;
    d.action = AuditAction::READ;
    d.actor_id = actor_id;
    d.actor_class = actor_class;
    {
        std::lock_guard lock(instances_mutex_);
        auto it = instances_.find(instance_id);
        if (it == instances_.end()) fail(Errc::UNKNOWN_INSTANCE, instance_id);
        const SwarmInstance& inst = it->second.instance;
        for (const auto& name : fields) {
            auto f = inst.payload.find(name);
            if (f != inst.payload.end()) out.emplace(name, f->second);
        }
        d.subject_id = inst.subject_id;
        d.instance_id = instance_id;
        for (const auto& [name, _] : out) d.field_names.insert(name);
    }
    config_.audit->append(d);
    return out;
}

std::vector<std::string> Bus::instance_ids() const {
    std::lock_guard lock(instances_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : instances_) out.push_back(id);
    return out;
}

std::vector<std::string> Bus::running_instance_ids() const {
    std::lock_guard lock(instances_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, entry] : instances_)
        if (!entry.instance.terminal()) out.push_back(id);
    return out;
}

ErasureOutcome Bus::erase_subject_data(const std::string& subject_id) {
    ErasureOutcome out;
    out.target_name = erasure_target_name();

    std::vector<std::string> touched_ids;
    {
        std::lock_guard lock(instances_mutex_);
        for (auto& [id, entry] : instances_) {
            SwarmInstance& inst = entry.instance;
            if (inst.subject_id != subject_id) continue;
            std::lock_guard step_lock(*entry.step_mutex);
            touched_ids.push_back(id);
            if (!inst.terminal()) {
                inst.status = InstanceStatus::CANCELLED;
                inst.current_phase = kTerminalPhase;
                out.cancelled_instances.push_back(id);
            }
            // Tombstone: status and trail survive (names only); every
            // value and the subject linkage go.
            out.items_deleted += inst.payload.size();
            inst.payload.clear();
            entry.escrow.clear();
            unpersist_instance(subject_id, id);
            inst.subject_id.clear();
            inst.consent_token.clear();
        }
    }
    // Adapter-side idempotence caches hold output values for the
    // subject's instances; command every adapter to drop them.
    if (!touched_ids.empty()) {
        std::vector<std::pair<std::string, std::shared_ptr<AdapterLink>>> links;
        {
            std::lock_guard lock(registry_mutex_);
            for (const auto& [aid, entry] : adapters_) links.emplace_back(aid, entry.link);
        }
        for (const auto& [id, link] : links) {
            try {
                out.items_deleted += link->erase_instances(touched_ids);
            } catch (const SwarmError& e) {
                out.residual_findings.push_back("adapter " + id + " unreachable for erasure: " +
                                                e.what());
            }
        }
    }
    return out;
}

std::vector<std::string> Bus::residual_scan(const std::string& subject_id) const {
    std::vector<std::string> findings;
    {
        std::lock_guard lock(instances_mutex_);
        for (const auto& [id, entry] : instances_) {
            const SwarmInstance& inst = entry.instance;
            if (inst.subject_id == subject_id) findings.push_back("bus instance " + id);
            for (const auto& [name, value] : inst.payload)
                if (envelope::encode(value).find(subject_id) != std::string::npos)
                    findings.push_back("bus instance " + id + " payload field " + name);
            if (!entry.escrow.empty() && inst.subject_id == subject_id)
                findings.push_back("bus escrow for instance " + id);
        }
    }
    std::vector<std::pair<std::string, std::shared_ptr<AdapterLink>>> links;
    {
        std::lock_guard lock(registry_mutex_);
        for (const auto& [aid, entry] : adapters_) links.emplace_back(aid, entry.link);
    }
    for (const auto& [id, link] : links) {
        try {
            for (auto& f : link->residual_scan(subject_id)) findings.push_back(std::move(f));
        } catch (const SwarmError& e) {
            findings.push_back("adapter " + id + " unreachable for scan: " + e.what());
        }
    }
    return findings;
}

} // namespace swarmbus
