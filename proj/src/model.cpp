#include "swarmbus/model.hpp"

#include <algorithm>
#include <chrono>

#include "swarmbus/crypto.hpp"

namespace swarmbus {

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

const char* category_label(DataCategory c) {
    switch (c) {
    case DataCategory::identity: return "identity";
    case DataCategory::employment: return "employment";
    case DataCategory::income: return "income";
    case DataCategory::tax: return "tax";
    case DataCategory::dividend: return "dividend";
    case DataCategory::medical: return "medical";
    case DataCategory::contact: return "contact";
    case DataCategory::decision: return "decision";
    }
    return "?";
}

std::optional<DataCategory> category_from_label(std::string_view label) {
    static const std::pair<const char*, DataCategory> table[] = {
        {"identity", DataCategory::identity}, {"employment", DataCategory::employment},
        {"income", DataCategory::income},     {"tax", DataCategory::tax},
        {"dividend", DataCategory::dividend}, {"medical", DataCategory::medical},
        {"contact", DataCategory::contact},   {"decision", DataCategory::decision},
    };
    for (const auto& [name, cat] : table)
        if (label == name) return cat;
    return std::nullopt;
}

const char* actor_class_label(ActorClass a) {
    return a == ActorClass::software ? "software" : "human";
}

std::optional<ActorClass> actor_class_from_label(std::string_view label) {
    if (label == "software") return ActorClass::software;
    if (label == "human") return ActorClass::human;
    return std::nullopt;
}

const char* outcome_label(Outcome o) {
    switch (o) {
    case Outcome::ISSUED: return "ISSUED";
    case Outcome::DENIED: return "DENIED";
    case Outcome::FAILED: return "FAILED";
    }
    return "?";
}

const char* status_label(InstanceStatus s) {
    switch (s) {
    case InstanceStatus::RUNNING: return "RUNNING";
    case InstanceStatus::ISSUED: return "ISSUED";
    case InstanceStatus::DENIED: return "DENIED";
    case InstanceStatus::FAILED: return "FAILED";
    case InstanceStatus::CANCELLED: return "CANCELLED";
    }
    return "?";
}

std::optional<InstanceStatus> status_from_label(std::string_view label) {
    static const std::pair<const char*, InstanceStatus> table[] = {
        {"RUNNING", InstanceStatus::RUNNING}, {"ISSUED", InstanceStatus::ISSUED},
        {"DENIED", InstanceStatus::DENIED},   {"FAILED", InstanceStatus::FAILED},
        {"CANCELLED", InstanceStatus::CANCELLED},
    };
    for (const auto& [name, st] : table)
        if (label == name) return st;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Identifier shapes
// ---------------------------------------------------------------------------

bool is_field_name(std::string_view s) {
    if (s.empty() || s[0] < 'a' || s[0] > 'z') return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    });
}

bool is_identifier(std::string_view s) {
    if (s.empty() || s[0] < 'a' || s[0] > 'z') return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    });
}

bool is_phase_name(std::string_view s) {
    if (s.empty()) return false;
    if (s == kTerminalPhase) return false;
    char c0 = s[0];
    if (!((c0 >= 'a' && c0 <= 'z') || (c0 >= 'A' && c0 <= 'Z') || c0 == '_')) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    });
}

// ---------------------------------------------------------------------------
// Descriptor helpers
// ---------------------------------------------------------------------------

const PhaseSpec* SwarmDescriptor::find_phase(std::string_view phase_name) const {
    for (const auto& p : phases)
        if (p.name == phase_name) return &p;
    return nullptr;
}

const FieldSpec* SwarmDescriptor::find_field(std::string_view field_name) const {
    for (const auto& f : fields)
        if (f.name == field_name) return &f;
    return nullptr;
}

FieldSet SwarmDescriptor::declared_field_names() const {
    FieldSet out;
    for (const auto& f : fields) out.insert(f.name);
    return out;
}

FieldSet SwarmDescriptor::launch_field_names() const {
    FieldSet out = declared_field_names();
    for (const auto& p : phases)
        for (const auto& f : p.output_fields) out.erase(f);
    return out;
}

std::set<DataCategory> SwarmDescriptor::declared_categories() const {
    std::set<DataCategory> out;
    for (const auto& f : fields) out.insert(f.category);
    return out;
}

// ---------------------------------------------------------------------------
// Structural validation
// ---------------------------------------------------------------------------

namespace {

// DFS cycle search over resolvable edges; reports the first cycle found in
// declaration order as "cycle: a,b,c".
struct CycleFinder {
    const SwarmDescriptor& d;
    std::map<std::string, int> state; // 0 unvisited, 1 on stack, 2 done
    std::vector<std::string> stack;
    std::optional<std::string> cycle;

    explicit CycleFinder(const SwarmDescriptor& desc) : d(desc) {}

    void visit(const PhaseSpec& p) {
        if (cycle) return;
        state[p.name] = 1;
        stack.push_back(p.name);
        for (const auto& t : p.transitions) {
            if (t.is_terminal()) continue;
            const PhaseSpec* next = d.find_phase(t.next_phase);
            if (!next) continue;
            int s = state.count(next->name) ? state[next->name] : 0;
            if (s == 0) {
                visit(*next);
                if (cycle) return;
            } else if (s == 1) {
                auto it = std::find(stack.begin(), stack.end(), next->name);
                std::string names;
                for (; it != stack.end(); ++it) {
                    if (!names.empty()) names += ",";
                    names += *it;
                }
                cycle = "cycle: " + names;
                return;
            }
        }
        stack.pop_back();
        state[p.name] = 2;
    }

    std::optional<std::string> run() {
        for (const auto& p : d.phases) {
            if ((state.count(p.name) ? state[p.name] : 0) == 0) visit(p);
            if (cycle) break;
        }
        return cycle;
    }
};

} // namespace

ValidationResult validate_descriptor(const SwarmDescriptor& d) {
    ValidationResult r;
    auto err = [&r](std::string msg) { r.errors.push_back(std::move(msg)); };

    if (!is_identifier(d.name)) err("invalid descriptor name: " + d.name);
    if (d.version < 1) err("invalid version: " + std::to_string(d.version));

    FieldSet field_names;
    for (const auto& f : d.fields) {
        if (!is_field_name(f.name)) err("invalid field name: " + f.name);
        if (!field_names.insert(f.name).second) err("duplicate field: " + f.name);
    }

    FieldSet phase_names;
    for (const auto& p : d.phases) {
        if (!is_phase_name(p.name)) err("invalid phase name: " + p.name);
        if (!phase_names.insert(p.name).second) err("duplicate phase: " + p.name);
    }

    if (d.phases.empty()) err("descriptor has no phases");
    if (!phase_names.count(d.entry_phase)) err("unknown entry phase: " + d.entry_phase);

    for (const auto& p : d.phases) {
        if (!is_identifier(p.target_role)) err("phase " + p.name + ": invalid role: " + p.target_role);
        for (const auto& f : p.input_fields)
            if (!field_names.count(f)) err("phase " + p.name + ": undeclared input field: " + f);
        for (const auto& f : p.output_fields)
            if (!field_names.count(f)) err("phase " + p.name + ": undeclared output field: " + f);

        if (p.transitions.empty()) {
            err("phase " + p.name + ": no transitions");
            continue;
        }
        size_t always_count = 0;
        for (size_t i = 0; i < p.transitions.size(); ++i) {
            const Transition& t = p.transitions[i];
            if (t.always) {
                ++always_count;
                if (i + 1 != p.transitions.size())
                    err("phase " + p.name + ": transitions after ALWAYS are unreachable");
            } else {
                if (!field_names.count(t.guard_field))
                    err("phase " + p.name + ": guard on undeclared field: " + t.guard_field);
                if (!t.guard_literal.is_boolean() && !t.guard_literal.is_string())
                    err("phase " + p.name + ": guard literal must be boolean or string");
            }
            if (!t.is_terminal() && !phase_names.count(t.next_phase))
                err("unresolved transition: " + t.next_phase);
        }
        if (always_count == 0)
            err("phase " + p.name + ": missing ALWAYS transition, run could dead-end");
        else if (always_count > 1)
            err("phase " + p.name + ": more than one ALWAYS transition");
    }

    // Acyclicity, then reachability, over whatever part of the graph resolves.
    if (auto cyc = CycleFinder(d).run()) err(*cyc);

    if (phase_names.count(d.entry_phase)) {
        std::set<std::string> reachable{d.entry_phase};
        std::vector<std::string> work{d.entry_phase};
        while (!work.empty()) {
            const PhaseSpec* p = d.find_phase(work.back());
            work.pop_back();
            if (!p) continue;
            for (const auto& t : p->transitions) {
                if (t.is_terminal() || !phase_names.count(t.next_phase)) continue;
                if (reachable.insert(t.next_phase).second) work.push_back(t.next_phase);
            }
        }
        for (const auto& p : d.phases)
            if (!reachable.count(p.name)) err("unreachable phase: " + p.name);
    }

    return r;
}

// ---------------------------------------------------------------------------
// Envelope codecs
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) { fail(Errc::MALFORMED_MESSAGE, what); }

const Value& need(const Value& v, const char* key) {
    if (!v.is_object() || !v.contains(key)) bad(std::string("missing key: ") + key);
    return v.at(key);
}

std::string need_string(const Value& v, const char* key) {
    const Value& x = need(v, key);
    if (!x.is_string()) bad(std::string("expected string at: ") + key);
    return x.get<std::string>();
}

int64_t need_int(const Value& v, const char* key) {
    const Value& x = need(v, key);
    if (!x.is_number_integer() && !x.is_number_unsigned()) bad(std::string("expected integer at: ") + key);
    return x.get<int64_t>();
}

void check_keys(const Value& v, std::initializer_list<const char*> allowed) {
    for (const auto& [key, val] : v.items()) {
        (void)val;
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) { ok = true; break; }
        if (!ok) bad("unexpected key: " + key);
    }
}

json sorted_array(const FieldSet& s) {
    json arr = json::array();
    for (const auto& x : s) arr.push_back(x);
    return arr;
}

FieldSet field_set_from(const Value& v, const char* key) {
    const Value& arr = need(v, key);
    if (!arr.is_array()) bad(std::string("expected array at: ") + key);
    FieldSet out;
    for (const auto& item : arr) {
        if (!item.is_string()) bad(std::string("expected string element in: ") + key);
        out.insert(item.get<std::string>());
    }
    return out;
}

void require_scalar(const Value& v, const std::string& where) {
    if (!v.is_string() && !v.is_boolean() && !v.is_number_integer() && !v.is_number_unsigned())
        bad("payload value must be a string, boolean or integer: " + where);
}

} // namespace

Value to_envelope(const SwarmDescriptor& d) {
    json fields = json::array();
    for (const auto& f : d.fields) {
        fields.push_back(json{
            {"category", category_label(f.category)},
            {"name", f.name},
            {"sensitivity", f.sensitivity == Sensitivity::personal ? "personal" : "non-personal"},
        });
    }
    json phases = json::array();
    for (const auto& p : d.phases) {
        json transitions = json::array();
        for (const auto& t : p.transitions) {
            json tr;
            if (t.always)
                tr["guard"] = "ALWAYS";
            else
                tr["guard"] = json{{"equals", t.guard_literal}, {"field", t.guard_field}};
            if (t.is_terminal())
                tr["to"] = json{{"terminal", outcome_label(*t.terminal)}};
            else
                tr["to"] = t.next_phase;
            transitions.push_back(std::move(tr));
        }
        phases.push_back(json{
            {"inputFields", sorted_array(p.input_fields)},
            {"name", p.name},
            {"outputFields", sorted_array(p.output_fields)},
            {"purpose", p.purpose},
            {"targetRole", p.target_role},
            {"transitions", std::move(transitions)},
        });
    }
    return json{
        {"entryPhase", d.entry_phase},
        {"fields", std::move(fields)},
        {"name", d.name},
        {"phases", std::move(phases)},
        {"version", d.version},
    };
}

SwarmDescriptor descriptor_from_envelope(const Value& v) {
    check_keys(v, {"entryPhase", "fields", "name", "phases", "version"});
    SwarmDescriptor d;
    d.name = need_string(v, "name");
    int64_t version = need_int(v, "version");
    if (version < 1 || version > 0xffffffffLL) bad("version out of range");
    d.version = static_cast<uint32_t>(version);
    d.entry_phase = need_string(v, "entryPhase");

    const Value& fields = need(v, "fields");
    if (!fields.is_array()) bad("fields must be an array");
    for (const auto& fv : fields) {
        check_keys(fv, {"category", "name", "sensitivity"});
        FieldSpec f;
        f.name = need_string(fv, "name");
        auto cat = category_from_label(need_string(fv, "category"));
        if (!cat) bad("unknown category for field " + f.name);
        f.category = *cat;
        std::string sens = need_string(fv, "sensitivity");
        if (sens == "personal")
            f.sensitivity = Sensitivity::personal;
        else if (sens == "non-personal")
            f.sensitivity = Sensitivity::non_personal;
        else
            bad("unknown sensitivity for field " + f.name);
        d.fields.push_back(std::move(f));
    }

    const Value& phases = need(v, "phases");
    if (!phases.is_array()) bad("phases must be an array");
    for (const auto& pv : phases) {
        check_keys(pv, {"inputFields", "name", "outputFields", "purpose", "targetRole", "transitions"});
        PhaseSpec p;
        p.name = need_string(pv, "name");
        p.target_role = need_string(pv, "targetRole");
        p.purpose = need_string(pv, "purpose");
        p.input_fields = field_set_from(pv, "inputFields");
        p.output_fields = field_set_from(pv, "outputFields");
        const Value& trs = need(pv, "transitions");
        if (!trs.is_array()) bad("transitions must be an array");
        for (const auto& tv : trs) {
            check_keys(tv, {"guard", "to"});
            Transition t;
            const Value& g = need(tv, "guard");
            if (g.is_string() && g.get<std::string>() == "ALWAYS") {
                t.always = true;
            } else if (g.is_object()) {
                check_keys(g, {"equals", "field"});
                t.guard_field = need_string(g, "field");
                t.guard_literal = need(g, "equals");
                if (!t.guard_literal.is_boolean() && !t.guard_literal.is_string())
                    bad("guard literal must be boolean or string");
            } else {
                bad("guard must be ALWAYS or an equality object");
            }
            const Value& to = need(tv, "to");
            if (to.is_string()) {
                t.next_phase = to.get<std::string>();
            } else if (to.is_object()) {
                check_keys(to, {"terminal"});
                std::string o = need_string(to, "terminal");
                if (o == "ISSUED") t.terminal = Outcome::ISSUED;
                else if (o == "DENIED") t.terminal = Outcome::DENIED;
                else if (o == "FAILED") t.terminal = Outcome::FAILED;
                else bad("unknown terminal outcome: " + o);
            } else {
                bad("transition target must be a phase name or terminal object");
            }
            p.transitions.push_back(std::move(t));
        }
        d.phases.push_back(std::move(p));
    }
    return d;
}

Value to_envelope(const HopRecord& h) {
    return json{
        {"adapterId", h.adapter_id},
        {"fieldsRead", sorted_array(h.fields_read)},
        {"fieldsWritten", sorted_array(h.fields_written)},
        {"phase", h.phase},
        {"timestampUtc", h.timestamp_utc},
    };
}

HopRecord hop_from_envelope(const Value& v) {
    check_keys(v, {"adapterId", "fieldsRead", "fieldsWritten", "phase", "timestampUtc"});
    HopRecord h;
    h.adapter_id = need_string(v, "adapterId");
    h.phase = need_string(v, "phase");
    h.timestamp_utc = need_int(v, "timestampUtc");
    h.fields_read = field_set_from(v, "fieldsRead");
    h.fields_written = field_set_from(v, "fieldsWritten");
    return h;
}

Value to_envelope(const SwarmInstance& i) {
    json payload = json::object();
    for (const auto& [k, val] : i.payload) payload[k] = val;
    json trail = json::array();
    for (const auto& h : i.hop_trail) trail.push_back(to_envelope(h));
    json out{
        {"consentToken", i.consent_token},
        {"currentPhase", i.current_phase},
        {"descriptor", json{{"name", i.descriptor_name}, {"version", i.descriptor_version}}},
        {"hopTrail", std::move(trail)},
        {"instanceId", i.instance_id},
        {"payload", std::move(payload)},
        {"status", status_label(i.status)},
        {"subjectId", i.subject_id},
    };
    if (!i.failure_reason.empty()) out["failureReason"] = i.failure_reason;
    return out;
}

SwarmInstance instance_from_envelope(const Value& v) {
    check_keys(v, {"consentToken", "currentPhase", "descriptor", "failureReason", "hopTrail",
                   "instanceId", "payload", "status", "subjectId"});
    SwarmInstance i;
    i.instance_id = need_string(v, "instanceId");
    i.subject_id = need_string(v, "subjectId");
    i.consent_token = need_string(v, "consentToken");
    i.current_phase = need_string(v, "currentPhase");
    const Value& desc = need(v, "descriptor");
    check_keys(desc, {"name", "version"});
    i.descriptor_name = need_string(desc, "name");
    int64_t version = need_int(desc, "version");
    if (version < 1 || version > 0xffffffffLL) bad("version out of range");
    i.descriptor_version = static_cast<uint32_t>(version);
    auto st = status_from_label(need_string(v, "status"));
    if (!st) bad("unknown status");
    i.status = *st;
    const Value& payload = need(v, "payload");
    if (!payload.is_object()) bad("payload must be an object");
    for (const auto& [k, val] : payload.items()) {
        require_scalar(val, k);
        i.payload[k] = val;
    }
    const Value& trail = need(v, "hopTrail");
    if (!trail.is_array()) bad("hopTrail must be an array");
    int64_t prev_ts = 0;
    for (const auto& hv : trail) {
        HopRecord h = hop_from_envelope(hv);
        if (h.timestamp_utc < prev_ts) bad("hopTrail out of chronological order");
        prev_ts = h.timestamp_utc;
        i.hop_trail.push_back(std::move(h));
    }
    if (v.contains("failureReason")) i.failure_reason = need_string(v, "failureReason");
    return i;
}

Value to_envelope(const AdapterIdentity& a) {
    json cats = json::array();
    for (const auto& c : a.readable_categories) cats.push_back(category_label(c));
    json grants = json::array();
    for (const auto& [desc, phase] : a.run_grants)
        grants.push_back(json{{"descriptor", desc}, {"phase", phase}});
    return json{
        {"actorClass", actor_class_label(a.actor_class)},
        {"adapterId", a.adapter_id},
        {"readableCategories", std::move(cats)},
        {"role", a.role},
        {"runGrants", std::move(grants)},
    };
}

AdapterIdentity adapter_from_envelope(const Value& v) {
    check_keys(v, {"actorClass", "adapterId", "readableCategories", "role", "runGrants"});
    AdapterIdentity a;
    a.adapter_id = need_string(v, "adapterId");
    a.role = need_string(v, "role");
    auto ac = actor_class_from_label(need_string(v, "actorClass"));
    if (!ac) bad("unknown actorClass");
    a.actor_class = *ac;
    const Value& cats = need(v, "readableCategories");
    if (!cats.is_array()) bad("readableCategories must be an array");
    for (const auto& c : cats) {
        if (!c.is_string()) bad("category must be a string");
        auto cat = category_from_label(c.get<std::string>());
        if (!cat) bad("unknown category: " + c.get<std::string>());
        a.readable_categories.insert(*cat);
    }
    const Value& grants = need(v, "runGrants");
    if (!grants.is_array()) bad("runGrants must be an array");
    for (const auto& g : grants) {
        check_keys(g, {"descriptor", "phase"});
        a.run_grants.insert({need_string(g, "descriptor"), need_string(g, "phase")});
    }
    return a;
}

std::string canonical_encode(const SwarmDescriptor& d) {
    ValidationResult vr = validate_descriptor(d);
    if (!vr.ok()) fail(Errc::INVALID_ARGUMENT, "descriptor invalid: " + vr.errors.front());
    return envelope::encode(to_envelope(d));
}

std::string canonical_encode(const SwarmInstance& i) {
    if (i.instance_id.empty()) fail(Errc::INVALID_ARGUMENT, "instance without id");
    if ((i.status == InstanceStatus::RUNNING) == (i.current_phase == kTerminalPhase))
        fail(Errc::INVALID_ARGUMENT, "status and currentPhase disagree");
    return envelope::encode(to_envelope(i));
}

SwarmDescriptor decode_descriptor(std::string_view bytes) {
    return descriptor_from_envelope(envelope::decode(bytes));
}

SwarmInstance decode_instance(std::string_view bytes) {
    return instance_from_envelope(envelope::decode(bytes));
}

int64_t now_utc_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string fresh_id() {
    return crypto::to_hex(crypto::random_bytes(16));
}

} // namespace swarmbus
