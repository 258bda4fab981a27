#include "swarmbus/verifier.hpp"

#include <algorithm>

namespace swarmbus {

const char* violation_kind_name(ViolationKind k) {
    switch (k) {
    case ViolationKind::NO_ADAPTER_FOR_ROLE: return "NO_ADAPTER_FOR_ROLE";
    case ViolationKind::MISSING_RUN_GRANT: return "MISSING_RUN_GRANT";
    case ViolationKind::CATEGORY_DENIED: return "CATEGORY_DENIED";
    case ViolationKind::UNSOURCED_INPUT: return "UNSOURCED_INPUT";
    case ViolationKind::HUMAN_IN_AUTOMATED_FLOW: return "HUMAN_IN_AUTOMATED_FLOW";
    }
    return "?";
}

namespace {

void require_valid(const SwarmDescriptor& d) {
    ValidationResult vr = validate_descriptor(d);
    if (!vr.ok()) fail(Errc::INVALID_ARGUMENT, "descriptor invalid: " + vr.errors.front());
}

std::vector<const PhaseSpec*> topological_order(const SwarmDescriptor& d) {
    // Kahn over the resolvable edges; validate_descriptor guarantees a DAG.
    std::map<std::string, int> indegree;
    for (const auto& p : d.phases) indegree[p.name] = 0;
    for (const auto& p : d.phases)
        for (const auto& t : p.transitions)
            if (!t.is_terminal()) ++indegree[t.next_phase];

    std::vector<const PhaseSpec*> ready, order;
    for (const auto& p : d.phases)
        if (indegree[p.name] == 0) ready.push_back(&p);
    while (!ready.empty()) {
        const PhaseSpec* p = ready.front();
        ready.erase(ready.begin());
        order.push_back(p);
        for (const auto& t : p->transitions) {
            if (t.is_terminal()) continue;
            if (--indegree[t.next_phase] == 0) ready.push_back(d.find_phase(t.next_phase));
        }
    }
    return order;
}

} // namespace

AbstractFieldState propagate_fields(const SwarmDescriptor& d, const FieldSet& launch_fields) {
    require_valid(d);
    FieldSet declared = d.declared_field_names();
    for (const auto& f : launch_fields)
        if (!declared.count(f)) fail(Errc::INVALID_ARGUMENT, "launch field not declared: " + f);

    AbstractFieldState state;
    state.per_phase[d.entry_phase] = launch_fields;
    for (const PhaseSpec* p : topological_order(d)) {
        auto it = state.per_phase.find(p->name);
        if (it == state.per_phase.end()) continue; // defensive; all phases are reachable
        FieldSet after = it->second;
        after.insert(p->output_fields.begin(), p->output_fields.end());
        for (const auto& t : p->transitions) {
            if (t.is_terminal()) continue;
            auto [succ, inserted] = state.per_phase.try_emplace(t.next_phase, after);
            if (!inserted) {
                FieldSet meet;
                std::set_intersection(succ->second.begin(), succ->second.end(),
                                      after.begin(), after.end(),
                                      std::inserter(meet, meet.begin()));
                succ->second = std::move(meet);
            }
        }
    }
    return state;
}

std::map<std::string, AdapterIdentity> resolve_roles(const std::vector<AdapterIdentity>& adapters) {
    std::map<std::string, AdapterIdentity> roles;
    for (const auto& a : adapters) roles[a.role] = a; // later registration wins
    return roles;
}

VerificationReport verify(const SwarmDescriptor& d,
                          const std::vector<AdapterIdentity>& adapters,
                          const FieldSet& launch_fields) {
    require_valid(d);
    AbstractFieldState flow = propagate_fields(d, launch_fields);
    auto roles = resolve_roles(adapters);

    VerificationReport report;
    auto emit = [&report](const std::string& phase, ViolationKind kind, std::string detail) {
        report.violations.push_back({phase, kind, std::move(detail)});
    };

    for (const auto& p : d.phases) {
        auto role_it = roles.find(p.target_role);
        if (role_it == roles.end()) {
            emit(p.name, ViolationKind::NO_ADAPTER_FOR_ROLE, "no adapter for role: " + p.target_role);
        } else {
            const AdapterIdentity& a = role_it->second;
            if (a.actor_class == ActorClass::human)
                emit(p.name, ViolationKind::HUMAN_IN_AUTOMATED_FLOW,
                     a.adapter_id + " is a human actor");
            if (!a.has_grant(d.name, p.name))
                emit(p.name, ViolationKind::MISSING_RUN_GRANT,
                     a.adapter_id + " lacks grant (" + d.name + ", " + p.name + ")");
            for (const auto& f : p.input_fields) {
                const FieldSpec* spec = d.find_field(f);
                if (spec && !a.readable_categories.count(spec->category))
                    emit(p.name, ViolationKind::CATEGORY_DENIED,
                         a.adapter_id + " cannot read category " +
                             category_label(spec->category) + " (field " + f + ")");
            }
        }

        const FieldSet& available = flow.per_phase.at(p.name);
        for (const auto& f : p.input_fields)
            if (!available.count(f))
                emit(p.name, ViolationKind::UNSOURCED_INPUT,
                     "input " + f + " not available on every path into " + p.name);
        // Guard fields are read by the bus after the phase ran, so the
        // phase's own outputs also count.
        for (const auto& t : p.transitions) {
            if (t.always) continue;
            if (!available.count(t.guard_field) && !p.output_fields.count(t.guard_field))
                emit(p.name, ViolationKind::UNSOURCED_INPUT,
                     "guard field " + t.guard_field + " not available at " + p.name);
        }
    }

    std::sort(report.violations.begin(), report.violations.end(),
              [](const Violation& a, const Violation& b) {
                  if (a.phase != b.phase) return a.phase < b.phase;
                  if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
                  return a.detail < b.detail;
              });
    report.violations.erase(std::unique(report.violations.begin(), report.violations.end()),
                            report.violations.end());
    report.ok = report.violations.empty();
    return report;
}

std::string format_report(const VerificationReport& report) {
    std::string out;
    for (const auto& v : report.violations) {
        out += v.phase;
        out += '\t';
        out += violation_kind_name(v.kind);
        out += '\t';
        out += v.detail;
        out += '\n';
    }
    return out;
}

} // namespace swarmbus
