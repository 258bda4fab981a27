#pragma once

#include <map>
#include <string>
#include <vector>

#include "swarmbus/model.hpp"

namespace swarmbus {

enum class ViolationKind {
    NO_ADAPTER_FOR_ROLE,
    MISSING_RUN_GRANT,
    CATEGORY_DENIED,
    UNSOURCED_INPUT,
    HUMAN_IN_AUTOMATED_FLOW,
};

const char* violation_kind_name(ViolationKind k);

struct Violation {
    std::string phase;
    ViolationKind kind = ViolationKind::NO_ADAPTER_FOR_ROLE;
    std::string detail;

    bool operator==(const Violation&) const = default;
};

struct VerificationReport {
    bool ok = true;
    std::vector<Violation> violations; // sorted by phase, then kind, then detail
};

/// Field availability proven on entry to each phase: a field counts as
/// available only when every path from the entry phase supplies it.
struct AbstractFieldState {
    std::map<std::string, FieldSet> per_phase;
};

/// Must-availability dataflow over the phase DAG. The entry phase gets
/// exactly launch_fields; along each edge the source phase's outputs
/// accumulate; joins intersect.
AbstractFieldState propagate_fields(const SwarmDescriptor& d, const FieldSet& launch_fields);

/// Static confidentiality check, performed in the integration layer before
/// any execution: every phase's target adapter must exist, hold a run
/// grant and the category rights for exactly the data the phase declares,
/// and every input (and guard field) must be proven available. Software
/// adapters only. Violations are collected exhaustively.
VerificationReport verify(const SwarmDescriptor& d,
                          const std::vector<AdapterIdentity>& adapters,
                          const FieldSet& launch_fields);

/// Role resolution used by both verify and the bus: the last identity in
/// registration order bearing a role wins.
std::map<std::string, AdapterIdentity> resolve_roles(const std::vector<AdapterIdentity>& adapters);

/// Render a report one violation per line: `<phase>\t<kind>\t<detail>`.
std::string format_report(const VerificationReport& report);

} // namespace swarmbus
