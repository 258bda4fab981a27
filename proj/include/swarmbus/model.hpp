#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "swarmbus/envelope.hpp"

namespace swarmbus {

using envelope::Value;
using FieldSet = std::set<std::string>;

// ---------------------------------------------------------------------------
// Vocabulary shared by every other component. All types are immutable value
// objects once constructed; mutation is modeled as producing a new instance.
// ---------------------------------------------------------------------------

enum class DataCategory {
    identity,
    employment,
    income,
    tax,
    dividend,
    medical,
    contact,
    decision,
};

const char* category_label(DataCategory c);
std::optional<DataCategory> category_from_label(std::string_view label);

enum class Sensitivity { personal, non_personal };

enum class ActorClass { software, human };
const char* actor_class_label(ActorClass a);
std::optional<ActorClass> actor_class_from_label(std::string_view label);

/// One named datum a choreography may carry. Field granularity is what the
/// per-hop minimization checks operate on.
struct FieldSpec {
    std::string name; // [a-z][a-z0-9_]*
    DataCategory category = DataCategory::identity;
    Sensitivity sensitivity = Sensitivity::personal;

    bool operator==(const FieldSpec&) const = default;
};

/// Terminal outcomes a transition may route to. CANCELLED is reserved for
/// erasure and never appears in a descriptor.
enum class Outcome { ISSUED, DENIED, FAILED };
const char* outcome_label(Outcome o);

enum class InstanceStatus { RUNNING, ISSUED, DENIED, FAILED, CANCELLED };
const char* status_label(InstanceStatus s);
std::optional<InstanceStatus> status_from_label(std::string_view label);

/// Guarded edge out of a phase. A guard is either ALWAYS or an equality
/// test on a boolean/string field; guards are evaluated in declaration
/// order and the first match wins. The target is another phase or a
/// terminal outcome.
struct Transition {
    bool always = false;
    std::string guard_field;          // set when !always
    Value guard_literal;              // boolean or string literal
    std::string next_phase;           // set when !terminal
    std::optional<Outcome> terminal;  // set when the edge ends the run

    bool is_terminal() const { return terminal.has_value(); }
    bool operator==(const Transition&) const = default;
};

struct PhaseSpec {
    std::string name;
    std::string target_role;
    FieldSet input_fields;
    FieldSet output_fields;
    std::string purpose;
    std::vector<Transition> transitions;

    bool operator==(const PhaseSpec&) const = default;
};

/// A choreography: the contract every participant executes. The phase
/// graph must be a DAG so every run terminates.
struct SwarmDescriptor {
    std::string name;
    uint32_t version = 1;
    std::vector<FieldSpec> fields;
    std::vector<PhaseSpec> phases;
    std::string entry_phase;

    const PhaseSpec* find_phase(std::string_view phase_name) const;
    const FieldSpec* find_field(std::string_view field_name) const;
    FieldSet declared_field_names() const;
    /// Names of fields expected in the launch payload: every declared field
    /// that no phase outputs.
    FieldSet launch_field_names() const;
    std::set<DataCategory> declared_categories() const;

    bool operator==(const SwarmDescriptor&) const = default;
};

/// One hop of a swarm through an adapter, names only, never values.
struct HopRecord {
    std::string adapter_id;
    std::string phase;
    int64_t timestamp_utc = 0; // milliseconds since epoch
    FieldSet fields_read;
    FieldSet fields_written;

    bool operator==(const HopRecord&) const = default;
};

/// Sentinel stored in SwarmInstance::current_phase once a run has ended.
inline constexpr const char* kTerminalPhase = "TERMINAL";

/// A "smart" message in flight: payload, position in the choreography and
/// the full provenance trail.
struct SwarmInstance {
    std::string instance_id;
    std::string descriptor_name;
    uint32_t descriptor_version = 1;
    std::string current_phase;
    std::map<std::string, Value> payload;
    std::string subject_id;
    std::vector<HopRecord> hop_trail;
    InstanceStatus status = InstanceStatus::RUNNING;
    std::string consent_token;
    std::string failure_reason; // set when status == FAILED

    bool terminal() const { return status != InstanceStatus::RUNNING; }
    bool operator==(const SwarmInstance&) const = default;
};

/// A server side node bound to one role, together with everything the
/// verifier needs to know about it.
struct AdapterIdentity {
    std::string adapter_id;
    std::string role;
    ActorClass actor_class = ActorClass::software;
    std::set<DataCategory> readable_categories;
    std::set<std::pair<std::string, std::string>> run_grants; // (descriptor, phase)

    bool has_grant(const std::string& descriptor, const std::string& phase) const {
        return run_grants.count({descriptor, phase}) > 0;
    }
    bool operator==(const AdapterIdentity&) const = default;
};

// ---------------------------------------------------------------------------
// Structural validation
// ---------------------------------------------------------------------------

struct ValidationResult {
    std::vector<std::string> errors;
    bool ok() const { return errors.empty(); }
};

/// Checks every structural invariant of a descriptor and reports all
/// violations: identifier shape, unique names, resolvable transitions,
/// declared fields, guard shape, exit coverage, reachability, acyclicity.
ValidationResult validate_descriptor(const SwarmDescriptor& d);

bool is_field_name(std::string_view s);
bool is_identifier(std::string_view s); // roles, descriptor names, ids
bool is_phase_name(std::string_view s);

// ---------------------------------------------------------------------------
// Canonical encoding
// ---------------------------------------------------------------------------

Value to_envelope(const SwarmDescriptor& d);
Value to_envelope(const SwarmInstance& i);
Value to_envelope(const AdapterIdentity& a);
Value to_envelope(const HopRecord& h);

SwarmDescriptor descriptor_from_envelope(const Value& v);
SwarmInstance instance_from_envelope(const Value& v);
AdapterIdentity adapter_from_envelope(const Value& v);
HopRecord hop_from_envelope(const Value& v);

/// Canonical bytes for a structurally valid descriptor. Rejects values
/// violating their invariants.
std::string canonical_encode(const SwarmDescriptor& d);
/// Canonical bytes for an instance. Only instance-local invariants are
/// enforced here; payload-key containment needs the descriptor and is the
/// bus's job.
std::string canonical_encode(const SwarmInstance& i);

SwarmDescriptor decode_descriptor(std::string_view bytes);
SwarmInstance decode_instance(std::string_view bytes);

/// Milliseconds since the Unix epoch.
int64_t now_utc_ms();

/// Fresh globally unique identifier (32 hex chars).
std::string fresh_id();

} // namespace swarmbus
