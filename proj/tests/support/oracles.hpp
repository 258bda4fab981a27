#pragma once

// Brute-force oracles the fast implementations are tested against. The
// availability oracle literally enumerates every path through the phase
// graph; the verification oracle re-derives every violation from first
// principles per (phase, field, adapter). Kept dumb on purpose.

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "swarmbus/model.hpp"

namespace oracles {

/// Every acyclic path from the entry phase, as ordered phase-name lists.
/// A path ends at a phase with a terminal transition or is cut at a
/// prefix ending in the queried phase by callers.
std::vector<std::vector<std::string>> enumerate_paths(const swarmbus::SwarmDescriptor& d);

/// Fields guaranteed on entry to each phase: launch fields plus the
/// intersection, over every path prefix reaching the phase, of outputs of
/// phases strictly before it. Phases no path reaches are absent.
std::map<std::string, swarmbus::FieldSet> must_available(const swarmbus::SwarmDescriptor& d,
                                                         const swarmbus::FieldSet& launch);

/// (phase, violation kind name) pairs per the verification rules, plus
/// the overall verdict. Details are left to the implementation under
/// test; the oracle pins the semantic content.
struct OracleVerdict {
    bool ok = true;
    std::set<std::pair<std::string, std::string>> violations;
};

OracleVerdict verify_oracle(const swarmbus::SwarmDescriptor& d,
                            const std::vector<swarmbus::AdapterIdentity>& adapters,
                            const swarmbus::FieldSet& launch);

} // namespace oracles
