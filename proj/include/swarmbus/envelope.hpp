#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "swarmbus/errors.hpp"

namespace swarmbus::envelope {

/// Values carried by the canonical envelope grammar. Objects keep their
/// keys sorted by byte value, which is what makes `encode` deterministic.
/// Floating point numbers are outside the grammar and rejected.
using Value = nlohmann::json;

/// Serialize a value to canonical envelope bytes (UTF-8, sorted object
/// keys, no insignificant whitespace). Equal values yield identical bytes.
/// Throws SwarmError(INVALID_ARGUMENT) for values outside the grammar.
std::string encode(const Value& value);

/// Parse envelope bytes. Throws SwarmError(MALFORMED_MESSAGE) on syntax
/// errors or on values outside the grammar.
Value decode(std::string_view bytes);

/// Parse envelope bytes and additionally require that the input is in
/// canonical form, i.e. re-encoding yields the exact same bytes.
Value decode_canonical(std::string_view bytes);

/// True when bytes parse and are bit-identical to their canonical form.
bool is_canonical(std::string_view bytes);

} // namespace swarmbus::envelope
