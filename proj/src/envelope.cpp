#include "swarmbus/envelope.hpp"

namespace swarmbus::envelope {

namespace {

void check_grammar(const Value& v) {
    switch (v.type()) {
    case nlohmann::json::value_t::null:
    case nlohmann::json::value_t::boolean:
    case nlohmann::json::value_t::number_integer:
    case nlohmann::json::value_t::number_unsigned:
    case nlohmann::json::value_t::string:
        return;
    case nlohmann::json::value_t::array:
        for (const auto& item : v) check_grammar(item);
        return;
    case nlohmann::json::value_t::object:
        for (const auto& [key, val] : v.items()) {
            (void)key;
            check_grammar(val);
        }
        return;
    default:
        fail(Errc::INVALID_ARGUMENT, "value outside the envelope grammar: " + std::string(v.type_name()));
    }
}

} // namespace

std::string encode(const Value& value) {
    check_grammar(value);
    // nlohmann keeps object keys in a std::map, so dump() already emits
    // them sorted by byte value with minimal whitespace.
    return value.dump();
}

Value decode(std::string_view bytes) {
    Value v = nlohmann::json::parse(bytes, nullptr, false);
    if (v.is_discarded()) fail(Errc::MALFORMED_MESSAGE, "envelope parse error");
    try {
        check_grammar(v);
    } catch (const SwarmError&) {
        fail(Errc::MALFORMED_MESSAGE, "value outside the envelope grammar");
    }
    return v;
}

Value decode_canonical(std::string_view bytes) {
    Value v = decode(bytes);
    if (encode(v) != bytes) fail(Errc::MALFORMED_MESSAGE, "input is not in canonical form");
    return v;
}

bool is_canonical(std::string_view bytes) {
    try {
        decode_canonical(bytes);
        return true;
    } catch (const SwarmError&) {
        return false;
    }
}

} // namespace swarmbus::envelope
