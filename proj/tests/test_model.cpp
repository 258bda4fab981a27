#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "generators.hpp"
#include "oracles.hpp"
#include "swarmbus/envelope.hpp"
#include "swarmbus/healthfuse.hpp"
#include "swarmbus/model.hpp"

using namespace swarmbus;

namespace {

Transition always_to(std::string next) {
    Transition t;
    t.always = true;
    t.next_phase = std::move(next);
    return t;
}

Transition always_end(Outcome o) {
    Transition t;
    t.always = true;
    t.terminal = o;
    return t;
}

Transition guard_to(std::string field, envelope::Value literal, std::string next) {
    Transition t;
    t.guard_field = std::move(field);
    t.guard_literal = std::move(literal);
    t.next_phase = std::move(next);
    return t;
}

/// Two phases, one field, straight through. The smallest thing that
/// validates; every negative case below is a mutation of it.
SwarmDescriptor tiny() {
    SwarmDescriptor d;
    d.name = "tiny_flow";
    d.version = 1;
    d.fields = {{"ticket", DataCategory::identity, Sensitivity::personal}};
    PhaseSpec a;
    a.name = "open";
    a.target_role = "front_desk";
    a.input_fields = {"ticket"};
    a.purpose = "take the ticket";
    a.transitions = {always_to("close")};
    PhaseSpec b;
    b.name = "close";
    b.target_role = "back_office";
    b.input_fields = {"ticket"};
    b.purpose = "file the ticket";
    b.transitions = {always_end(Outcome::ISSUED)};
    d.phases = {a, b};
    d.entry_phase = "open";
    return d;
}

bool has_error_containing(const ValidationResult& r, const std::string& needle) {
    return std::any_of(r.errors.begin(), r.errors.end(), [&](const std::string& e) {
        return e.find(needle) != std::string::npos;
    });
}

} // namespace

TEST_CASE("baseline descriptors validate") {
    CHECK(validate_descriptor(tiny()).ok());

    SwarmDescriptor single;
    single.name = "one_shot";
    single.fields = {{"blob", DataCategory::contact, Sensitivity::non_personal}};
    PhaseSpec p;
    p.name = "act";
    p.target_role = "worker";
    p.input_fields = {"blob"};
    p.transitions = {always_end(Outcome::DENIED)};
    single.phases = {p};
    single.entry_phase = "act";
    CHECK(validate_descriptor(single).ok());

    auto report = validate_descriptor(healthfuse::build_issue_ehic_descriptor());
    for (const auto& e : report.errors) INFO(e);
    CHECK(report.ok());
}

TEST_CASE("transition to an undeclared phase is reported by name") {
    auto d = tiny();
    d.phases[0].transitions = {always_to("ghost")};
    auto r = validate_descriptor(d);
    CHECK(!r.ok());
    CHECK(has_error_containing(r, "unresolved transition: ghost"));
}

TEST_CASE("two phases feeding each other is a cycle") {
    SwarmDescriptor d;
    d.name = "loop";
    d.fields = {{"x", DataCategory::identity, Sensitivity::personal}};
    PhaseSpec a;
    a.name = "a";
    a.target_role = "r";
    a.transitions = {always_to("b")};
    PhaseSpec b;
    b.name = "b";
    b.target_role = "r";
    b.transitions = {always_to("a")};
    d.phases = {a, b};
    d.entry_phase = "a";
    auto r = validate_descriptor(d);
    CHECK(!r.ok());
    CHECK(has_error_containing(r, "cycle: a,b"));
}

TEST_CASE("self loop is the one phase cycle") {
    auto d = tiny();
    d.phases[1].transitions = {always_to("close")};
    auto r = validate_descriptor(d);
    CHECK(has_error_containing(r, "cycle: close"));
}

TEST_CASE("structural rules, one violation each") {
    SUBCASE("bad descriptor name") {
        auto d = tiny();
        d.name = "Tiny Flow";
        CHECK(has_error_containing(validate_descriptor(d), "invalid descriptor name"));
    }
    SUBCASE("version zero") {
        auto d = tiny();
        d.version = 0;
        CHECK(has_error_containing(validate_descriptor(d), "invalid version: 0"));
    }
    SUBCASE("bad field name") {
        auto d = tiny();
        d.fields.push_back({"9lives", DataCategory::identity, Sensitivity::personal});
        CHECK(has_error_containing(validate_descriptor(d), "invalid field name: 9lives"));
    }
    SUBCASE("duplicate field") {
        auto d = tiny();
        d.fields.push_back(d.fields[0]);
        CHECK(has_error_containing(validate_descriptor(d), "duplicate field: ticket"));
    }
    SUBCASE("duplicate phase") {
        auto d = tiny();
        auto extra = d.phases[1];
        d.phases.push_back(extra);
        CHECK(has_error_containing(validate_descriptor(d), "duplicate phase: close"));
    }
    SUBCASE("no phases at all") {
        SwarmDescriptor d;
        d.name = "empty";
        d.entry_phase = "nowhere";
        auto r = validate_descriptor(d);
        CHECK(has_error_containing(r, "descriptor has no phases"));
        CHECK(has_error_containing(r, "unknown entry phase: nowhere"));
    }
    SUBCASE("entry phase not declared") {
        auto d = tiny();
        d.entry_phase = "warp";
        CHECK(has_error_containing(validate_descriptor(d), "unknown entry phase: warp"));
    }
    SUBCASE("bad role name") {
        auto d = tiny();
        d.phases[0].target_role = "front desk";
        CHECK(has_error_containing(validate_descriptor(d), "invalid role"));
    }
    SUBCASE("undeclared input field") {
        auto d = tiny();
        d.phases[0].input_fields.insert("stamp");
        CHECK(has_error_containing(validate_descriptor(d), "undeclared input field: stamp"));
    }
    SUBCASE("undeclared output field") {
        auto d = tiny();
        d.phases[0].output_fields.insert("stamp");
        CHECK(has_error_containing(validate_descriptor(d), "undeclared output field: stamp"));
    }
    SUBCASE("phase with no transitions") {
        auto d = tiny();
        d.phases[1].transitions.clear();
        CHECK(has_error_containing(validate_descriptor(d), "close: no transitions"));
    }
    SUBCASE("transitions after ALWAYS are unreachable") {
        auto d = tiny();
        d.phases[0].transitions = {always_to("close"),
                                   guard_to("ticket", envelope::Value("x"), "close")};
        CHECK(has_error_containing(validate_descriptor(d), "transitions after ALWAYS"));
    }
    SUBCASE("missing ALWAYS dead-ends the run") {
        auto d = tiny();
        d.phases[0].transitions = {guard_to("ticket", envelope::Value("x"), "close")};
        auto r = validate_descriptor(d);
        CHECK(has_error_containing(r, "missing ALWAYS transition"));
    }
    SUBCASE("two ALWAYS transitions") {
        auto d = tiny();
        d.phases[1].transitions = {always_end(Outcome::ISSUED), always_end(Outcome::DENIED)};
        auto r = validate_descriptor(d);
        // The second one is also flagged as unreachable; both rules fire.
        CHECK(has_error_containing(r, "more than one ALWAYS"));
        CHECK(has_error_containing(r, "transitions after ALWAYS"));
    }
    SUBCASE("guard on undeclared field") {
        auto d = tiny();
        d.phases[0].transitions = {guard_to("mystery", envelope::Value(true), "close"),
                                   always_to("close")};
        CHECK(has_error_containing(validate_descriptor(d), "guard on undeclared field: mystery"));
    }
    SUBCASE("guard literal must be boolean or string") {
        auto d = tiny();
        d.phases[0].transitions = {guard_to("ticket", envelope::Value(7), "close"),
                                   always_to("close")};
        CHECK(has_error_containing(validate_descriptor(d), "guard literal must be boolean or string"));
    }
    SUBCASE("unreachable phase") {
        auto d = tiny();
        PhaseSpec island;
        island.name = "island";
        island.target_role = "nobody";
        island.transitions = {always_end(Outcome::FAILED)};
        d.phases.push_back(island);
        CHECK(has_error_containing(validate_descriptor(d), "unreachable phase: island"));
    }
}

TEST_CASE("identifier shapes") {
    // Roles and descriptor names: lowercase, digits, underscore, hyphen.
    CHECK(is_identifier("issue_ehic"));
    CHECK(is_identifier("identity-registry"));
    CHECK(is_identifier("a1_b2"));
    CHECK(!is_identifier(""));
    CHECK(!is_identifier("_lead"));
    CHECK(!is_identifier("CamelCase"));
    CHECK(!is_identifier("1st"));
    // Field names are stricter: no hyphens.
    CHECK(is_field_name("has_dividends"));
    CHECK(!is_field_name("has-dividends"));
    CHECK(!is_field_name("has dividends"));
    // Phase names allow camelCase but reserve the terminal marker.
    CHECK(is_phase_name("issueDecision"));
    CHECK(is_phase_name("_internal"));
    CHECK(!is_phase_name("TERMINAL"));
    CHECK(!is_phase_name("9lives"));
}

TEST_CASE("launch fields are the ones nothing outputs") {
    auto d = healthfuse::build_issue_ehic_descriptor();
    auto launch = d.launch_field_names();
    CHECK(launch.count("person_id") == 1);
    CHECK(launch.count("insurance_type") == 1);
    CHECK(launch.count("has_dividends") == 1);
    // Outputs of intermediate phases never show up in the launch set.
    for (const auto& p : d.phases)
        for (const auto& f : p.output_fields) CHECK(launch.count(f) == 0);

    auto cats = d.declared_categories();
    CHECK(cats == std::set<DataCategory>{DataCategory::identity, DataCategory::employment,
                                         DataCategory::income, DataCategory::tax,
                                         DataCategory::dividend, DataCategory::decision});
}

TEST_CASE("random descriptors validate and stay acyclic") {
    gen::Rng rng(0x5eed0001);
    for (int i = 0; i < 200; ++i) {
        auto d = gen::random_descriptor(rng);
        auto r = validate_descriptor(d);
        for (const auto& e : r.errors) INFO(e);
        REQUIRE(r.ok());
        // DAG means every enumerated path visits each phase at most once.
        auto paths = oracles::enumerate_paths(d);
        REQUIRE(!paths.empty());
        for (const auto& path : paths) {
            CHECK(path.size() <= d.phases.size());
            std::set<std::string> seen(path.begin(), path.end());
            CHECK(seen.size() == path.size());
            CHECK(path.front() == d.entry_phase);
        }
    }
}

TEST_CASE("descriptor codec round trips") {
    gen::Rng rng(0x5eed0002);
    for (int i = 0; i < 200; ++i) {
        auto d = gen::random_descriptor(rng);
        auto v = to_envelope(d);
        auto back = descriptor_from_envelope(v);
        REQUIRE(back == d);
        // Canonical bytes are injective over the envelope: equal bytes,
        // equal descriptor.
        CHECK(envelope::encode(to_envelope(back)) == envelope::encode(v));
    }
    auto ehic = healthfuse::build_issue_ehic_descriptor();
    CHECK(descriptor_from_envelope(to_envelope(ehic)) == ehic);
}

TEST_CASE("distinct descriptors never share canonical bytes") {
    gen::Rng rng(0x5eed0003);
    std::map<std::string, SwarmDescriptor> by_bytes;
    for (int i = 0; i < 300; ++i) {
        auto d = gen::random_descriptor(rng);
        auto bytes = envelope::encode(to_envelope(d));
        auto [it, fresh] = by_bytes.emplace(bytes, d);
        if (!fresh) CHECK(it->second == d);
    }
}

TEST_CASE("instance codec round trips") {
    gen::Rng rng(0x5eed0004);
    for (int i = 0; i < 100; ++i) {
        SwarmInstance inst;
        inst.instance_id = "i-" + std::to_string(rng.below(1u << 20));
        inst.descriptor_name = "flow_" + std::to_string(rng.below(9));
        inst.descriptor_version = static_cast<uint32_t>(1 + rng.below(4));
        inst.current_phase = "p" + std::to_string(rng.below(5));
        inst.subject_id = "subject_" + std::to_string(rng.below(7));
        inst.consent_token = rng.chance(0.5) ? "tok-" + std::to_string(rng.below(100)) : "";
        inst.status = static_cast<InstanceStatus>(rng.below(5));
        if (inst.status == InstanceStatus::FAILED) inst.failure_reason = "it broke";
        for (std::size_t k = 0; k < rng.below(4) + 1; ++k)
            inst.payload["f" + std::to_string(k)] = gen::random_scalar(rng);
        int64_t clock = 1700000000000;
        for (std::size_t k = 0; k < rng.below(3); ++k) {
            HopRecord h;
            h.phase = "p" + std::to_string(k);
            h.adapter_id = "adapter_" + std::to_string(rng.below(4));
            h.fields_read = {"f0"};
            h.fields_written = {};
            clock += static_cast<int64_t>(rng.below(5000));
            h.timestamp_utc = clock;
            inst.hop_trail.push_back(h);
        }
        REQUIRE(instance_from_envelope(to_envelope(inst)) == inst);
    }
}

TEST_CASE("instance envelope rejects a hop trail running backwards") {
    SwarmInstance inst;
    inst.instance_id = "i-1";
    inst.descriptor_name = "flow";
    inst.current_phase = "b";
    HopRecord h1;
    h1.phase = "a";
    h1.adapter_id = "x";
    h1.timestamp_utc = 2000;
    HopRecord h2 = h1;
    h2.phase = "b";
    h2.timestamp_utc = 1000;
    inst.hop_trail = {h1, h2};
    CHECK_THROWS_AS(instance_from_envelope(to_envelope(inst)), SwarmError);
}

TEST_CASE("canonical instance encoding guards status against current phase") {
    SwarmInstance inst;
    inst.instance_id = "i-2";
    inst.descriptor_name = "flow";
    inst.current_phase = "work";
    inst.status = InstanceStatus::RUNNING;
    CHECK(!canonical_encode(inst).empty());

    inst.status = InstanceStatus::ISSUED; // finished but still parked on a phase
    CHECK_THROWS_AS(canonical_encode(inst), SwarmError);

    inst.current_phase = kTerminalPhase;
    CHECK(!canonical_encode(inst).empty());

    inst.status = InstanceStatus::RUNNING; // running with nowhere to run
    CHECK_THROWS_AS(canonical_encode(inst), SwarmError);

    inst.instance_id.clear();
    inst.status = InstanceStatus::ISSUED;
    CHECK_THROWS_AS(canonical_encode(inst), SwarmError);
}

TEST_CASE("adapter and hop codecs round trip") {
    AdapterIdentity a;
    a.adapter_id = "fiscal-agency-adapter";
    a.role = "fiscal-agency";
    a.actor_class = ActorClass::software;
    a.readable_categories = {DataCategory::identity, DataCategory::income, DataCategory::tax};
    a.run_grants = {{"issue_ehic", "taxReceipt"}, {"issue_ehic", "incomeDeclaration"}};
    CHECK(adapter_from_envelope(to_envelope(a)) == a);

    AdapterIdentity human;
    human.adapter_id = "dana";
    human.role = "support_desk";
    human.actor_class = ActorClass::human;
    CHECK(adapter_from_envelope(to_envelope(human)) == human);

    HopRecord h;
    h.phase = "issueDecision";
    h.adapter_id = "insurance_house_adapter";
    h.fields_read = {"request_valid", "tax_status"};
    h.fields_written = {"decision"};
    h.timestamp_utc = 1755860000000ull;
    CHECK(hop_from_envelope(to_envelope(h)) == h);
}

TEST_CASE("codec rejects malformed envelopes") {
    auto good = to_envelope(tiny());
    SUBCASE("missing key") {
        good.erase("entryPhase");
        CHECK_THROWS_AS(descriptor_from_envelope(good), SwarmError);
    }
    SUBCASE("wrong type") {
        good["version"] = "one";
        CHECK_THROWS_AS(descriptor_from_envelope(good), SwarmError);
    }
    SUBCASE("unknown category label") {
        good["fields"][0]["category"] = "astrology";
        CHECK_THROWS_AS(descriptor_from_envelope(good), SwarmError);
    }
    SUBCASE("unknown outcome label") {
        // tiny()'s close phase ends in ISSUED; corrupt it.
        good["phases"][1]["transitions"][0]["to"]["terminal"] = "SHRUGGED";
        CHECK_THROWS_AS(descriptor_from_envelope(good), SwarmError);
    }
    SUBCASE("stray key is rejected") {
        good["vendorExtension"] = true;
        CHECK_THROWS_AS(descriptor_from_envelope(good), SwarmError);
    }
}

TEST_CASE("label round trips") {
    for (auto c : {DataCategory::identity, DataCategory::employment, DataCategory::income,
                   DataCategory::tax, DataCategory::dividend, DataCategory::medical,
                   DataCategory::contact, DataCategory::decision}) {
        auto back = category_from_label(category_label(c));
        REQUIRE(back.has_value());
        CHECK(*back == c);
    }
    CHECK(!category_from_label("unknown").has_value());
    for (auto a : {ActorClass::software, ActorClass::human}) {
        auto back = actor_class_from_label(actor_class_label(a));
        REQUIRE(back.has_value());
        CHECK(*back == a);
    }
    for (auto s : {InstanceStatus::RUNNING, InstanceStatus::ISSUED, InstanceStatus::DENIED,
                   InstanceStatus::FAILED, InstanceStatus::CANCELLED}) {
        auto back = status_from_label(status_label(s));
        REQUIRE(back.has_value());
        CHECK(*back == s);
    }
    CHECK(std::string(outcome_label(Outcome::ISSUED)) == "ISSUED");
    CHECK(std::string(outcome_label(Outcome::DENIED)) == "DENIED");
    CHECK(std::string(outcome_label(Outcome::FAILED)) == "FAILED");
}

TEST_CASE("shipped choreography file matches the built-in descriptor byte for byte") {
    std::ifstream in(std::string(SWARMBUS_SOURCE_DIR) + "/choreographies/issue_ehic.swarm",
                     std::ios::binary);
    REQUIRE(in.good());
    std::stringstream buf;
    buf << in.rdbuf();
    auto expected = envelope::encode(to_envelope(healthfuse::build_issue_ehic_descriptor())) + "\n";
    CHECK(buf.str() == expected);
}
