#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "generators.hpp"
#include "oracles.hpp"
#include "swarmbus/healthfuse.hpp"
#include "swarmbus/verifier.hpp"

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

/// A → B, A outputs {x}, launch {id}.
SwarmDescriptor linear() {
    SwarmDescriptor d;
    d.name = "linear";
    d.fields = {{"id", DataCategory::identity, Sensitivity::personal},
                {"x", DataCategory::decision, Sensitivity::non_personal}};
    PhaseSpec a;
    a.name = "a";
    a.target_role = "alpha";
    a.input_fields = {"id"};
    a.output_fields = {"x"};
    a.transitions = {always_to("b")};
    PhaseSpec b;
    b.name = "b";
    b.target_role = "beta";
    b.input_fields = {"id", "x"};
    b.transitions = {always_end(Outcome::ISSUED)};
    d.phases = {a, b};
    d.entry_phase = "a";
    return d;
}

/// a → (b | c) → d; only b outputs {y}.
SwarmDescriptor diamond() {
    SwarmDescriptor d;
    d.name = "diamond";
    d.fields = {{"id", DataCategory::identity, Sensitivity::personal},
                {"pick", DataCategory::decision, Sensitivity::non_personal},
                {"y", DataCategory::decision, Sensitivity::non_personal}};
    PhaseSpec a;
    a.name = "a";
    a.target_role = "alpha";
    a.input_fields = {"id"};
    Transition to_b;
    to_b.guard_field = "pick";
    to_b.guard_literal = "left";
    to_b.next_phase = "b";
    a.transitions = {to_b, always_to("c")};
    PhaseSpec b;
    b.name = "b";
    b.target_role = "beta";
    b.output_fields = {"y"};
    b.transitions = {always_to("d")};
    PhaseSpec c;
    c.name = "c";
    c.target_role = "gamma";
    c.transitions = {always_to("d")};
    PhaseSpec dd;
    dd.name = "d";
    dd.target_role = "delta";
    dd.input_fields = {"id"};
    dd.transitions = {always_end(Outcome::ISSUED)};
    d.phases = {a, b, c, dd};
    d.entry_phase = "a";
    return d;
}

std::vector<AdapterIdentity> fleet_for(const SwarmDescriptor& d) {
    return gen::benign_setup(d).adapters;
}

std::set<std::pair<std::string, std::string>> as_pairs(const VerificationReport& r) {
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& v : r.violations) out.insert({v.phase, violation_kind_name(v.kind)});
    return out;
}

std::size_t count_kind(const VerificationReport& r, ViolationKind k) {
    return static_cast<std::size_t>(std::count_if(
        r.violations.begin(), r.violations.end(), [&](const Violation& v) { return v.kind == k; }));
}

} // namespace

TEST_CASE("linear chain accumulates outputs") {
    auto st = propagate_fields(linear(), {"id"});
    CHECK(st.per_phase.at("a") == FieldSet{"id"});
    CHECK(st.per_phase.at("b") == FieldSet{"id", "x"});
}

TEST_CASE("diamond join keeps only fields present on every branch") {
    auto st = propagate_fields(diamond(), {"id", "pick"});
    CHECK(st.per_phase.at("a") == FieldSet{"id", "pick"});
    CHECK(st.per_phase.at("b") == FieldSet{"id", "pick"});
    CHECK(st.per_phase.at("c") == FieldSet{"id", "pick"});
    // y reaches d only along the b branch, so it is not guaranteed.
    CHECK(st.per_phase.at("d") == FieldSet{"id", "pick"});
    CHECK(st.per_phase.at("d").count("y") == 0);
}

TEST_CASE("propagate rejects bad inputs") {
    CHECK_THROWS_AS(propagate_fields(linear(), {"ghost_field"}), SwarmError);
    auto broken = linear();
    broken.entry_phase = "zzz";
    CHECK_THROWS_AS(propagate_fields(broken, {"id"}), SwarmError);
}

TEST_CASE("demo descriptor propagation matches exhaustive path enumeration") {
    auto d = healthfuse::build_issue_ehic_descriptor();
    auto launch = d.launch_field_names();
    CHECK(launch == FieldSet{"person_id", "insurance_type", "has_dividends"});

    auto st = propagate_fields(d, launch);
    auto expected = oracles::must_available(d, launch);
    CHECK(st.per_phase == expected);

    CHECK(st.per_phase.at("verifyIdentity") == launch);
    const auto& div = st.per_phase.at("dividendStatistics");
    CHECK(div.count("person_id") == 1);
    CHECK(div.count("has_dividends") == 1);
    CHECK(div.count("taxes_due") == 1);
    // Outputs of later phases never flow backwards.
    CHECK(div.count("decision") == 0);
    // issueDecision is reachable straight from verifyIdentity on a deny,
    // so only first-phase outputs are guaranteed there.
    const auto& dec = st.per_phase.at("issueDecision");
    CHECK(dec.count("identity_card") == 1);
    CHECK(dec.count("tax_receipt") == 0);
}

TEST_CASE("demo descriptor with demo adapters verifies clean") {
    auto d = healthfuse::build_issue_ehic_descriptor();
    auto report = verify(d, healthfuse::demo_adapter_identities(), d.launch_field_names());
    for (const auto& v : report.violations) INFO(format_report(report));
    CHECK(report.ok);
    CHECK(report.violations.empty());
}

TEST_CASE("stripping the tax category from the fiscal adapter yields one denial") {
    auto d = healthfuse::build_issue_ehic_descriptor();
    auto adapters = healthfuse::demo_adapter_identities();
    for (auto& a : adapters)
        if (a.role == "fiscal-agency") a.readable_categories.erase(DataCategory::tax);
    auto report = verify(d, adapters, d.launch_field_names());
    CHECK(!report.ok);
    REQUIRE(count_kind(report, ViolationKind::CATEGORY_DENIED) == 1);
    auto it = std::find_if(report.violations.begin(), report.violations.end(),
                           [](const Violation& v) { return v.kind == ViolationKind::CATEGORY_DENIED; });
    CHECK(it->phase == "taxReceipt");
    CHECK(it->detail.find("taxes_due") != std::string::npos);
}

TEST_CASE("human adapters are rejected from choreographies") {
    auto d = linear();
    auto adapters = fleet_for(d);
    adapters[0].actor_class = ActorClass::human; // role alpha, phase a
    auto report = verify(d, adapters, {"id"});
    CHECK(!report.ok);
    CHECK(count_kind(report, ViolationKind::HUMAN_IN_AUTOMATED_FLOW) == 1);
    CHECK(report.violations.front().phase == "a");
}

TEST_CASE("unstaffed role is flagged on every phase that needs it") {
    auto d = healthfuse::build_issue_ehic_descriptor();
    auto adapters = healthfuse::demo_adapter_identities();
    std::erase_if(adapters, [](const AdapterIdentity& a) { return a.role == "fiscal-agency"; });
    auto report = verify(d, adapters, d.launch_field_names());
    CHECK(!report.ok);
    // incomeDeclaration and taxReceipt both target fiscal-agency.
    CHECK(count_kind(report, ViolationKind::NO_ADAPTER_FOR_ROLE) == 2);
    auto pairs = as_pairs(report);
    CHECK(pairs.count({"incomeDeclaration", "NO_ADAPTER_FOR_ROLE"}) == 1);
    CHECK(pairs.count({"taxReceipt", "NO_ADAPTER_FOR_ROLE"}) == 1);
}

TEST_CASE("a revoked run grant is flagged") {
    auto d = healthfuse::build_issue_ehic_descriptor();
    auto adapters = healthfuse::demo_adapter_identities();
    for (auto& a : adapters)
        if (a.role == "insurance-agency") a.run_grants.clear();
    auto report = verify(d, adapters, d.launch_field_names());
    CHECK(count_kind(report, ViolationKind::MISSING_RUN_GRANT) == 1);
    CHECK(as_pairs(report).count({"issueDecision", "MISSING_RUN_GRANT"}) == 1);
}

TEST_CASE("missing launch field surfaces as unsourced input") {
    auto d = linear();
    auto report = verify(d, fleet_for(d), FieldSet{});
    CHECK(!report.ok);
    CHECK(count_kind(report, ViolationKind::UNSOURCED_INPUT) >= 1);
    CHECK(as_pairs(report).count({"a", "UNSOURCED_INPUT"}) == 1);
}

TEST_CASE("guard fields must be sourced too") {
    // A guards on a field nothing outputs and the launch set omits.
    auto d = diamond();
    auto setup = gen::benign_setup(d);
    FieldSet launch = setup.launch;
    launch.erase("pick");
    auto report = verify(d, setup.adapters, launch);
    CHECK(!report.ok);
    auto pairs = as_pairs(report);
    CHECK(pairs.count({"a", "UNSOURCED_INPUT"}) == 1);
}

TEST_CASE("guards over the phase's own outputs are fine") {
    // The demo descriptor's first phase branches on deny, which it outputs
    // itself; that must not be a violation.
    auto d = healthfuse::build_issue_ehic_descriptor();
    auto report = verify(d, healthfuse::demo_adapter_identities(), d.launch_field_names());
    CHECK(report.ok);
}

TEST_CASE("verify is pure and reports are sorted") {
    gen::Rng rng(0xc0ffee01);
    for (int i = 0; i < 50; ++i) {
        auto d = gen::random_descriptor(rng);
        auto adapters = gen::random_adapters(rng, d);
        auto launch = gen::random_launch(rng, d);
        auto r1 = verify(d, adapters, launch);
        auto r2 = verify(d, adapters, launch);
        REQUIRE(r1.ok == r2.ok);
        REQUIRE(r1.violations == r2.violations);
        auto key = [](const Violation& v) {
            return std::make_tuple(v.phase, static_cast<int>(v.kind), v.detail);
        };
        auto cmp = [&](const Violation& a, const Violation& b) { return key(a) < key(b); };
        CHECK(std::is_sorted(r1.violations.begin(), r1.violations.end(), cmp));
        CHECK(std::adjacent_find(r1.violations.begin(), r1.violations.end()) ==
              r1.violations.end());
    }
}

TEST_CASE("verify agrees with the brute force oracle") {
    gen::Rng rng(0xc0ffee02);
    int disagreements = 0;
    int not_ok = 0;
    for (int i = 0; i < 300; ++i) {
        auto d = gen::random_descriptor(rng);
        auto adapters = gen::random_adapters(rng, d);
        auto launch = gen::random_launch(rng, d);
        auto report = verify(d, adapters, launch);
        auto oracle = oracles::verify_oracle(d, adapters, launch);
        if (!report.ok) ++not_ok;
        if (report.ok != oracle.ok || as_pairs(report) != oracle.violations) {
            ++disagreements;
            CAPTURE(i);
            CAPTURE(format_report(report));
            REQUIRE(report.ok == oracle.ok);
            REQUIRE(as_pairs(report) == oracle.violations);
        }
    }
    CHECK(disagreements == 0);
    // The generator must actually exercise the violation space.
    CHECK(not_ok > 50);
    CHECK(not_ok < 300);
}

TEST_CASE("benign setups verify clean by construction") {
    gen::Rng rng(0xc0ffee03);
    int clean = 0;
    for (int i = 0; i < 100; ++i) {
        auto d = gen::random_descriptor(rng);
        auto setup = gen::benign_setup(d);
        auto report = verify(d, setup.adapters, setup.launch);
        auto oracle = oracles::verify_oracle(d, setup.adapters, setup.launch);
        REQUIRE(report.ok == oracle.ok);
        if (report.ok) ++clean;
    }
    // benign_setup staffs and grants everything; the only residual failure
    // mode is an unsourced input on a join, which the generator makes rare.
    CHECK(clean > 60);
}

TEST_CASE("last registration of a role wins") {
    AdapterIdentity first;
    first.adapter_id = "old";
    first.role = "alpha";
    AdapterIdentity second;
    second.adapter_id = "new";
    second.role = "alpha";
    auto resolved = resolve_roles({first, second});
    REQUIRE(resolved.count("alpha") == 1);
    CHECK(resolved.at("alpha").adapter_id == "new");
}

TEST_CASE("report rendering is one tab separated line per violation") {
    auto d = linear();
    auto adapters = fleet_for(d);
    adapters[0].actor_class = ActorClass::human;
    auto report = verify(d, adapters, {"id"});
    auto text = format_report(report);
    CHECK(text.find("a\tHUMAN_IN_AUTOMATED_FLOW\t") != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') >= 1);
}
