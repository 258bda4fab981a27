#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memory>
#include <set>
#include <string>

#include "swarmbus/audit.hpp"
#include "swarmbus/consent.hpp"
#include "swarmbus/store.hpp"

using namespace swarmbus;

namespace {
const std::set<DataCategory> kIdTax{DataCategory::identity, DataCategory::tax};
}

TEST_CASE("grant, check, revoke") {
    MemoryAuditLog audit;
    ConsentRegistry reg(audit);

    CHECK(!reg.check("ana.pop", "issue_ehic", kIdTax));
    auto token = reg.grant("ana.pop", "issue_ehic", kIdTax, "portal");
    CHECK(!token.empty());

    CHECK(reg.check("ana.pop", "issue_ehic", kIdTax));
    CHECK(reg.check("ana.pop", "issue_ehic", {DataCategory::identity})); // subset ok
    CHECK(!reg.check("ana.pop", "issue_ehic", {DataCategory::medical})); // outside scope
    CHECK(!reg.check("ana.pop", "support", kIdTax));                     // other purpose
    CHECK(!reg.check("ion.vasile", "issue_ehic", kIdTax));               // other subject

    auto rec = reg.find(token);
    REQUIRE(rec.has_value());
    CHECK(rec->subject_id == "ana.pop");
    CHECK(rec->purpose == "issue_ehic");
    CHECK(rec->categories == kIdTax);
    CHECK(rec->active());
    CHECK(rec->granted_at_ms > 0);

    reg.revoke(token, "portal");
    CHECK(!reg.check("ana.pop", "issue_ehic", kIdTax));
    rec = reg.find(token);
    REQUIRE(rec.has_value());
    CHECK(!rec->active());
    REQUIRE(rec->revoked_at_ms.has_value());
    CHECK(*rec->revoked_at_ms >= rec->granted_at_ms);

    // Revoking twice is a no-op, revoking a fantasy token is an error.
    reg.revoke(token, "portal");
    CHECK_THROWS_AS(reg.revoke("no-such-token", "portal"), SwarmError);

    CHECK_THROWS_AS(reg.grant("ana.pop", "issue_ehic", {}, "portal"), SwarmError);
}

TEST_CASE("tokens are never reactivated, later grants are separate records") {
    MemoryAuditLog audit;
    ConsentRegistry reg(audit);
    auto t1 = reg.grant("ana.pop", "records", {DataCategory::medical}, "portal");
    reg.revoke(t1, "portal");
    auto t2 = reg.grant("ana.pop", "records", {DataCategory::medical}, "portal");
    CHECK(t1 != t2);
    CHECK(reg.check("ana.pop", "records", {DataCategory::medical}));
    CHECK(!reg.find(t1)->active());
    CHECK(reg.find(t2)->active());
    CHECK(reg.for_subject("ana.pop").size() == 2);
}

TEST_CASE("every consent event lands in the audit chain with category labels") {
    MemoryAuditLog audit;
    ConsentRegistry reg(audit);
    auto token = reg.grant("ana.pop", "issue_ehic", kIdTax, "portal");
    reg.revoke(token, "ana.pop");

    auto entries = audit.entries();
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].action == AuditAction::CONSENT_GRANT);
    CHECK(entries[0].actor_id == "portal");
    CHECK(entries[0].subject_id == "ana.pop");
    CHECK(entries[0].field_names == FieldSet{"identity", "tax"});
    CHECK(entries[1].action == AuditAction::CONSENT_REVOKE);
    CHECK(entries[1].actor_id == "ana.pop");
    CHECK(!audit.verify_chain().has_value());
}

TEST_CASE("consent survives a restart through its store") {
    MemoryAuditLog audit;
    auto store = std::make_shared<MemoryStore>("consents");
    std::string token;
    {
        ConsentRegistry reg(audit, store);
        token = reg.grant("ana.pop", "issue_ehic", kIdTax, "portal");
        reg.grant("ion.vasile", "support", {DataCategory::identity}, "portal");
    }
    {
        ConsentRegistry reg(audit, store);
        CHECK(reg.check("ana.pop", "issue_ehic", kIdTax));
        CHECK(reg.check("ion.vasile", "support", {DataCategory::identity}));
        reg.revoke(token, "portal");
    }
    {
        ConsentRegistry reg(audit, store);
        CHECK(!reg.check("ana.pop", "issue_ehic", kIdTax)); // revocation persisted
        CHECK(reg.check("ion.vasile", "support", {DataCategory::identity}));
    }
}

TEST_CASE("erasure drops the records but keeps the audited history") {
    MemoryAuditLog audit;
    auto store = std::make_shared<MemoryStore>("consents");
    ConsentRegistry reg(audit, store);
    reg.grant("ana.pop", "issue_ehic", kIdTax, "portal");
    reg.grant("ana.pop", "records", {DataCategory::medical}, "portal");
    reg.grant("ion.vasile", "issue_ehic", kIdTax, "portal");

    CHECK(reg.erasure_target_name() == "consents");
    CHECK_FALSE(reg.residual_scan("ana.pop").empty());
    auto outcome = reg.erase_subject_data("ana.pop");
    CHECK(outcome.items_deleted == 2);
    CHECK(outcome.residual_findings.empty());
    CHECK(reg.residual_scan("ana.pop").empty());
    CHECK(reg.for_subject("ana.pop").empty());
    CHECK(!reg.check("ana.pop", "issue_ehic", kIdTax));
    CHECK(reg.check("ion.vasile", "issue_ehic", kIdTax));
    CHECK(store->list_items("ana.pop").empty());

    // The grant entries are still in the chain, their categories readable.
    auto who = audit.who_accessed("ana.pop");
    CHECK(who.size() == 2);
    CHECK(!audit.verify_chain().has_value());
}

TEST_CASE("consent record envelope round trips") {
    ConsentRecord r;
    r.token = "tok123";
    r.subject_id = "ana.pop";
    r.purpose = "records";
    r.categories = {DataCategory::medical};
    r.granted_at_ms = 1700000000000;
    SUBCASE("active") {}
    SUBCASE("revoked") { r.revoked_at_ms = 1700000001000; }
    auto back = consent_record_from_envelope(to_envelope(r));
    CHECK(back.token == r.token);
    CHECK(back.subject_id == r.subject_id);
    CHECK(back.purpose == r.purpose);
    CHECK(back.categories == r.categories);
    CHECK(back.granted_at_ms == r.granted_at_ms);
    CHECK(back.revoked_at_ms == r.revoked_at_ms);
}
