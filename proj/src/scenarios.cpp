#include "swarmbus/scenarios.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "swarmbus/errors.hpp"
#include "swarmbus/healthfuse.hpp"

namespace swarmbus::healthfuse {
namespace {

struct Report {
    std::string name;
    std::ostringstream out;
    bool ok = true;

    explicit Report(std::string n) : name(std::move(n)) { out << "scenario " << name << "\n"; }

    void line(const std::string& s) { out << s << "\n"; }
    void check(bool cond, const std::string& what) {
        out << (cond ? "ok " : "FAIL ") << what << "\n";
        if (!cond) ok = false;
    }
    ScenarioResult finish() {
        out << (ok ? "PASS" : "FAIL") << " " << name << "\n";
        return {name, ok, out.str()};
    }
};

std::string grant_flow_consent(HealthfuseWorld& world, const std::string& subject) {
    return world.consents().grant(subject, kDescriptorName,
                                  build_issue_ehic_descriptor().declared_categories(),
                                  kPortalActor);
}

std::vector<std::string> hop_phases(const StatusView& s) {
    std::vector<std::string> out;
    for (const auto& hop : s.hop_trail) out.push_back(hop.phase);
    return out;
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += " ";
        out += p;
    }
    return out;
}

std::size_t distinct_human_actors(AuditLog& audit, const std::string& subject) {
    std::set<std::string> humans;
    for (const auto& r : audit.who_accessed(subject))
        if (r.actor_class == ActorClass::human) humans.insert(r.actor_id);
    return humans.size();
}

/// Every DELIVER entry must carry a subset of its phase's declared inputs.
bool minimization_holds(AuditLog& audit, const SwarmDescriptor& d, std::string& offender) {
    for (const auto& e : audit.entries()) {
        if (e.action != AuditAction::DELIVER) continue;
        std::string phase_name;
        const std::string prefix = "phase ";
        if (e.detail.rfind(prefix, 0) == 0) phase_name = e.detail.substr(prefix.size());
        const PhaseSpec* phase = d.find_phase(phase_name);
        if (!phase) continue; // a different descriptor's delivery
        if (!std::includes(phase->input_fields.begin(), phase->input_fields.end(),
                           e.field_names.begin(), e.field_names.end())) {
            offender = "seq " + std::to_string(e.seq) + " at " + phase_name;
            return false;
        }
    }
    return true;
}

void report_contrast(Report& r, AuditLog& audit, const std::string& subject) {
    std::size_t humans = distinct_human_actors(audit, subject);
    r.line("human-actors automated-flow=" + std::to_string(humans) +
           " legacy-counter-flow=at-least-5-persons");
    r.check(humans == 0, "no human saw the citizen's data during the flow");
}

void report_chain(Report& r, AuditLog& audit) {
    auto bad = audit.verify_chain();
    r.line("audit-chain entries=" + std::to_string(audit.size()));
    r.check(!bad.has_value(), "audit chain verifies");
}

ScenarioResult happy_path(bool with_dividends) {
    Report r(with_dividends ? "happy-path-with-dividends" : "happy-path-no-dividends");
    HealthfuseWorld world;
    const std::string subject = with_dividends ? "ana.pop" : "ion.vasile";
    grant_flow_consent(world, subject);
    r.line("consent granted subject=" + subject + " purpose=issue_ehic");

    std::string id = world.request_insurance(subject, "EHIC");
    InsuranceDecision decision = world.run_and_decide(id);
    StatusView s = world.bus().status(id);
    auto phases = hop_phases(s);
    for (std::size_t i = 0; i < s.hop_trail.size(); ++i)
        r.line("hop " + std::to_string(i + 1) + " " + s.hop_trail[i].phase + " adapter=" +
               s.hop_trail[i].adapter_id);

    std::vector<std::string> expected = {"verifyIdentity", "employmentProof",
                                         "incomeDeclaration", "taxReceipt"};
    if (with_dividends) expected.push_back("dividendStatistics");
    expected.push_back("issueDecision");
    r.check(phases == expected, "hop trail is: " + join(expected));
    r.check(s.hop_trail.size() == (with_dividends ? 6u : 5u),
            std::to_string(with_dividends ? 6 : 5) + " hops");
    r.check(decision.outcome == InstanceStatus::ISSUED, "outcome ISSUED");
    r.check(!decision.card_id.empty(), "card id present: " + decision.card_id);
    if (with_dividends) {
        r.line("six-desk walk replaced by one request:");
        std::vector<std::pair<std::string, std::string>> steps = {
            {"identity card and a copy of it", "verifyIdentity"},
            {"employment proof", "employmentProof"},
            {"income declaration and its confirmation", "incomeDeclaration"},
            {"receipt proving all taxes were paid", "taxReceipt"},
            {"financial statistics for dividend income", "dividendStatistics"},
            {"insurance issuance decision", "issueDecision"}};
        for (std::size_t i = 0; i < steps.size(); ++i)
            r.line("  step " + std::to_string(i + 1) + " (" + steps[i].first + ") -> " +
                   phases[i]);
    }
    report_contrast(r, world.audit(), subject);
    std::string offender;
    r.check(minimization_holds(world.audit(), build_issue_ehic_descriptor(), offender),
            "every delivery within declared inputs" + (offender.empty() ? "" : ": " + offender));
    report_chain(r, world.audit());
    return r.finish();
}

ScenarioResult tax_denial() {
    Report r("tax-denial");
    HealthfuseWorld world;
    const std::string subject = "radu.ilie";
    grant_flow_consent(world, subject);
    std::string id = world.request_insurance(subject, "EHIC");
    InsuranceDecision decision = world.run_and_decide(id);
    StatusView s = world.bus().status(id);
    for (std::size_t i = 0; i < s.hop_trail.size(); ++i)
        r.line("hop " + std::to_string(i + 1) + " " + s.hop_trail[i].phase);
    r.check(decision.outcome == InstanceStatus::DENIED, "outcome DENIED");
    r.check(decision.reason_phase == "taxReceipt", "denial reason phase is taxReceipt");
    r.check(decision.card_id.empty(), "no card issued");
    std::vector<std::string> expected = {"verifyIdentity", "employmentProof",
                                         "incomeDeclaration", "taxReceipt", "issueDecision"};
    r.check(hop_phases(s) == expected,
            "failed check routed forward to the decision, not aborted");
    report_contrast(r, world.audit(), subject);
    report_chain(r, world.audit());
    return r.finish();
}

ScenarioResult erasure_mid_run() {
    Report r("erasure-mid-run");
    HealthfuseWorld world;
    const std::string subject = "ana.pop";
    grant_flow_consent(world, subject);
    world.consents().grant(subject, kPurposeRecords, {DataCategory::medical}, kPortalActor);
    std::string record_id =
        world.records().upload(subject, "radiography.png", "fake-image-bytes", kPortalActor);
    r.line("medical record uploaded " + record_id);

    std::string id = world.request_insurance(subject, "EHIC");
    world.bus().step(id);
    world.bus().step(id);
    StatusView before = world.bus().status(id);
    r.check(before.status == InstanceStatus::RUNNING,
            "instance RUNNING mid-flow at " + before.current_phase);

    ErasureReport report = world.erasure().erase_subject(subject, kPortalActor);
    for (const auto& [store, items] : report.per_store)
        r.line("erased store=" + store + " items=" + std::to_string(items));
    r.line("cancelled " + std::to_string(report.cancelled_instances.size()) + " instance(s)");

    r.check(std::find(report.cancelled_instances.begin(), report.cancelled_instances.end(),
                      id) != report.cancelled_instances.end(),
            "the running instance was cancelled");
    StatusView after = world.bus().status(id);
    r.check(after.status == InstanceStatus::CANCELLED, "status now CANCELLED");
    r.check(report.residual_findings.empty(), "residual scan found nothing");
    for (const auto& f : report.residual_findings) r.line("residual: " + f);

    bool record_gone = false;
    try {
        world.records().download(subject, record_id, kPortalActor);
    } catch (const SwarmError& e) {
        record_gone = e.code() == Errc::UNKNOWN_RECORD || e.code() == Errc::NO_CONSENT;
    }
    r.check(record_gone, "medical record unreadable after erasure");

    auto trail = world.audit().who_accessed(subject);
    std::size_t redacted = 0;
    for (const auto& e : trail) redacted += e.redacted ? 1 : 0;
    r.line("access trail entries=" + std::to_string(trail.size()) + " redacted=" +
           std::to_string(redacted));
    r.check(!trail.empty(), "access trail survives erasure");
    r.check(redacted > 0, "pre-erasure entries are marked redacted");
    report_chain(r, world.audit());
    return r.finish();
}

ScenarioResult support_with_consent() {
    Report r("support-with-consent");
    HealthfuseWorld world;
    const std::string subject = "ion.vasile";
    const std::string staff = "dana.suport";
    std::string token =
        world.consents().grant(subject, kPurposeSupport, {DataCategory::identity}, kPortalActor);
    r.line("support consent granted token=" + token);
    std::string ticket =
        world.support().open_ticket(subject, "cannot download my insurance card", token);
    r.line("ticket opened " + ticket);

    auto view = world.support().view(staff, ticket);
    r.check(view.subject_id == subject, "staff sees the reporting citizen's ticket");
    r.check(distinct_human_actors(world.audit(), subject) == 1,
            "exactly one human actor on the trail after the consented view");

    world.consents().revoke(token, kPortalActor);
    bool blocked = false;
    try {
        world.support().view(staff, ticket);
    } catch (const SwarmError& e) {
        blocked = e.code() == Errc::NO_CONSENT;
    }
    r.check(blocked, "view after revocation refused with NO_CONSENT");
    r.check(distinct_human_actors(world.audit(), subject) == 1,
            "human actor count unchanged by the refused view");

    bool humans_only_support = true;
    for (const auto& e : world.audit().entries())
        if (e.actor_class == ActorClass::human && e.action != AuditAction::SUPPORT_ACCESS)
            humans_only_support = false;
    r.check(humans_only_support, "humans appear in the log only under SUPPORT_ACCESS");
    report_chain(r, world.audit());
    return r.finish();
}

} // namespace

std::vector<std::string> scenario_names() {
    return {"happy-path-with-dividends", "happy-path-no-dividends", "tax-denial",
            "erasure-mid-run", "support-with-consent"};
}

ScenarioResult run_scenario(const std::string& name) {
    if (name == "happy-path-with-dividends") return happy_path(true);
    if (name == "happy-path-no-dividends") return happy_path(false);
    if (name == "tax-denial") return tax_denial();
    if (name == "erasure-mid-run") return erasure_mid_run();
    if (name == "support-with-consent") return support_with_consent();
    fail(Errc::INVALID_ARGUMENT, "unknown scenario " + name +
                                     " (have: " + [] {
                                         std::string all;
                                         for (const auto& n : scenario_names())
                                             all += all.empty() ? n : ", " + n;
                                         return all;
                                     }() + ")");
}

} // namespace swarmbus::healthfuse
