// Operator entry point: host the bus, run institution adapters, manage
// descriptors and consents, inspect the audit trail, and play the canned
// demo scenarios. Every command is a thin wrapper over the library; the
// output is line-oriented so scripts can parse it.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "swarmbus/bus.hpp"
#include "swarmbus/envelope.hpp"
#include "swarmbus/errors.hpp"
#include "swarmbus/healthfuse.hpp"
#include "swarmbus/scenarios.hpp"
#include "swarmbus/server.hpp"
#include "swarmbus/verifier.hpp"

namespace {

using namespace swarmbus;

struct Connection {
    std::string host = "127.0.0.1";
    std::uint16_t port = kDefaultBusPort;
    std::string user = "operator";
    std::string password = "operator-secret";

    BusClient client() const { return BusClient::connect(host, port, user, password); }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::IO_ERROR, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

envelope::Value load_envelope(const std::string& path) {
    return envelope::decode(read_file(path));
}

std::string join_fields(const envelope::Value& names) {
    std::string out;
    for (const auto& n : names) {
        if (!out.empty()) out += ",";
        out += n.get<std::string>();
    }
    return out;
}

void print_status(const envelope::Value& s) {
    std::cout << "instance " << s.at("instanceId").get<std::string>() << "\n"
              << "descriptor " << s.at("descriptor").at("name").get<std::string>() << " v"
              << s.at("descriptor").at("version").get<std::uint32_t>() << "\n"
              << "status " << s.at("status").get<std::string>() << "\n"
              << "phase " << s.at("currentPhase").get<std::string>() << "\n";
    if (s.contains("reasonPhase"))
        std::cout << "reasonPhase " << s.at("reasonPhase").get<std::string>() << "\n";
    if (s.contains("failureReason"))
        std::cout << "failureReason " << s.at("failureReason").get<std::string>() << "\n";
    std::size_t n = 0;
    for (const auto& hop : s.at("hopTrail"))
        std::cout << "hop " << ++n << " " << hop.at("phase").get<std::string>() << " adapter="
                  << hop.at("adapterId").get<std::string>() << " read=["
                  << join_fields(hop.at("fieldsRead")) << "] wrote=["
                  << join_fields(hop.at("fieldsWritten")) << "]\n";
}

void print_report(const envelope::Value& report) {
    for (const auto& v : report.at("violations"))
        std::cout << v.at("phase").get<std::string>() << "\t" << v.at("kind").get<std::string>()
                  << "\t" << v.at("detail").get<std::string>() << "\n";
}

int cmd_bus_start(const std::string& data_dir, std::uint16_t port, bool local_adapters) {
    // Signals are claimed before the server spawns threads so sigwait in
    // this thread is the only consumer.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    healthfuse::WorldConfig config;
    config.data_dir = data_dir;
    config.register_local_adapters = local_adapters;
    healthfuse::HealthfuseWorld world(config);
    BusServer server(world.bus(), &world.erasure(), world.credentials(), port);
    server.start();
    std::cout << "bus listening on 127.0.0.1:" << server.port() << " data=" << data_dir
              << (local_adapters ? " adapters=in-process" : " adapters=remote") << std::endl;

    int sig = 0;
    sigwait(&signals, &sig);
    std::cout << "shutting down" << std::endl;
    server.stop();
    return 0;
}

int cmd_adapter_run(const Connection& conn, const std::string& role,
                    const std::string& fixtures, std::string user, std::string password) {
    std::shared_ptr<const healthfuse::CitizenDirectory> citizens;
    if (fixtures.empty())
        citizens = std::make_shared<healthfuse::CitizenDirectory>(
            healthfuse::CitizenDirectory::demo_fixtures());
    else
        citizens = std::make_shared<healthfuse::CitizenDirectory>(
            healthfuse::CitizenDirectory::load_file(fixtures));
    auto host = healthfuse::make_institution_host(role, citizens);
    if (user.empty()) user = host->identity().adapter_id;
    if (password.empty()) password = user + "-secret";
    std::cout << "adapter " << host->identity().adapter_id << " serving role " << role
              << " via " << conn.host << ":" << conn.port << std::endl;
    run_adapter(*host, conn.host, conn.port, user, password);
    std::cout << "bus closed the channel, exiting" << std::endl;
    return 0;
}

int cmd_descriptor_verify(const std::string& file, const std::string& adapters_file) {
    SwarmDescriptor d = descriptor_from_envelope(load_envelope(file));
    ValidationResult structural = validate_descriptor(d);
    if (!structural.ok())
        fail(Errc::INVALID_ARGUMENT, "descriptor invalid: " + structural.errors.front());
    envelope::Value listed = load_envelope(adapters_file);
    std::vector<AdapterIdentity> adapters;
    for (const auto& a : listed.at("adapters")) adapters.push_back(adapter_from_envelope(a));
    VerificationReport report = verify(d, adapters, d.launch_field_names());
    std::cout << format_report(report);
    return report.ok ? 0 : 1;
}

int cmd_descriptor_register(const Connection& conn, const std::string& file) {
    BusClient client = conn.client();
    envelope::Value reply =
        client.call("descriptor-register", {{"descriptor", load_envelope(file)}});
    print_report(reply.at("report"));
    if (!reply.at("ok").get<bool>()) return 1;
    std::cout << "registered\n";
    return 0;
}

int cmd_swarm_launch(const Connection& conn, const std::string& name, std::uint32_t version,
                     const std::string& subject, const std::string& payload_file,
                     const std::string& consent_token) {
    BusClient client = conn.client();
    if (version == 0) {
        envelope::Value listed = client.call("list-descriptors");
        for (const auto& d : listed.at("descriptors"))
            if (d.at("name").get<std::string>() == name)
                version = std::max(version, d.at("version").get<std::uint32_t>());
        if (version == 0) fail(Errc::UNKNOWN_DESCRIPTOR, "no registered version of " + name);
    }
    envelope::Value args;
    args["descriptor"] = {{"name", name}, {"version", version}};
    args["payload"] = load_envelope(payload_file);
    args["subjectId"] = subject;
    args["consentToken"] = consent_token;
    envelope::Value reply = client.call("launch", args);
    std::string id = reply.at("instanceId").get<std::string>();
    std::cout << "launched " << id << "\n";
    envelope::Value run = client.call("run", {{"instanceId", id}});
    print_status(run.at("status"));
    return 0;
}

int cmd_swarm_status(const Connection& conn, const std::string& id) {
    BusClient client = conn.client();
    print_status(client.call("status", {{"instanceId", id}}).at("status"));
    return 0;
}

int cmd_audit_verify(const Connection& conn) {
    BusClient client = conn.client();
    envelope::Value reply = client.call("audit-verify");
    if (reply.at("ok").get<bool>()) {
        std::cout << "ok entries=" << reply.at("entries").get<std::uint64_t>() << "\n";
        return 0;
    }
    std::cout << "tampered firstBadSeq=" << reply.at("firstBadSeq").get<std::uint64_t>()
              << " entries=" << reply.at("entries").get<std::uint64_t>() << "\n";
    return 1;
}

int cmd_audit_who(const Connection& conn, const std::string& subject) {
    BusClient client = conn.client();
    envelope::Value reply = client.call("who-accessed", {{"subjectId", subject}});
    for (const auto& a : reply.at("accesses")) {
        std::cout << a.at("timestampUtc").get<std::uint64_t>() << "\t"
                  << a.at("actorId").get<std::string>() << "\t"
                  << a.at("actorClass").get<std::string>() << "\t"
                  << a.at("action").get<std::string>() << "\t["
                  << join_fields(a.at("fieldNames")) << "]";
        if (a.at("redacted").get<bool>()) std::cout << "\tredacted";
        if (a.contains("detail")) std::cout << "\t" << a.at("detail").get<std::string>();
        std::cout << "\n";
    }
    return 0;
}

int cmd_gdpr_erase(const Connection& conn, const std::string& subject) {
    BusClient client = conn.client();
    envelope::Value reply = client.call("erase", {{"subjectId", subject}});
    const envelope::Value& report = reply.at("report");
    for (const auto& row : report.at("perStore"))
        std::cout << "erased store=" << row.at("storeName").get<std::string>()
                  << " items=" << row.at("itemsDeleted").get<std::uint64_t>() << "\n";
    for (const auto& id : report.at("cancelledInstances"))
        std::cout << "cancelled " << id.get<std::string>() << "\n";
    for (const auto& f : report.at("residualFindings"))
        std::cout << "residual " << f.get<std::string>() << "\n";
    bool ok = reply.at("ok").get<bool>();
    std::cout << (ok ? "erasure complete" : "erasure incomplete") << "\n";
    return ok ? 0 : 1;
}

int cmd_consent_grant(const Connection& conn, const std::string& subject,
                      const std::string& purpose, const std::vector<std::string>& categories) {
    BusClient client = conn.client();
    envelope::Value labels = envelope::Value::array();
    for (const auto& c : categories) labels.push_back(c);
    envelope::Value reply = client.call(
        "consent-grant", {{"subjectId", subject}, {"purpose", purpose}, {"categories", labels}});
    std::cout << reply.at("token").get<std::string>() << "\n";
    return 0;
}

int cmd_consent_revoke(const Connection& conn, const std::string& token) {
    BusClient client = conn.client();
    client.call("consent-revoke", {{"token", token}});
    std::cout << "revoked\n";
    return 0;
}

int cmd_demo_scenario(const std::string& name) {
    healthfuse::ScenarioResult result = healthfuse::run_scenario(name);
    std::cout << result.report;
    return result.ok ? 0 : 1;
}

std::uint16_t env_port() {
    if (const char* v = std::getenv("SWARMBUS_PORT")) {
        int parsed = std::atoi(v);
        if (parsed > 0 && parsed <= 65535) return static_cast<std::uint16_t>(parsed);
    }
    return kDefaultBusPort;
}

std::string env_data_dir() {
    if (const char* v = std::getenv("SWARMBUS_DATA_DIR"); v && *v) return v;
    return "./data";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"swarmbus: privacy-enforcing service bus for executable choreographies"};
    app.require_subcommand(1);

    Connection conn;
    conn.port = env_port();
    std::string data_dir = env_data_dir();
    app.add_option("--host", conn.host, "bus host")->capture_default_str();
    app.add_option("--port", conn.port, "bus port")->capture_default_str();
    app.add_option("--user", conn.user, "login username")->capture_default_str();
    app.add_option("--password", conn.password, "login password")->capture_default_str();

    auto* bus = app.add_subcommand("bus", "host the message bus");
    auto* bus_start = bus->add_subcommand("start", "listen for adapters and clients");
    bool local_adapters = false;
    bus_start->add_option("--data-dir", data_dir, "state directory")->capture_default_str();
    bus_start->add_flag("--local-adapters", local_adapters,
                        "also run the demo institution adapters in-process");

    auto* adapter = app.add_subcommand("adapter", "run an institution adapter");
    auto* adapter_run = adapter->add_subcommand("run", "serve one role against the bus");
    std::string role, fixtures, adapter_user, adapter_password;
    adapter_run->add_option("role", role, "institution role")->required();
    adapter_run->add_option("--fixtures", fixtures, "citizen fixtures file");
    adapter_run->add_option("--adapter-user", adapter_user, "adapter login (default: adapter id)");
    adapter_run->add_option("--adapter-password", adapter_password, "adapter password");

    auto* descriptor = app.add_subcommand("descriptor", "verify or register choreographies");
    auto* d_verify = descriptor->add_subcommand("verify", "static check against an adapter list");
    std::string d_file, adapters_file;
    d_verify->add_option("file", d_file, "descriptor file")->required();
    d_verify->add_option("--adapters", adapters_file, "adapter identities file")->required();
    auto* d_register = descriptor->add_subcommand("register", "verify and store on the bus");
    std::string r_file;
    d_register->add_option("file", r_file, "descriptor file")->required();

    auto* swarm = app.add_subcommand("swarm", "launch and inspect swarm instances");
    auto* s_launch = swarm->add_subcommand("launch", "start a choreography for a subject");
    std::string s_name, s_subject, s_payload, s_consent;
    std::uint32_t s_version = 0;
    s_launch->add_option("name", s_name, "descriptor name")->required();
    s_launch->add_option("--subject", s_subject, "data subject id")->required();
    s_launch->add_option("--payload", s_payload, "launch payload file")->required();
    s_launch->add_option("--version", s_version, "descriptor version (default: latest)");
    s_launch->add_option("--consent", s_consent, "consent token reference");
    auto* s_status = swarm->add_subcommand("status", "payload-free instance status");
    std::string s_id;
    s_status->add_option("id", s_id, "instance id")->required();

    auto* audit = app.add_subcommand("audit", "audit log operations");
    auto* a_verify = audit->add_subcommand("verify", "recompute the hash chain");
    auto* a_who = audit->add_subcommand("who", "who accessed a subject's data");
    std::string a_subject;
    a_who->add_option("subject", a_subject, "data subject id")->required();

    auto* gdpr = app.add_subcommand("gdpr", "data subject rights");
    auto* g_erase = gdpr->add_subcommand("erase", "erase a subject everywhere");
    std::string g_subject;
    g_erase->add_option("subject", g_subject, "data subject id")->required();

    auto* consent = app.add_subcommand("consent", "grant or revoke consent");
    auto* c_grant = consent->add_subcommand("grant", "record a purpose-scoped grant");
    std::string c_subject, c_purpose;
    std::vector<std::string> c_categories;
    c_grant->add_option("subject", c_subject, "data subject id")->required();
    c_grant->add_option("purpose", c_purpose, "processing purpose")->required();
    c_grant->add_option("--categories", c_categories, "data categories")
        ->required()
        ->delimiter(',');
    auto* c_revoke = consent->add_subcommand("revoke", "withdraw a grant by token");
    std::string c_token;
    c_revoke->add_option("token", c_token, "consent token")->required();

    auto* demo = app.add_subcommand("demo", "canned scenarios");
    auto* demo_scenario = demo->add_subcommand("scenario", "run one scripted walk");
    std::string scenario_name;
    demo_scenario->add_option("name", scenario_name, "scenario name")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (bus_start->parsed()) return cmd_bus_start(data_dir, conn.port, local_adapters);
        if (adapter_run->parsed())
            return cmd_adapter_run(conn, role, fixtures, adapter_user, adapter_password);
        if (d_verify->parsed()) return cmd_descriptor_verify(d_file, adapters_file);
        if (d_register->parsed()) return cmd_descriptor_register(conn, r_file);
        if (s_launch->parsed())
            return cmd_swarm_launch(conn, s_name, s_version, s_subject, s_payload, s_consent);
        if (s_status->parsed()) return cmd_swarm_status(conn, s_id);
        if (a_verify->parsed()) return cmd_audit_verify(conn);
        if (a_who->parsed()) return cmd_audit_who(conn, a_subject);
        if (g_erase->parsed()) return cmd_gdpr_erase(conn, g_subject);
        if (c_grant->parsed()) return cmd_consent_grant(conn, c_subject, c_purpose, c_categories);
        if (c_revoke->parsed()) return cmd_consent_revoke(conn, c_token);
        if (demo_scenario->parsed()) return cmd_demo_scenario(scenario_name);
        std::cerr << "error: missing subcommand, see --help" << std::endl;
        return 2;
    } catch (const SwarmError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}
