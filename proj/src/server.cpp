#include "swarmbus/server.hpp"

#include <utility>

#include "swarmbus/errors.hpp"
#include "swarmbus/verifier.hpp"

namespace swarmbus {
namespace {

envelope::Value report_to_envelope(const VerificationReport& report) {
    envelope::Value v;
    v["ok"] = report.ok;
    v["violations"] = envelope::Value::array();
    for (const auto& violation : report.violations)
        v["violations"].push_back({{"detail", violation.detail},
                                   {"kind", violation_kind_name(violation.kind)},
                                   {"phase", violation.phase}});
    return v;
}

} // namespace

BusServer::BusServer(Bus& bus, ErasureEngine* erasure,
                     std::shared_ptr<CredentialStore> credentials, std::uint16_t port)
    : bus_(bus), erasure_(erasure), credentials_(std::move(credentials)), listener_(port) {
    if (!credentials_) fail(Errc::INVALID_ARGUMENT, "server needs a credential store");
}

BusServer::~BusServer() { stop(); }

void BusServer::start() {
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void BusServer::stop() {
    if (stopping_.exchange(true)) return;
    listener_.close();
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(workers_mutex_);
        for (auto& channel : session_channels_) channel->close();
        workers.swap(workers_);
    }
    for (auto& worker : workers)
        if (worker.joinable()) worker.join();
}

void BusServer::accept_loop() {
    while (!stopping_) {
        std::unique_ptr<TcpStream> stream;
        try {
            stream = listener_.accept();
        } catch (const SwarmError&) {
            return; // listener closed
        }
        std::lock_guard lock(workers_mutex_);
        if (stopping_) return;
        workers_.emplace_back([this, s = std::move(stream)]() mutable {
            serve_connection(std::move(s));
        });
    }
}

void BusServer::serve_connection(std::unique_ptr<TcpStream> stream) {
    std::shared_ptr<Channel> channel;
    try {
        channel = accept_channel(std::move(stream), *credentials_);
    } catch (const SwarmError&) {
        return; // handshake failure already reported on the wire
    }
    {
        std::lock_guard lock(workers_mutex_);
        session_channels_.push_back(channel);
    }
    while (true) {
        Channel::Message msg;
        try {
            msg = channel->receive();
        } catch (const SwarmError&) {
            return;
        }
        if (msg.type != FrameType::CONTROL) {
            channel->send_error(Errc::MALFORMED_MESSAGE, "expected a control frame");
            continue;
        }
        envelope::Value req;
        std::string op;
        try {
            req = envelope::decode(msg.body);
            op = req.at("op").get<std::string>();
        } catch (const SwarmError& e) {
            channel->send_error(e.code(), e.what());
            continue;
        } catch (const std::exception& e) {
            channel->send_error(Errc::MALFORMED_MESSAGE, e.what());
            continue;
        }
        if (op == "adapter-register") {
            AdapterIdentity identity;
            try {
                identity = adapter_from_envelope(req.at("identity"));
                auto link = std::make_shared<ChannelAdapterLink>(channel);
                bus_.register_adapter(identity, link, channel->principal());
            } catch (const SwarmError& e) {
                channel->send_error(e.code(), e.what());
                continue;
            } catch (const std::exception& e) {
                channel->send_error(Errc::MALFORMED_MESSAGE, e.what());
                continue;
            }
            envelope::Value ack;
            ack["adapterId"] = identity.adapter_id;
            ack["ok"] = true;
            channel->send(FrameType::CONTROL, envelope::encode(ack));
            // The channel now belongs to the bus-side link; this thread
            // must stop reading from it.
            return;
        }
        try {
            envelope::Value reply = dispatch(op, req, channel->principal());
            channel->send(FrameType::CONTROL, envelope::encode(reply));
        } catch (const SwarmError& e) {
            channel->send_error(e.code(), e.what());
        } catch (const std::exception& e) {
            channel->send_error(Errc::IO_ERROR, e.what());
        }
    }
}

envelope::Value BusServer::dispatch(const std::string& op, const envelope::Value& req,
                                    const std::string& principal) {
    envelope::Value reply;
    reply["ok"] = true;
    if (op == "ping") {
        reply["principal"] = principal;
        return reply;
    }
    if (op == "descriptor-register") {
        SwarmDescriptor d = descriptor_from_envelope(req.at("descriptor"));
        VerificationReport report = bus_.register_descriptor(d);
        reply["ok"] = report.ok;
        reply["report"] = report_to_envelope(report);
        return reply;
    }
    if (op == "descriptor-verify") {
        SwarmDescriptor d = descriptor_from_envelope(req.at("descriptor"));
        ValidationResult structural = validate_descriptor(d);
        if (!structural.ok())
            fail(Errc::INVALID_ARGUMENT, "descriptor invalid: " + structural.errors.front());
        VerificationReport report =
            verify(d, bus_.adapter_identities(), d.launch_field_names());
        reply["ok"] = report.ok;
        reply["report"] = report_to_envelope(report);
        return reply;
    }
    if (op == "launch") {
        std::map<std::string, envelope::Value> payload;
        for (const auto& [name, value] : req.at("payload").items()) payload.emplace(name, value);
        std::string instance_id = bus_.launch(
            req.at("descriptor").at("name").get<std::string>(),
            req.at("descriptor").at("version").get<std::uint32_t>(), payload,
            req.at("subjectId").get<std::string>(), req.at("consentToken").get<std::string>());
        reply["instanceId"] = instance_id;
        return reply;
    }
    if (op == "step") {
        bus_.step(req.at("instanceId").get<std::string>());
        reply["status"] = to_envelope(bus_.status(req.at("instanceId").get<std::string>()));
        return reply;
    }
    if (op == "run") {
        bus_.run_to_completion(req.at("instanceId").get<std::string>());
        reply["status"] = to_envelope(bus_.status(req.at("instanceId").get<std::string>()));
        return reply;
    }
    if (op == "status") {
        reply["status"] = to_envelope(bus_.status(req.at("instanceId").get<std::string>()));
        return reply;
    }
    if (op == "list-descriptors") {
        reply["descriptors"] = envelope::Value::array();
        for (const auto& [name, version] : bus_.descriptor_versions())
            reply["descriptors"].push_back({{"name", name}, {"version", version}});
        return reply;
    }
    if (op == "list-adapters") {
        reply["adapters"] = envelope::Value::array();
        for (const auto& identity : bus_.adapter_identities())
            reply["adapters"].push_back(to_envelope(identity));
        return reply;
    }
    if (op == "list-instances") {
        reply["instances"] = envelope::Value::array();
        for (const auto& id : bus_.instance_ids()) reply["instances"].push_back(id);
        return reply;
    }
    if (op == "consent-grant") {
        std::set<DataCategory> categories;
        for (const auto& c : req.at("categories")) {
            auto cat = category_from_label(c.get<std::string>());
            if (!cat) fail(Errc::INVALID_ARGUMENT, "unknown category " + c.get<std::string>());
            categories.insert(*cat);
        }
        reply["token"] =
            bus_.consents().grant(req.at("subjectId").get<std::string>(),
                                  req.at("purpose").get<std::string>(), categories, principal);
        return reply;
    }
    if (op == "consent-revoke") {
        bus_.consents().revoke(req.at("token").get<std::string>(), principal);
        return reply;
    }
    if (op == "erase") {
        if (!erasure_) fail(Errc::INVALID_ARGUMENT, "no erasure engine attached");
        ErasureReport report =
            erasure_->erase_subject(req.at("subjectId").get<std::string>(), principal);
        reply["ok"] = report.success();
        reply["report"] = to_envelope(report);
        return reply;
    }
    if (op == "who-accessed") {
        reply["accesses"] = envelope::Value::array();
        for (const auto& record :
             bus_.audit().who_accessed(req.at("subjectId").get<std::string>()))
            reply["accesses"].push_back(to_envelope(record));
        return reply;
    }
    if (op == "audit-verify") {
        auto first_bad = bus_.audit().verify_chain();
        reply["entries"] = static_cast<std::uint64_t>(bus_.audit().size());
        reply["ok"] = !first_bad.has_value();
        if (first_bad) reply["firstBadSeq"] = *first_bad;
        return reply;
    }
    fail(Errc::MALFORMED_MESSAGE, "unknown op " + op);
}

BusClient BusClient::connect(const std::string& host, std::uint16_t port,
                             const std::string& username, const std::string& password) {
    auto channel = open_channel(TcpStream::connect(host, port), username, password);
    return BusClient(std::move(channel));
}

envelope::Value BusClient::call(const std::string& op, envelope::Value args) {
    std::lock_guard lock(mutex_);
    args["op"] = op;
    channel_->send(FrameType::CONTROL, envelope::encode(args));
    Channel::Message msg = channel_->receive();
    if (msg.type == FrameType::ERROR) throw_channel_error(msg);
    if (msg.type != FrameType::CONTROL)
        fail(Errc::MALFORMED_MESSAGE, "unexpected reply frame type");
    return envelope::decode(msg.body);
}

void run_adapter(AdapterHost& host, const std::string& bus_host, std::uint16_t port,
                 const std::string& username, const std::string& password) {
    auto channel = open_channel(TcpStream::connect(bus_host, port), username, password);
    host.serve(*channel);
}

} // namespace swarmbus
