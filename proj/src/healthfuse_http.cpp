#include "swarmbus/healthfuse_http.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include <httplib.h>

#include "swarmbus/errors.hpp"

namespace swarmbus::healthfuse {
namespace {

int http_status_for(Errc code) {
    switch (code) {
    case Errc::UNAUTHENTICATED:
    case Errc::PROOF_MISMATCH: return 401;
    case Errc::NO_CONSENT:
    case Errc::NOT_OWNER: return 403;
    case Errc::UNKNOWN_DESCRIPTOR:
    case Errc::UNKNOWN_INSTANCE:
    case Errc::UNKNOWN_RECORD:
    case Errc::UNKNOWN_TICKET:
    case Errc::UNKNOWN_TOKEN:
    case Errc::UNKNOWN_PROFILE: return 404;
    case Errc::LENGTH_OVERFLOW: return 413;
    case Errc::BAD_LAUNCH_FIELDS:
    case Errc::MALFORMED_MESSAGE:
    case Errc::WEAK_ITERATIONS:
    case Errc::INVALID_ARGUMENT: return 400;
    default: return 500;
    }
}

void send_json(httplib::Response& res, int status, const envelope::Value& body) {
    res.status = status;
    res.set_content(envelope::encode(body) + "\n", "application/json");
}

void send_error(httplib::Response& res, Errc code, const std::string& detail) {
    envelope::Value body;
    body["code"] = errc_name(code);
    body["detail"] = detail;
    send_json(res, http_status_for(code), body);
}

} // namespace

struct PortalService::Impl {
    HealthfuseWorld& world;
    httplib::Server server;
    std::uint16_t requested_port;
    std::uint16_t bound_port = 0;
    std::thread listener;
    std::atomic<bool> started{false};

    std::mutex auth_mutex;
    std::map<std::string, std::unique_ptr<ScramServer>> pending; // sessionId -> handshake
    std::map<std::string, std::string> sessions;                 // bearer token -> subject
    std::map<std::string, std::string> request_owner;            // instance -> subject

    std::mutex runner_mutex;
    std::vector<std::thread> runners;

    explicit Impl(HealthfuseWorld& w, std::uint16_t port) : world(w), requested_port(port) {
        route();
    }

    std::string authenticate(const httplib::Request& req) {
        std::string header = req.get_header_value("Authorization");
        const std::string scheme = "Bearer ";
        if (header.rfind(scheme, 0) != 0)
            fail(Errc::UNAUTHENTICATED, "missing bearer session token");
        std::lock_guard lock(auth_mutex);
        auto it = sessions.find(header.substr(scheme.size()));
        if (it == sessions.end()) fail(Errc::UNAUTHENTICATED, "unknown session token");
        return it->second;
    }

    void handle(httplib::Response& res,
                const std::function<envelope::Value()>& body, int ok_status = 200) {
        try {
            send_json(res, ok_status, body());
        } catch (const SwarmError& e) {
            send_error(res, e.code(), e.what());
        } catch (const std::exception& e) {
            send_error(res, Errc::IO_ERROR, e.what());
        }
    }

    void route() {
        server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                envelope::Value in = envelope::decode(req.body);
                envelope::Value out;
                if (in.contains("clientFirst")) {
                    auto scram = std::make_unique<ScramServer>(*world.credentials());
                    auto step = scram->step(in.at("clientFirst").get<std::string>());
                    std::string session_id = fresh_id();
                    out["serverFirst"] = step.outgoing.value_or("");
                    out["sessionId"] = session_id;
                    std::lock_guard lock(auth_mutex);
                    pending.emplace(session_id, std::move(scram));
                    return out;
                }
                if (!in.contains("sessionId") || !in.contains("clientFinal"))
                    fail(Errc::MALFORMED_MESSAGE,
                         "expected clientFirst, or sessionId with clientFinal");
                std::unique_ptr<ScramServer> scram;
                {
                    std::lock_guard lock(auth_mutex);
                    auto it = pending.find(in.at("sessionId").get<std::string>());
                    if (it == pending.end())
                        fail(Errc::UNAUTHENTICATED, "unknown login session");
                    scram = std::move(it->second);
                    pending.erase(it);
                }
                auto step = scram->step(in.at("clientFinal").get<std::string>());
                std::string token = fresh_id();
                out["serverFinal"] = step.outgoing.value_or("");
                out["token"] = token;
                std::lock_guard lock(auth_mutex);
                sessions.emplace(token, scram->principal());
                return out;
            });
        });

        server.Post("/insurance-requests",
                    [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                std::string subject = authenticate(req);
                envelope::Value in = envelope::decode(req.body);
                std::string id =
                    world.request_insurance(subject, in.at("insuranceType").get<std::string>());
                {
                    std::lock_guard lock(auth_mutex);
                    request_owner.emplace(id, subject);
                }
                // "wait for the request to be validated": the run happens
                // behind the 202, the citizen polls for the decision.
                std::lock_guard lock(runner_mutex);
                runners.emplace_back([this, id] {
                    try {
                        world.bus().run_to_completion(id);
                    } catch (const SwarmError&) {
                        // terminal state already records the failure
                    }
                });
                envelope::Value out;
                out["id"] = id;
                return out;
            }, 202);
        });

        server.Get(R"(/insurance-requests/([0-9a-f]+))",
                   [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                std::string subject = authenticate(req);
                std::string id = req.matches[1];
                {
                    std::lock_guard lock(auth_mutex);
                    auto it = request_owner.find(id);
                    if (it == request_owner.end()) fail(Errc::UNKNOWN_INSTANCE, id);
                    if (it->second != subject)
                        fail(Errc::NOT_OWNER, "request belongs to another citizen");
                }
                StatusView s = world.bus().status(id);
                envelope::Value out;
                out["status"] = status_label(s.status);
                if (s.status == InstanceStatus::ISSUED || s.status == InstanceStatus::DENIED)
                    out["decision"] = to_envelope(world.decision(id));
                return out;
            });
        });

        server.Post("/records", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                std::string subject = authenticate(req);
                std::string filename;
                std::string content;
                if (req.is_multipart_form_data()) {
                    const auto& file = req.get_file_value("file");
                    filename = file.filename.empty() ? "upload.bin" : file.filename;
                    content = file.content;
                } else {
                    filename = req.has_param("filename") ? req.get_param_value("filename")
                                                         : "upload.bin";
                    content = req.body;
                }
                envelope::Value out;
                out["recordId"] = world.records().upload(subject, filename, content,
                                                         kPortalActor);
                return out;
            }, 201);
        });

        server.Get("/records", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                std::string subject = authenticate(req);
                envelope::Value out;
                out["records"] = envelope::Value::array();
                for (const auto& info : world.records().list(subject))
                    out["records"].push_back({{"filename", info.filename},
                                              {"recordId", info.record_id},
                                              {"size", static_cast<std::uint64_t>(info.size)},
                                              {"uploadedAtUtc", info.uploaded_at_ms}});
                return out;
            });
        });

        server.Get(R"(/records/([0-9a-f]+))",
                   [this](const httplib::Request& req, httplib::Response& res) {
            try {
                std::string subject = authenticate(req);
                std::string content = world.records().download(subject, req.matches[1],
                                                               kPortalActor);
                res.status = 200;
                res.set_content(content, "application/octet-stream");
            } catch (const SwarmError& e) {
                send_error(res, e.code(), e.what());
            }
        });

        server.Delete(R"(/records/([0-9a-f]+))",
                      [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                std::string subject = authenticate(req);
                world.records().remove(subject, req.matches[1], kPortalActor);
                envelope::Value out;
                out["ok"] = true;
                return out;
            });
        });

        server.Post("/consents", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                std::string subject = authenticate(req);
                envelope::Value in = envelope::decode(req.body);
                std::set<DataCategory> categories;
                for (const auto& c : in.at("categories")) {
                    auto cat = category_from_label(c.get<std::string>());
                    if (!cat)
                        fail(Errc::INVALID_ARGUMENT,
                             "unknown category " + c.get<std::string>());
                    categories.insert(*cat);
                }
                envelope::Value out;
                out["token"] = world.consents().grant(
                    subject, in.at("purpose").get<std::string>(), categories, kPortalActor);
                return out;
            }, 201);
        });

        server.Delete(R"(/consents/([0-9a-f]+))",
                      [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                std::string subject = authenticate(req);
                auto record = world.consents().find(req.matches[1]);
                if (!record || record->subject_id != subject)
                    fail(Errc::UNKNOWN_TOKEN, "no such consent for this citizen");
                world.consents().revoke(req.matches[1], kPortalActor);
                envelope::Value out;
                out["ok"] = true;
                return out;
            });
        });

        server.Get("/gdpr/access-log",
                   [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                std::string subject = authenticate(req);
                envelope::Value out;
                out["accesses"] = envelope::Value::array();
                for (const auto& record : world.audit().who_accessed(subject))
                    out["accesses"].push_back(to_envelope(record));
                return out;
            });
        });

        server.Post("/gdpr/erasure",
                    [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                std::string subject = authenticate(req);
                ErasureReport report = world.erasure().erase_subject(subject, kPortalActor);
                return to_envelope(report);
            });
        });

        server.Post("/support-tickets",
                    [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                std::string subject = authenticate(req);
                envelope::Value in = envelope::decode(req.body);
                envelope::Value out;
                out["ticketId"] = world.support().open_ticket(
                    subject, in.at("description").get<std::string>(),
                    in.at("consentToken").get<std::string>());
                return out;
            }, 201);
        });
    }
};

PortalService::PortalService(HealthfuseWorld& world, std::uint16_t port)
    : impl_(std::make_unique<Impl>(world, port)) {}

PortalService::~PortalService() { stop(); }

void PortalService::start() {
    if (impl_->started.exchange(true)) return;
    if (impl_->requested_port == 0) {
        int p = impl_->server.bind_to_any_port("127.0.0.1");
        if (p <= 0) fail(Errc::IO_ERROR, "cannot bind portal port");
        impl_->bound_port = static_cast<std::uint16_t>(p);
    } else {
        if (!impl_->server.bind_to_port("127.0.0.1", impl_->requested_port))
            fail(Errc::IO_ERROR, "cannot bind portal port");
        impl_->bound_port = impl_->requested_port;
    }
    impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void PortalService::stop() {
    if (!impl_->started.load()) return;
    impl_->server.stop();
    if (impl_->listener.joinable()) impl_->listener.join();
    std::vector<std::thread> runners;
    {
        std::lock_guard lock(impl_->runner_mutex);
        runners.swap(impl_->runners);
    }
    for (auto& r : runners)
        if (r.joinable()) r.join();
    impl_->started = false;
}

std::uint16_t PortalService::port() const { return impl_->bound_port; }

} // namespace swarmbus::healthfuse
