#include "swarmbus/adapter.hpp"

#include <exception>

#include "swarmbus/errors.hpp"

namespace swarmbus {

envelope::Value to_envelope(const Delivery& d) {
    envelope::Value v;
    v["descriptor"] = {{"name", d.descriptor_name}, {"version", d.descriptor_version}};
    v["fields"] = envelope::Value::object();
    for (const auto& [name, value] : d.fields) v["fields"][name] = value;
    v["instanceId"] = d.instance_id;
    v["phase"] = d.phase;
    return v;
}

Delivery delivery_from_envelope(const envelope::Value& v) {
    Delivery d;
    d.descriptor_name = v.at("descriptor").at("name").get<std::string>();
    d.descriptor_version = v.at("descriptor").at("version").get<std::uint32_t>();
    for (const auto& [name, value] : v.at("fields").items()) d.fields.emplace(name, value);
    d.instance_id = v.at("instanceId").get<std::string>();
    d.phase = v.at("phase").get<std::string>();
    return d;
}

std::string encode_phase_result(const std::string& instance_id, const std::string& phase,
                                const PhaseResult& result) {
    envelope::Value v;
    v["instanceId"] = instance_id;
    v["outputs"] = envelope::Value::object();
    for (const auto& [name, value] : result.outputs) v["outputs"][name] = value;
    v["phase"] = phase;
    if (result.verdict_hint) v["verdictHint"] = *result.verdict_hint;
    return envelope::encode(v);
}

PhaseResult phase_result_from_envelope(const envelope::Value& v) {
    PhaseResult r;
    for (const auto& [name, value] : v.at("outputs").items()) r.outputs.emplace(name, value);
    if (v.contains("verdictHint")) r.verdict_hint = v.at("verdictHint");
    return r;
}

void AdapterHost::on_phase(const std::string& phase, PhaseHandler handler) {
    std::lock_guard lock(mutex_);
    handlers_[phase] = std::move(handler);
}

PhaseResult AdapterHost::handle(const Delivery& delivery) {
    auto key = std::make_pair(delivery.instance_id, delivery.phase);
    PhaseHandler handler;
    {
        std::lock_guard lock(mutex_);
        auto done = done_.find(key);
        if (done != done_.end()) return done->second;
        auto it = handlers_.find(delivery.phase);
        if (it == handlers_.end())
            fail(Errc::HANDLER_FAULT,
                 identity_.adapter_id + " has no handler for phase " + delivery.phase);
        handler = it->second;
    }
    PhaseResult result = handler(delivery);
    std::lock_guard lock(mutex_);
    done_[key] = result;
    return result;
}

std::size_t AdapterHost::erase_instances(const std::vector<std::string>& instance_ids) {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& id : instance_ids)
        n += std::erase_if(done_, [&](const auto& kv) { return kv.first.first == id; });
    return n;
}

std::vector<std::string> AdapterHost::scan_cache(const std::string& subject_id) const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> findings;
    for (const auto& [key, result] : done_)
        for (const auto& [name, value] : result.outputs)
            if (envelope::encode(value).find(subject_id) != std::string::npos)
                findings.push_back("adapter cache " + key.first + "/" + key.second);
    return findings;
}

std::size_t AdapterHost::cache_size() const {
    std::lock_guard lock(mutex_);
    return done_.size();
}

void AdapterHost::serve(Channel& channel) {
    {
        envelope::Value reg;
        reg["identity"] = to_envelope(identity_);
        reg["op"] = "adapter-register";
        channel.send(FrameType::CONTROL, envelope::encode(reg));
        Channel::Message ack = channel.receive();
        if (ack.type == FrameType::ERROR) throw_channel_error(ack);
        if (ack.type != FrameType::CONTROL)
            fail(Errc::MALFORMED_MESSAGE, "unexpected registration reply");
    }
    while (true) {
        Channel::Message msg;
        try {
            msg = channel.receive();
        } catch (const SwarmError& e) {
            if (e.code() == Errc::CHANNEL_CLOSED) return; // bus went away
            throw;
        }
        if (msg.type == FrameType::DELIVER) {
            Delivery delivery;
            try {
                delivery = delivery_from_envelope(envelope::decode(msg.body));
            } catch (const SwarmError& e) {
                channel.send_error(e.code(), e.what());
                continue;
            }
            try {
                PhaseResult result = handle(delivery);
                channel.send(FrameType::RETURN,
                             encode_phase_result(delivery.instance_id, delivery.phase, result));
            } catch (const SwarmError& e) {
                channel.send_error(e.code(), e.what());
            } catch (const std::exception& e) {
                channel.send_error(Errc::HANDLER_FAULT, e.what());
            }
            continue;
        }
        if (msg.type == FrameType::CONTROL) {
            envelope::Value req;
            try {
                req = envelope::decode(msg.body);
            } catch (const SwarmError& e) {
                channel.send_error(e.code(), e.what());
                continue;
            }
            std::string op = req.contains("op") ? req.at("op").get<std::string>() : "";
            envelope::Value reply;
            if (op == "erase") {
                std::vector<std::string> ids;
                for (const auto& id : req.at("instanceIds")) ids.push_back(id.get<std::string>());
                reply["erased"] = static_cast<std::uint64_t>(erase_instances(ids));
                reply["ok"] = true;
            } else if (op == "scan") {
                reply["findings"] = envelope::Value::array();
                for (const auto& f : scan_cache(req.at("subjectId").get<std::string>()))
                    reply["findings"].push_back(f);
                reply["ok"] = true;
            } else if (op == "ping") {
                reply["ok"] = true;
            } else {
                channel.send_error(Errc::MALFORMED_MESSAGE, "unknown control op " + op);
                continue;
            }
            channel.send(FrameType::CONTROL, envelope::encode(reply));
            continue;
        }
        channel.send_error(Errc::MALFORMED_MESSAGE, "unexpected frame type");
    }
}

envelope::Value ChannelAdapterLink::call(FrameType type, const std::string& body,
                                         FrameType expect) {
    std::lock_guard lock(mutex_);
    if (channel_->closed()) fail(Errc::ADAPTER_UNREACHABLE, "adapter channel closed");
    try {
        channel_->send(type, body);
        Channel::Message msg = channel_->receive();
        if (msg.type == FrameType::ERROR) throw_channel_error(msg);
        if (msg.type != expect) {
            channel_->close(); // protocol out of step; nothing on it is trustworthy
            fail(Errc::ADAPTER_UNREACHABLE, "adapter protocol violation");
        }
        return envelope::decode(msg.body);
    } catch (const SwarmError& e) {
        if (channel_->closed() || e.code() == Errc::CHANNEL_CLOSED)
            fail(Errc::ADAPTER_UNREACHABLE, std::string("adapter call failed: ") + e.what());
        throw;
    }
}

PhaseResult ChannelAdapterLink::deliver(const Delivery& delivery) {
    envelope::Value reply = call(FrameType::DELIVER, envelope::encode(to_envelope(delivery)),
                                 FrameType::RETURN);
    if (reply.at("instanceId").get<std::string>() != delivery.instance_id ||
        reply.at("phase").get<std::string>() != delivery.phase) {
        channel_->close();
        fail(Errc::ADAPTER_UNREACHABLE, "phase result for the wrong delivery");
    }
    return phase_result_from_envelope(reply);
}

void ChannelAdapterLink::close() { channel_->close(); }

bool ChannelAdapterLink::alive() const { return !channel_->closed(); }

std::size_t ChannelAdapterLink::erase_instances(const std::vector<std::string>& instance_ids) {
    envelope::Value req;
    req["instanceIds"] = envelope::Value::array();
    for (const auto& id : instance_ids) req["instanceIds"].push_back(id);
    req["op"] = "erase";
    envelope::Value reply = call(FrameType::CONTROL, envelope::encode(req), FrameType::CONTROL);
    return reply.at("erased").get<std::uint64_t>();
}

std::vector<std::string> ChannelAdapterLink::residual_scan(const std::string& subject_id) {
    envelope::Value req;
    req["op"] = "scan";
    req["subjectId"] = subject_id;
    envelope::Value reply = call(FrameType::CONTROL, envelope::encode(req), FrameType::CONTROL);
    std::vector<std::string> findings;
    for (const auto& f : reply.at("findings")) findings.push_back(f.get<std::string>());
    return findings;
}

} // namespace swarmbus
