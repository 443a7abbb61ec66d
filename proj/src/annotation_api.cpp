#include <httplib.h>

#include <chrono>
#include <thread>

#include "reflect/annotation_api.hpp"
#include "reflect/errors.hpp"

namespace reflect::service {

using nlohmann::json;

namespace {

ApiResponse error(int status, const std::string& message) { return {status, {{"error", message}}}; }

json task_view(const review::ReviewTask& t) {
    const auto stage = t.state == review::ReviewState::AwaitingType ? review::Stage::Type : review::Stage::Adherence;
    return {
        {"task_id", t.task_id},
        {"question", t.question},
        {"answer", t.answer},
        {"reflection", t.reflection},
        {"stage", std::string(review::to_string(stage))},
        {"my_decision", "pending"},
    };
}

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

}  // namespace

ApiResponse AnnotationApi::get_tasks(const std::map<std::string, std::string>& query) const {
    auto it = query.find("annotator");
    if (it == query.end() || it->second.empty()) return error(400, "annotator query parameter is required");
    if (!board_.is_annotator(it->second)) return error(403, "unknown annotator");
    std::optional<review::ReviewState> state;
    if (auto s = query.find("state"); s != query.end() && !s->second.empty()) {
        try {
            state = review::parse_state(s->second);
        } catch (const ValidationError& e) {
            return error(400, e.what());
        }
    }
    json tasks = json::array();
    for (const auto& t : board_.open_tasks(it->second, state)) tasks.push_back(task_view(t));
    return {200, {{"annotator", it->second}, {"tasks", std::move(tasks)}}};
}

ApiResponse AnnotationApi::post_decision(const std::string& body) {
    review::AnnotatorDecision d;
    try {
        auto j = json::parse(body);
        if (!j.contains("timestamp_ms")) j["timestamp_ms"] = now_ms();
        d = review::decision_from_json(j);
    } catch (const json::exception& e) {
        return error(400, std::string("invalid JSON: ") + e.what());
    } catch (const Error& e) {
        return error(400, e.what());
    }
    try {
        const auto out = board_.submit(d);
        json resp{{"status", out.duplicate ? "duplicate" : "accepted"},
                  {"task_id", d.task_id},
                  {"state", std::string(review::to_string(out.state))}};
        // Majorities stay hidden from annotators until the task is closed.
        if (out.aggregated && out.state == review::ReviewState::Closed) resp["closed"] = true;
        return {200, std::move(resp)};
    } catch (const NotFoundError& e) {
        return error(404, e.what());
    } catch (const UnknownAnnotatorError& e) {
        return error(403, e.what());
    } catch (const StageOrderError& e) {
        return error(409, e.what());
    }
}

ApiResponse AnnotationApi::get_progress() const { return {200, review::to_json(board_.progress())}; }

ApiResponse AnnotationApi::health() const { return {200, {{"status", "ok"}}}; }

// ---------------------------------------------------------------- http

struct AnnotationServer::Impl {
    AnnotationApi& api;
    httplib::Server server;
    std::thread thread;

    explicit Impl(AnnotationApi& a) : api(a) {
        auto reply = [](httplib::Response& res, const ApiResponse& r) {
            res.status = r.status;
            res.set_content(r.body.dump(), "application/json");
        };
        server.Get("/health", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, api.health()); });
        server.Get("/progress",
                   [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, api.get_progress()); });
        server.Get("/tasks", [this, reply](const httplib::Request& req, httplib::Response& res) {
            std::map<std::string, std::string> q;
            for (const auto& [k, v] : req.params) q[k] = v;
            reply(res, api.get_tasks(q));
        });
        server.Post("/decisions", [this, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, api.post_decision(req.body));
        });
    }
};

AnnotationServer::AnnotationServer(AnnotationApi& api) : impl_(std::make_unique<Impl>(api)) {}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void AnnotationServer::listen(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

void AnnotationServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace reflect::service
