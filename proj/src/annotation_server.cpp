#include "synthprod/annotation_server.hpp"

#include <httplib.h>

#include "synthprod/error.hpp"

namespace synthprod {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

int status_for(SubmitCode c) {
    switch (c) {
    case SubmitCode::ok: return 200;
    case SubmitCode::unknown_task: return 404;
    case SubmitCode::duplicate:
    case SubmitCode::task_full: return 409;
    case SubmitCode::missing_answer:
    case SubmitCode::invalid_option:
    case SubmitCode::malformed: return 400;
    }
    return 500;
}

} // namespace

struct AnnotationHttpServer::Impl {
    AnnotationService& service;
    std::optional<AnnotationProtocol> protocol;
    httplib::Server server;

    Impl(AnnotationService& s, std::optional<AnnotationProtocol> p) : service(s), protocol(std::move(p)) {}

    void routes(const std::string& static_dir) {
        server.set_tcp_nodelay(true);
        server.Get("/api/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
            std::string annotator = req.get_param_value("annotator");
            if (annotator.empty()) {
                send_json(res, 400, {{"error", "usage"}, {"message", "annotator parameter is required"}});
                return;
            }
            auto task = service.next_task(annotator);
            json body = {{"done", !task.has_value()}, {"labeled", service.labeled_by(annotator)},
                         {"total", service.task_count()}};
            if (task) body["task"] = to_json(*task);
            send_json(res, 200, body);
        });

        server.Get(R"(/api/tasks/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            auto task = service.task(req.matches[1].str());
            if (!task) {
                send_json(res, 404, {{"error", "unknown_task"}, {"message", "no task " + req.matches[1].str()}});
                return;
            }
            send_json(res, 200, to_json(*task));
        });

        server.Post("/api/labels", [this](const httplib::Request& req, httplib::Response& res) {
            AnnotationLabel label;
            try {
                label = annotation_label_from_json(json::parse(req.body));
            } catch (const std::exception& e) {
                send_json(res, 400, {{"error", "malformed"}, {"message", e.what()}});
                return;
            }
            SubmitResult r;
            try {
                r = service.submit_label(std::move(label));
            } catch (const Error& e) {
                send_json(res, 500, {{"error", "internal"}, {"message", e.what()}});
                return;
            }
            if (r.ok())
                send_json(res, 200, {{"status", "ok"}});
            else
                send_json(res, status_for(r.code), {{"error", std::string(to_string(r.code))}, {"message", r.message}});
        });

        server.Get("/api/report", [this](const httplib::Request&, httplib::Response& res) {
            try {
                send_json(res, 200, service.build_report().to_json());
            } catch (const Error& e) {
                send_json(res, 409, {{"error", "no_complete_tasks"}, {"message", e.what()}});
            }
        });

        server.Get("/api/protocol", [this](const httplib::Request&, httplib::Response& res) {
            if (!protocol) {
                send_json(res, 404, {{"error", "no_protocol"}, {"message", "protocol not loaded"}});
                return;
            }
            json questions = json::array();
            for (const auto& q : protocol->questions)
                questions.push_back({{"id", q.id}, {"text", q.text}, {"options", q.options}});
            send_json(res, 200,
                      {{"version", protocol->version}, {"preamble", protocol->preamble}, {"questions", questions}});
        });

        if (!static_dir.empty() && !server.set_mount_point("/", static_dir))
            throw io_error("static directory not found: " + static_dir);
    }
};

AnnotationHttpServer::AnnotationHttpServer(AnnotationService& service, std::optional<AnnotationProtocol> protocol,
                                           std::string static_dir)
    : impl_(std::make_unique<Impl>(service, std::move(protocol))) {
    impl_->routes(static_dir);
}

AnnotationHttpServer::~AnnotationHttpServer() { stop(); }

bool AnnotationHttpServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int AnnotationHttpServer::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool AnnotationHttpServer::serve() { return impl_->server.listen_after_bind(); }

void AnnotationHttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

void AnnotationHttpServer::stop() {
    if (impl_) impl_->server.stop();
}

} // namespace synthprod
