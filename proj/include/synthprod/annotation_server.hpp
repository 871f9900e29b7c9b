#pragma once

#include <memory>
#include <optional>
#include <string>

#include "synthprod/annotation.hpp"

namespace synthprod {

// HTTP front end for an AnnotationService.
//
//   GET  /api/tasks/next?annotator=<id>  -> {"done": bool, "task": {...}, "labeled": n}
//   POST /api/labels                     -> {"status": "ok"} | {"error": code, "message": ...}
//   GET  /api/report                     -> AggregateReport JSON
//   GET  /api/tasks/<id>                 -> task JSON
//   GET  /api/protocol                   -> {"version", "preamble", "questions"}
//
// When static_dir is set its files are served under "/".
class AnnotationHttpServer {
public:
    AnnotationHttpServer(AnnotationService& service, std::optional<AnnotationProtocol> protocol = std::nullopt,
                         std::string static_dir = {});
    ~AnnotationHttpServer();

    AnnotationHttpServer(const AnnotationHttpServer&) = delete;
    AnnotationHttpServer& operator=(const AnnotationHttpServer&) = delete;

    // Binds and serves until stop(); returns false when binding fails.
    bool listen(const std::string& host, int port);
    // Binds to a free port and returns it (or -1); call serve() afterwards.
    int bind_any_port(const std::string& host);
    bool serve();
    void wait_until_ready() const;
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace synthprod
