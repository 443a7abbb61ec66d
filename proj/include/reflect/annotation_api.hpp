#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "reflect/review.hpp"

namespace reflect::service {

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

// Transport-independent handlers for the annotation HTTP API. Task views never expose the
// model name or other annotators' votes.
class AnnotationApi {
  public:
    explicit AnnotationApi(review::ReviewBoard& board) : board_(board) {}

    // `GET /tasks?annotator=ID&state=awaiting_adherence|awaiting_type`
    ApiResponse get_tasks(const std::map<std::string, std::string>& query) const;
    // `POST /decisions` with `{"task_id", "annotator_id", "stage", "value"}`.
    ApiResponse post_decision(const std::string& body);
    // `GET /progress`
    ApiResponse get_progress() const;
    // `GET /health`
    ApiResponse health() const;

  private:
    review::ReviewBoard& board_;
};

// HTTP front end for AnnotationApi, listening on a background thread.
class AnnotationServer {
  public:
    explicit AnnotationServer(AnnotationApi& api);
    ~AnnotationServer();
    AnnotationServer(const AnnotationServer&) = delete;
    AnnotationServer& operator=(const AnnotationServer&) = delete;

    // Binds and starts serving; port 0 picks a free port. Returns the bound port.
    int start(const std::string& host, int port);
    // Blocks in the calling thread until `stop()`.
    void listen(const std::string& host, int port);
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace reflect::service
