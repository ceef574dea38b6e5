#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "xforge/review.hpp"

namespace xforge::review {

/// HTTP front end over a ReviewStore:
///   GET  /api/health
///   GET  /api/tasks/next?annotator=<id>   -> {"task": <blinded task> | null}
///   POST /api/annotations                 -> 201 {"status": "accepted", ...}
///   GET  /api/summary
/// Errors are {"error": message} with 400, 401, 404 or 409. Static UI
/// assets, when given, are served under /.
class ReviewServer {
public:
    ReviewServer(ReviewStore& store, std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~ReviewServer();

    /// Binds to host:port; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void run();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace xforge::review
