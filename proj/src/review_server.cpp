#include "xforge/review_server.hpp"

#include <httplib.h>

#include "xforge/log.hpp"

namespace xforge::review {

struct ReviewServer::Impl {
    explicit Impl(ReviewStore& s) : store(s) {}
    ReviewStore& store;
    httplib::Server server;
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, json{{"error", message}});
}

}  // namespace

ReviewServer::ReviewServer(ReviewStore& store, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(store)) {
    auto& srv = impl_->server;
    auto& st = impl_->store;

    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const ReviewError& e) {
            send_error(res, e.status(), e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, std::string("malformed JSON: ") + e.what());
        } catch (const std::exception& e) {
            log::error(std::string("review server: ") + e.what());
            send_error(res, 500, "internal error");
        }
    });

    srv.Get("/api/health", [&st](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200,
                  json{{"status", "ok"}, {"tasks", st.task_count()}, {"annotations", st.annotation_count()}});
    });

    srv.Get("/api/tasks/next", [&st](const httplib::Request& req, httplib::Response& res) {
        if (!req.has_param("annotator")) throw ValidationError("missing annotator parameter");
        const auto task = st.next_task(req.get_param_value("annotator"));
        send_json(res, 200, json{{"task", task ? blinded_view(*task) : json(nullptr)}});
    });

    srv.Post("/api/annotations", [&st](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body);
        const auto stored = st.submit(body.get<Annotation>());
        send_json(res, 201,
                  json{{"status", "accepted"},
                       {"task_id", stored.task_id},
                       {"annotator_id", stored.annotator_id},
                       {"submitted_at", stored.submitted_at}});
    });

    srv.Get("/api/summary", [&st](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, json(st.summarize()));
    });

    if (static_dir) {
        if (!srv.set_mount_point("/", static_dir->string()))
            throw std::invalid_argument("static directory " + static_dir->string() + " does not exist");
    }
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    if (!impl_->server.bind_to_port(host, port))
        throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void ReviewServer::run() { impl_->server.listen_after_bind(); }

void ReviewServer::stop() {
    if (impl_) impl_->server.stop();
}

void ReviewServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace xforge::review
