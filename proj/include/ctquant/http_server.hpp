#pragma once

#include <memory>
#include <string>
#include <thread>

// Eigen must be seen before httplib: <resolv.h> defines a `_res` macro
// that collides with Eigen parameter names.
#include "ctquant/error.hpp"
#include "ctquant/service.hpp"

#include "httplib.h"

namespace ctquant {

[[nodiscard]] inline bool is_loopback_host(const std::string& host) {
    return host == "127.0.0.1" || host == "localhost" || host == "::1";
}

/// httplib front end for ProjectService, bound to a loopback address.
class HttpServer {
public:
    HttpServer(const fs::path& project_root, std::string host = "127.0.0.1")
        : service_(std::make_unique<ProjectService>(project_root)), host_(std::move(host)) {
        if (!is_loopback_host(host_)) {
            throw Error(ErrorCode::validation, "refusing to bind non-loopback host " + host_, {"host"});
        }
        const auto route = [this](const httplib::Request& req, httplib::Response& res) {
            Query q;
            for (const auto& [k, v] : req.params) q[k] = v;
            const Response r = service_->handle(req.method, req.path, q, req.body);
            res.status = r.status;
            res.set_content(r.body, r.content_type);
        };
        server_.Get(".*", route);
        server_.Post(".*", route);
        server_.Put(".*", route);
    }

    ~HttpServer() { stop(); }

    /// Binds `port` (0 picks a free one) and returns the bound port.
    int bind(int port) {
        port_ = port == 0 ? server_.bind_to_any_port(host_) : (server_.bind_to_port(host_, port) ? port : -1);
        if (port_ < 0) throw Error(ErrorCode::io, "cannot bind " + host_ + ":" + std::to_string(port));
        return port_;
    }

    /// Blocks serving requests until stop().
    void run() { server_.listen_after_bind(); }

    void start_background() {
        thread_ = std::thread([this] { run(); });
        server_.wait_until_ready();
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    [[nodiscard]] int port() const noexcept { return port_; }
    [[nodiscard]] const std::string& host() const noexcept { return host_; }

private:
    std::unique_ptr<ProjectService> service_;
    std::string host_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = -1;
};

}  // namespace ctquant
