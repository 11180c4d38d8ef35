#include "vccnet/service.hpp"

#include <httplib.h>

namespace vccnet {

struct HttpService::Impl {
    explicit Impl(ServiceRouter& r) : router(r) {}

    ServiceRouter& router;
    httplib::Server server;
};

HttpService::HttpService(ServiceRouter& router) : impl_(std::make_unique<Impl>(router)) {
    auto& server = impl_->server;
    const auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
        const HttpResponse out = impl_->router.handle({req.method, req.path, req.body});
        res.status = out.status;
        res.set_content(out.body, out.content_type);
    };
    server.Get(R"(/.*)", dispatch);
    server.Post(R"(/.*)", dispatch);
    // The capture UI is served from another origin during development.
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) throw Error(ErrorCode::Io, "service: cannot bind " + host);
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port)) {
        throw Error(ErrorCode::Io, "service: cannot bind " + host + ":" + std::to_string(port));
    }
    return port;
}

void HttpService::run() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
    if (impl_) impl_->server.stop();
}

bool HttpService::running() const { return impl_->server.is_running(); }

}  // namespace vccnet
