#include <filesystem>

#include <httplib.h>

#include "choicesql/service.hpp"

namespace choicesql {

using wire::Json;

namespace {

void send(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(wire::dump(r.body), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send(res, Response{status, Json{{"error", Json{{"code", code}, {"message", message}}}}});
}

// Parses a JSON request body, answering 400 when it is not JSON.
template <typename F>
httplib::Server::Handler json_route(F handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    Json body;
    try {
      body = Json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, "BadRequest", std::string("request body is not JSON: ") + e.what());
      return;
    }
    send(res, handler(req, body));
  };
}

}  // namespace

struct HttpServer::Impl {
  explicit Impl(Service& s) : service(s) {}
  Service& service;
  httplib::Server server;
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto& s = impl_->server;
  Service& svc = impl_->service;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                         {"Access-Control-Allow-Headers", "Content-Type"},
                         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  s.Post("/datasets", [&svc](const httplib::Request& req, httplib::Response& res) {
    std::string name = req.get_param_value("name");
    std::string csv;
    if (req.is_multipart_form_data()) {
      if (!req.has_file("file")) return send_error(res, 400, "BadRequest", "multipart field 'file' is required");
      const auto file = req.get_file_value("file");
      csv = file.content;
      if (req.has_file("name")) name = req.get_file_value("name").content;
      if (name.empty()) name = std::filesystem::path(file.filename).stem().string();
    } else {
      csv = req.body;
    }
    send(res, svc.upload_dataset(name, csv));
  });
  s.Post("/translate", json_route([&svc](const httplib::Request&, const Json& body) {
           return svc.translate(body);
         }));
  s.Post("/interfaces", json_route([&svc](const httplib::Request&, const Json& body) {
           return svc.create_interface(body);
         }));
  s.Post(R"(/interfaces/([A-Za-z0-9_-]+)/state)",
         json_route([&svc](const httplib::Request& req, const Json& body) {
           return svc.update_state(req.matches[1], body);
         }));
  s.Get(R"(/interfaces/([A-Za-z0-9_-]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.get_interface(req.matches[1]));
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace choicesql
