#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "choicesql/catalog.hpp"
#include "choicesql/interface.hpp"
#include "choicesql/translate.hpp"
#include "choicesql/wire.hpp"

namespace choicesql {

struct ServiceConfig {
  Clock clock;
  RegionList regions = RegionList::us_states();
  CostParams cost;
  ExampleBank bank;
  std::shared_ptr<LlmBackend> backend;
  TranslateOptions translate;
  /// Uploaded CSVs and session snapshots live here when set.
  std::string data_dir;
};

struct Response {
  int status = 200;
  wire::Json body;
};

/// The HTTP handlers as plain functions over JSON. Requests on different
/// sessions run concurrently; state updates on one session are serialized.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();

  Response upload_dataset(const std::string& name, std::string_view csv);
  Response translate(const wire::Json& body);
  Response create_interface(const wire::Json& body);
  Response update_state(const std::string& session_id, const wire::Json& body);
  Response get_interface(const std::string& session_id) const;

  /// Writes sessions to `<data_dir>/sessions.json`. No-op without a data dir.
  void snapshot() const;
  /// Reloads datasets and sessions saved in the data dir.
  void restore();

  const DatasetCatalog& catalog() const { return *catalog_; }

 private:
  struct Session {
    std::string id;
    std::string dataset;
    std::vector<std::string> sps;
    std::vector<SpsTemplate> templates;
    InterfaceSpec spec;
    std::vector<ChoiceAssignment> assignments;
    mutable std::mutex mutex;
  };

  std::shared_ptr<Session> find(const std::string& id) const;
  wire::Json view_data(const Session& s, std::size_t template_id) const;
  void persist_dataset(const std::string& name, std::string_view csv) const;

  ServiceConfig config_;
  std::unique_ptr<DatasetCatalog> catalog_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_session_ = 1;
};

/// Routes the service over HTTP.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds `host:port` (port 0 picks a free one). Returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call after bind().
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace choicesql
