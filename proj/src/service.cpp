#include "choicesql/service.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "choicesql/validate.hpp"

namespace choicesql {

namespace fs = std::filesystem;
using wire::Json;

namespace {

Response error(int status, const std::string& code, const std::string& message) {
  Json body;
  body["error"] = Json{{"code", code}, {"message", message}};
  return Response{status, std::move(body)};
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_atomic(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, p);
}

const Json& require(const Json& body, const char* key) {
  if (!body.is_object() || !body.contains(key)) throw wire::WireError(std::string("missing field '") + key + "'");
  return body.at(key);
}

std::vector<std::string> string_list(const Json& body, const char* key) {
  const Json& v = require(body, key);
  if (!v.is_array() || v.empty()) throw wire::WireError(std::string("'") + key + "' must be a non-empty list");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw wire::WireError(std::string("'") + key + "' must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::string string_field(const Json& body, const char* key) {
  const Json& v = require(body, key);
  if (!v.is_string()) throw wire::WireError(std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

template <typename F>
Response guarded(F&& f) {
  try {
    return f();
  } catch (const wire::WireError& e) {
    return error(400, "BadRequest", e.what());
  } catch (const nlohmann::json::exception& e) {
    return error(400, "BadRequest", e.what());
  } catch (const BackendUnavailable& e) {
    return error(502, "BackendUnavailable", e.what());
  } catch (const NodeError& e) {
    return error(422, "SelectionOutOfRange", e.what());
  } catch (const SqlError& e) {
    return error(422, "ExecutionError", e.what());
  } catch (const std::exception& e) {
    return error(500, "InternalError", e.what());
  }
}

}  // namespace

Service::Service(ServiceConfig config)
    : config_(std::move(config)),
      catalog_(std::make_unique<DatasetCatalog>(config_.clock, config_.regions)) {}

Service::~Service() = default;

std::shared_ptr<Service::Session> Service::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

void Service::persist_dataset(const std::string& name, std::string_view csv) const {
  if (config_.data_dir.empty()) return;
  write_atomic(fs::path(config_.data_dir) / "datasets" / (name + ".csv"), std::string(csv));
}

Response Service::upload_dataset(const std::string& name, std::string_view csv) {
  return guarded([&] {
    if (name.empty()) return error(400, "BadRequest", "dataset name is required");
    if (csv.empty()) return error(400, "MalformedCsv", "empty body");
    TableSchema schema;
    try {
      schema = catalog_->ingest_csv(name, csv);
    } catch (const MalformedCsv& e) {
      return error(400, "MalformedCsv", e.what());
    } catch (const EmptyTable& e) {
      return error(400, "EmptyTable", e.what());
    } catch (const Error& e) {
      return error(400, "BadRequest", e.what());
    }
    persist_dataset(name, csv);
    return Response{200, Json{{"schema", wire::to_json(schema)}}};
  });
}

Response Service::translate(const Json& body) {
  return guarded([&] {
    const auto queries = string_list(body, "nl");
    const std::string dataset = string_field(body, "dataset");
    if (!catalog_->table(dataset)) return error(404, "UnknownDataset", "no dataset named " + dataset);
    if (!config_.backend) return error(502, "BackendUnavailable", "no language model backend configured");
    const auto results = choicesql::translate(queries, *catalog_, config_.bank, *config_.backend,
                                              config_.translate);
    Json out = Json::array();
    bool any_ok = false;
    for (const auto& r : results) {
      Json diagnostics = Json::array();
      for (const auto& d : r.diagnostics) diagnostics.push_back(wire::to_json(d));
      out.push_back(Json{{"nl", r.nl},
                         {"sps", r.sps_text},
                         {"ok", r.ok()},
                         {"attempts", r.attempts},
                         {"diagnostics", std::move(diagnostics)}});
      any_ok = any_ok || r.ok();
    }
    return Response{any_ok ? 200 : 422, Json{{"results", std::move(out)}}};
  });
}

Json Service::view_data(const Session& s, std::size_t template_id) const {
  const std::string sql = instantiate(s.templates[template_id], s.assignments[template_id], *catalog_);
  return Json{{"view_id", s.spec.views.at(template_id).id},
              {"sql", sql},
              {"data", wire::to_json(catalog_->execute_sql(sql))}};
}

Response Service::create_interface(const Json& body) {
  return guarded([&] {
    const auto texts = string_list(body, "sps");
    const std::string dataset = string_field(body, "dataset");
    Screen screen;
    if (body.contains("screen")) {
      const Json& sc = body.at("screen");
      screen.width = require(sc, "w").get<std::int64_t>();
      screen.height = require(sc, "h").get<std::int64_t>();
      if (screen.width <= 0 || screen.height <= 0) return error(400, "BadRequest", "screen must be positive");
    }
    if (!catalog_->table(dataset)) return error(404, "UnknownDataset", "no dataset named " + dataset);

    auto session = std::make_shared<Session>();
    session->dataset = dataset;
    session->sps = texts;
    Json failures = Json::array();
    for (std::size_t i = 0; i < texts.size(); ++i) {
      std::vector<Diagnostic> diagnostics;
      try {
        SpsTemplate t = parse_sps(texts[i]);
        diagnostics = validate_template(t, *catalog_);
        session->templates.push_back(std::move(t));
      } catch (const SyntaxError& e) {
        diagnostics.push_back(Diagnostic{DiagnosticCode::SyntaxError, e.what(), std::nullopt, std::nullopt});
      }
      if (diagnostics.empty()) continue;
      Json list = Json::array();
      for (const auto& d : diagnostics) list.push_back(wire::to_json(d));
      failures.push_back(Json{{"template_id", i}, {"diagnostics", std::move(list)}});
    }
    if (!failures.empty()) {
      Response r = error(422, "InvalidTemplate", "one or more templates failed validation");
      r.body["templates"] = std::move(failures);
      return r;
    }
    session->spec = generate_interface(session->templates, *catalog_, screen, config_.cost);
    for (const auto& t : session->templates) session->assignments.push_back(default_assignment(t, *catalog_));

    Json data = Json::array();
    for (std::size_t i = 0; i < session->templates.size(); ++i) data.push_back(view_data(*session, i));
    {
      std::unique_lock lock(sessions_mutex_);
      session->id = "s" + std::to_string(next_session_++);
      sessions_[session->id] = session;
    }
    return Response{200, Json{{"session_id", session->id},
                              {"spec", wire::to_json(session->spec)},
                              {"initial_data", std::move(data)}}};
  });
}

Response Service::update_state(const std::string& session_id, const Json& body) {
  return guarded([&] {
    const auto session = find(session_id);
    if (!session) return error(404, "UnknownSession", "no session " + session_id);
    const Json& deltas = require(body, "deltas");
    if (!deltas.is_array()) throw wire::WireError("'deltas' must be a list");

    std::map<std::size_t, Delta> by_template;
    for (const auto& d : deltas) {
      const auto tid = require(d, "template_id").get<std::size_t>();
      const auto node = require(d, "node_id").get<NodeId>();
      Selection s = wire::selection_from_json(require(d, "selection"));
      if (tid >= session->templates.size())
        return error(422, "SelectionOutOfRange", "no template " + std::to_string(tid));
      if (node >= session->templates[tid].size())
        return error(422, "SelectionOutOfRange", "no node " + std::to_string(node) + " in template " +
                                                     std::to_string(tid));
      by_template[tid][node] = std::move(s);
    }

    std::lock_guard lock(session->mutex);
    std::vector<ChoiceAssignment> next = session->assignments;
    for (const auto& [tid, delta] : by_template)
      next[tid] = apply_delta(next[tid], delta, session->templates[tid], *catalog_);
    const std::vector<ChoiceAssignment> previous = std::move(session->assignments);
    session->assignments = std::move(next);
    Json updated = Json::array();
    try {
      for (const auto& entry : by_template) updated.push_back(view_data(*session, entry.first));
    } catch (...) {
      session->assignments = previous;
      throw;
    }
    return Response{200, Json{{"updated", std::move(updated)}}};
  });
}

Response Service::get_interface(const std::string& session_id) const {
  return guarded([&] {
    const auto session = find(session_id);
    if (!session) return error(404, "UnknownSession", "no session " + session_id);
    std::lock_guard lock(session->mutex);
    Json assignments = Json::array();
    Json data = Json::array();
    for (std::size_t i = 0; i < session->templates.size(); ++i) {
      assignments.push_back(Json{{"template_id", i}, {"assignment", wire::to_json(session->assignments[i])}});
      data.push_back(view_data(*session, i));
    }
    return Response{200, Json{{"session_id", session->id},
                              {"dataset", session->dataset},
                              {"sps", session->sps},
                              {"spec", wire::to_json(session->spec)},
                              {"assignments", std::move(assignments)},
                              {"data", std::move(data)}}};
  });
}

void Service::snapshot() const {
  if (config_.data_dir.empty()) return;
  Json sessions = Json::array();
  std::shared_lock lock(sessions_mutex_);
  for (const auto& [id, s] : sessions_) {
    std::lock_guard session_lock(s->mutex);
    Json assignments = Json::array();
    for (const auto& a : s->assignments) assignments.push_back(wire::to_json(a));
    sessions.push_back(Json{{"id", id},
                            {"dataset", s->dataset},
                            {"sps", s->sps},
                            {"spec", wire::to_json(s->spec)},
                            {"assignments", std::move(assignments)}});
  }
  Json doc{{"next_session", next_session_}, {"sessions", std::move(sessions)}};
  write_atomic(fs::path(config_.data_dir) / "sessions.json", wire::dump(doc));
}

void Service::restore() {
  if (config_.data_dir.empty()) return;
  const fs::path dir(config_.data_dir);
  std::vector<fs::path> csvs;
  if (fs::is_directory(dir / "datasets"))
    for (const auto& e : fs::directory_iterator(dir / "datasets"))
      if (e.path().extension() == ".csv") csvs.push_back(e.path());
  std::sort(csvs.begin(), csvs.end());
  for (const auto& p : csvs) catalog_->ingest_csv(p.stem().string(), read_text(p));

  const fs::path file = dir / "sessions.json";
  if (!fs::exists(file)) return;
  const Json doc = Json::parse(read_text(file));
  std::unique_lock lock(sessions_mutex_);
  next_session_ = doc.at("next_session").get<std::uint64_t>();
  for (const auto& j : doc.at("sessions")) {
    auto s = std::make_shared<Session>();
    s->id = j.at("id").get<std::string>();
    s->dataset = j.at("dataset").get<std::string>();
    s->sps = j.at("sps").get<std::vector<std::string>>();
    for (const auto& text : s->sps) s->templates.push_back(parse_sps(text));
    s->spec = wire::spec_from_json(j.at("spec"));
    for (const auto& a : j.at("assignments")) s->assignments.push_back(wire::assignment_from_json(a));
    if (s->assignments.size() != s->templates.size()) throw Error("corrupt session snapshot " + s->id);
    sessions_[s->id] = std::move(s);
  }
}

}  // namespace choicesql
