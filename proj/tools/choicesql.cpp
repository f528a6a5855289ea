#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "choicesql/service.hpp"

using namespace choicesql;
using wire::Json;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string table_name(const std::string& csv_path) {
  const auto slash = csv_path.find_last_of('/');
  std::string name = csv_path.substr(slash == std::string::npos ? 0 : slash + 1);
  const auto dot = name.rfind('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

struct CommonOptions {
  std::string clock;
  std::string regions;
  Clock make_clock() const { return clock.empty() ? Clock{} : Clock::fixed(clock); }
  RegionList make_regions() const { return regions.empty() ? RegionList::us_states() : RegionList::load(regions); }
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--clock", o.clock, "Pin today() to an ISO date (YYYY-MM-DD)");
  app->add_option("--regions", o.regions, "Region names file marking geographic columns")->check(CLI::ExistingFile);
}

// Blocks SIGINT/SIGTERM in every thread and stops the server from a waiter thread.
int serve(Service& service, const std::string& host, int port) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  HttpServer server(service);
  const int bound = server.bind(host, port);
  if (bound < 0) {
    std::cerr << "cannot bind " << host << ":" << port << "\n";
    return 1;
  }
  std::cout << "listening on http://" << host << ":" << bound << std::endl;
  std::atomic<bool> signalled{false};
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    signalled = true;
    server.stop();
  });
  server.listen();
  // Wake the waiter when listen() ended on its own.
  if (!signalled) pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  service.snapshot();
  std::cout << "stopped" << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Choice-node SQL templates to interactive interfaces"};
  app.require_subcommand(1);

  CommonOptions common;
  ServiceConfig config;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string backend = "mock";
  std::string mock_responses = std::string(CHOICESQL_DATA_DIR) + "/mock_responses.json";
  std::string bank = std::string(CHOICESQL_DATA_DIR) + "/example_bank.txt";
  std::string cost_config;

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--host", host, "Interface to bind")->capture_default_str();
  serve_cmd->add_option("--port", port, "TCP port, 0 for any free port")->capture_default_str();
  serve_cmd->add_option("--data-dir", config.data_dir, "Directory for uploaded datasets and session snapshots");
  serve_cmd->add_option("--llm-backend", backend, "Translation backend")
      ->check(CLI::IsMember({"mock", "live"}))
      ->capture_default_str();
  serve_cmd->add_option("--mock-responses", mock_responses, "Canned completions for the mock backend")
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--bank", bank, "Example bank for prompts")->check(CLI::ExistingFile);
  serve_cmd->add_option("--cost-config", cost_config, "Cost parameters JSON")->check(CLI::ExistingFile);
  add_common(serve_cmd, common);

  std::string sps_file;
  auto* parse_cmd = app.add_subcommand("parse", "List the choice nodes of a template");
  parse_cmd->add_option("template", sps_file, "Template file")->required()->check(CLI::ExistingFile);

  std::string csv_file;
  auto* count_cmd = app.add_subcommand("count", "Count the concrete queries of a template");
  count_cmd->add_option("template", sps_file, "Template file")->required()->check(CLI::ExistingFile);
  count_cmd->add_option("--data", csv_file, "CSV dataset")->required()->check(CLI::ExistingFile);
  add_common(count_cmd, common);

  std::vector<std::string> sps_files;
  int width = 1280, height = 800;
  auto* gen_cmd = app.add_subcommand("generate", "Print the interface for a set of templates");
  gen_cmd->add_option("templates", sps_files, "Template files")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--data", csv_file, "CSV dataset")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--width", width, "Screen width")->capture_default_str();
  gen_cmd->add_option("--height", height, "Screen height")->capture_default_str();
  gen_cmd->add_option("--cost-config", cost_config, "Cost parameters JSON")->check(CLI::ExistingFile);
  add_common(gen_cmd, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) {
      config.clock = common.make_clock();
      config.regions = common.make_regions();
      if (!cost_config.empty()) config.cost = CostParams::load(cost_config);
      config.bank = load_example_bank(bank);
      if (backend == "mock") config.backend = std::make_shared<MockBackend>(MockBackend::load(mock_responses));
      else config.backend = std::make_shared<LiveBackend>(LiveBackendConfig::from_env());
      Service service(std::move(config));
      service.restore();
      return serve(service, host, port);
    }
    if (*parse_cmd) {
      const SpsTemplate t = parse_sps(read_text(sps_file));
      Json nodes = Json::array();
      for (const auto& [node, pos] : list_choice_nodes(t)) {
        Json n{{"id", node.id}, {"kind", to_string(node.kind)}, {"context", to_string(pos.context)}};
        n["parent"] = node.parent ? Json(*node.parent) : Json(nullptr);
        nodes.push_back(std::move(n));
      }
      std::cout << wire::dump(Json{{"nodes", nodes}});
      return 0;
    }
    DatasetCatalog catalog(common.make_clock(), common.make_regions());
    catalog.ingest_csv(table_name(csv_file), read_text(csv_file));
    if (*count_cmd) {
      const auto size = count_concrete_queries(parse_sps(read_text(sps_file)), catalog);
      if (size.continuous) std::cout << "continuous\n";
      else std::cout << size.count << (size.saturated ? "+" : "") << "\n";
      return 0;
    }
    std::vector<SpsTemplate> templates;
    for (const auto& f : sps_files) templates.push_back(parse_sps(read_text(f)));
    const CostParams params = cost_config.empty() ? CostParams{} : CostParams::load(cost_config);
    std::cout << wire::dump(wire::to_json(generate_interface(templates, catalog, Screen{width, height}, params)));
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
