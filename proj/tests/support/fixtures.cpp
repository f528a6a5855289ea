#include "support/fixtures.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace choicesql::testing {

std::string data_path(const std::string& relative) {
  return std::string(CHOICESQL_DATA_DIR) + "/" + relative;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::unique_ptr<DatasetCatalog> covid_catalog() {
  auto catalog = std::make_unique<DatasetCatalog>(Clock::fixed(kClockDate));
  catalog->ingest_csv("covid", read_file(data_path("fixtures/covid.csv")));
  return catalog;
}

}  // namespace choicesql::testing
