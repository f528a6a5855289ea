#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "choicesql/catalog.hpp"
#include "support/fixtures.hpp"

using namespace choicesql;
using namespace choicesql::testing;

namespace {

// Naive reader for the fixture (no quoting in it), used as an oracle.
std::vector<std::vector<std::string>> naive_rows() {
  std::istringstream in(read_file(data_path("fixtures/covid.csv")));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

}  // namespace

TEST_CASE("covid fixture infers temporal, geographic, quantitative, quantitative") {
  const auto catalog = covid_catalog();
  const auto schema = catalog->table("covid");
  REQUIRE(schema);
  REQUIRE(schema->columns.size() == 4);
  CHECK(schema->columns[0] == ColumnInfo{"date", StorageType::Date, SemanticType::Temporal});
  CHECK(schema->columns[1] == ColumnInfo{"state", StorageType::Text, SemanticType::Geographic});
  CHECK(schema->columns[2] == ColumnInfo{"cases", StorageType::Integer, SemanticType::Quantitative});
  CHECK(schema->columns[3] == ColumnInfo{"deaths", StorageType::Integer, SemanticType::Quantitative});
  CHECK(schema->row_count == static_cast<std::int64_t>(naive_rows().size()));
}

TEST_CASE("single column file") {
  DatasetCatalog catalog;
  const TableSchema s = catalog.ingest_csv("t", "x\n1\n2");
  REQUIRE(s.columns.size() == 1);
  CHECK(s.columns[0].semantic_type == SemanticType::Quantitative);
  CHECK(s.row_count == 2);
}

TEST_CASE("ingest errors") {
  DatasetCatalog catalog;
  CHECK_THROWS_AS(catalog.ingest_csv("t", "a,b\n"), EmptyTable);
  CHECK_THROWS_AS(catalog.ingest_csv("t", ""), MalformedCsv);
  CHECK_THROWS_AS(catalog.ingest_csv("t", "a,a\n1,2\n"), MalformedCsv);
  CHECK_THROWS_AS(catalog.ingest_csv("bad name", "a\n1\n"), Error);
  try {
    catalog.ingest_csv("t", "a,b\n1,2\n3\n");
    FAIL("expected MalformedCsv");
  } catch (const MalformedCsv& e) {
    CHECK(e.line() == 3);
  }
  try {
    catalog.ingest_csv("t", "a,b\n1,\"2\n");
    FAIL("expected MalformedCsv");
  } catch (const MalformedCsv& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("RFC 4180 quoting") {
  const auto rows = parse_csv("name,note\r\n\"Smith, J\",\"said \"\"hi\"\"\"\r\nx,\"multi\nline\"\r\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1][0] == "Smith, J");
  CHECK(rows[1][1] == "said \"hi\"");
  CHECK(rows[2][1] == "multi\nline");
  CHECK_THROWS_AS(parse_csv("a\nx\"y\n"), MalformedCsv);
  CHECK_THROWS_AS(parse_csv("a\n\"x\"y\n"), MalformedCsv);
}

TEST_CASE("inference thresholds") {
  DatasetCatalog catalog;
  SUBCASE("95% numeric is quantitative with nulls for the rest") {
    std::string csv = "v\n";
    for (int i = 0; i < 19; ++i) csv += std::to_string(i) + "\n";
    csv += "oops\n";
    const auto s = catalog.ingest_csv("t", csv);
    CHECK(s.columns[0].semantic_type == SemanticType::Quantitative);
    CHECK(s.columns[0].storage_type == StorageType::Integer);
    const auto r = catalog.execute_sql("select count(v) from t");
    CHECK(r.rows[0][0] == Value{std::int64_t{19}});
  }
  SUBCASE("below 95% numeric is categorical") {
    std::string csv = "v\n";
    for (int i = 0; i < 18; ++i) csv += std::to_string(i) + "\n";
    csv += "oops\nno\n";
    CHECK(catalog.ingest_csv("t", csv).columns[0].semantic_type == SemanticType::Categorical);
  }
  SUBCASE("geographic needs 80% of distinct values in the region list") {
    CHECK(catalog.ingest_csv("g", "s\nOhio\nTexas\nUtah\nIowa\nAtlantis\n").columns[0].semantic_type ==
          SemanticType::Geographic);
    CHECK(catalog.ingest_csv("g", "s\nOhio\nTexas\nUtah\nMars\nAtlantis\n").columns[0].semantic_type ==
          SemanticType::Categorical);
  }
  SUBCASE("reals and dates") {
    const auto s = catalog.ingest_csv("t", "r,d\n1.5,2022-01-31\n2,2022-02-29\n");
    CHECK(s.columns[0].storage_type == StorageType::Real);
    // 2022-02-29 is not a date, so only half the values parse.
    CHECK(s.columns[1].semantic_type == SemanticType::Categorical);
  }
}

TEST_CASE("configurable region list") {
  const auto path = std::filesystem::temp_directory_path() / "choicesql_regions.txt";
  {
    std::ofstream out(path);
    out << "# provinces\nOntario\n\nQuebec\n";
  }
  const RegionList regions = RegionList::load(path.string());
  CHECK(regions.size() == 2);
  CHECK(regions.contains("ontario"));
  DatasetCatalog catalog(Clock{}, regions);
  CHECK(catalog.ingest_csv("p", "p\nOntario\nQuebec\n").columns[0].semantic_type ==
        SemanticType::Geographic);
  CHECK(catalog.ingest_csv("p", "p\nOhio\nTexas\n").columns[0].semantic_type ==
        SemanticType::Categorical);
  std::filesystem::remove(path);
  CHECK(RegionList::load(data_path("us_states.txt")).size() == RegionList::us_states().size());
}

TEST_CASE("attribute domains are sorted, distinct, nulls excluded, and cached") {
  const auto catalog = covid_catalog();
  CHECK(catalog->attribute_domain("covid", "state") ==
        std::vector<Value>{std::string("Ohio"), std::string("Texas"), std::string("Utah")});
  CHECK_THROWS_AS(catalog->attribute_domain("covid", "nosuch"), UnknownColumn);

  DatasetCatalog c;
  c.ingest_csv("t", "k,v\na,1\n,2\na,3\n");
  CHECK(c.attribute_domain("t", "k") == std::vector<Value>{std::string("a")});
  c.ingest_csv("t", "k,v\nb,1\nc,2\n");
  CHECK(c.attribute_domain("t", "k") == std::vector<Value>{std::string("b"), std::string("c")});
}

TEST_CASE("the cases query sums cases per state") {
  const auto catalog = covid_catalog();
  std::map<std::string, std::int64_t> expected;
  for (const auto& row : naive_rows()) expected[row[1]] += std::stoll(row[2]);

  const ResultTable r = catalog->execute_sql(kCasesByState);
  REQUIRE(r.columns.size() == 2);
  CHECK(r.columns[0].semantic_type == SemanticType::Geographic);
  CHECK(r.columns[1].semantic_type == SemanticType::Quantitative);
  REQUIRE(r.rows.size() == expected.size());
  for (const auto& row : r.rows) {
    const auto& state = std::get<std::string>(row[0]);
    CHECK(std::get<std::int64_t>(row[1]) == expected.at(state));
  }
}

TEST_CASE("execute_sql basics") {
  const auto catalog = covid_catalog();
  const ResultTable one = catalog->execute_sql("select 1");
  CHECK(one.columns.size() == 1);
  CHECK(one.rows.size() == 1);
  CHECK_THROWS_AS(catalog->execute_sql("selec 1"), SqlError);
  CHECK_THROWS_AS(catalog->execute_sql("select 1; select 2"), SqlError);
  CHECK_THROWS_AS(catalog->execute_sql("delete from covid"), SqlError);
  CHECK_THROWS_AS(catalog->execute_sql("select ANY{a} from covid"), SqlError);

  const auto count = catalog->execute_sql("SELECT count(*) FROM covid");
  CHECK(count.rows[0][0] == Value{catalog->table("covid")->row_count});
  CHECK(count.columns[0].semantic_type == SemanticType::Quantitative);

  const auto dates = catalog->execute_sql("select date, max(deaths) from covid group by date");
  CHECK(dates.columns[0].semantic_type == SemanticType::Temporal);
  CHECK(dates.columns[1].semantic_type == SemanticType::Quantitative);
}

TEST_CASE("today() is rewritten from the injected clock") {
  const auto catalog = covid_catalog();
  CHECK(catalog->rewrite_today("date(today(), '-7 days')") == "date('2022-10-01', '-7 days')");
  CHECK(catalog->rewrite_today("select 'today()', TODAY ( )") == "select 'today()', '2022-10-01'");
  CHECK(catalog->rewrite_today("select today_x()") == "select today_x()");
  const auto r = catalog->execute_sql("select date(today(), '-30 days')");
  CHECK(r.rows[0][0] == Value{std::string("2022-09-01")});
  CHECK_THROWS_AS(Clock::fixed("10/01/2022"), Error);
  CHECK(is_iso_date(Clock{}.today()));
}

TEST_CASE("schema_text rendering") {
  const auto catalog = covid_catalog();
  CHECK(catalog->schema_text() == "covid(date:date, state:text, cases:int, deaths:int)");
  catalog->ingest_csv("airports", "code,elev\nJFK,13.5\n");
  CHECK(catalog->schema_text() ==
        "airports(code:text, elev:real)\ncovid(date:date, state:text, cases:int, deaths:int)");
  CHECK(catalog->schema_text("covid") == "covid(date:date, state:text, cases:int, deaths:int)");
  DatasetCatalog empty;
  CHECK_THROWS_AS(empty.schema_text(), EmptyCatalog);
}

TEST_CASE("type inference is deterministic") {
  DatasetCatalog a, b;
  const std::string csv = read_file(data_path("fixtures/covid.csv"));
  CHECK(a.ingest_csv("covid", csv) == b.ingest_csv("covid", csv));
}

TEST_CASE("value quoting follows storage type") {
  CHECK(quote_value(std::string("O'Hare"), StorageType::Text) == "'O''Hare'");
  CHECK(quote_value(std::int64_t{7}, StorageType::Integer) == "7");
  CHECK(quote_value(std::string("2022-01-01"), StorageType::Date) == "'2022-01-01'");
  CHECK(quote_value(std::monostate{}, StorageType::Text) == "NULL");
}

TEST_CASE("concurrent reads") {
  const auto catalog = covid_catalog();
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int i = 0; i < 4; ++i) {
    threads.emplace_back([&] {
      for (int j = 0; j < 50; ++j) {
        if (catalog->execute_sql(kCasesByState).rows.size() == 3 &&
            catalog->attribute_domain("covid", "state").size() == 3)
          ++ok;
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(ok == 200);
}
