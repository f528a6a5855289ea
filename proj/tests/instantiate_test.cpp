#include <doctest.h>

#include <regex>
#include <set>

#include "choicesql/instantiate.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/template_gen.hpp"

using namespace choicesql;
using namespace choicesql::testing;

namespace {

ChoiceAssignment assign(std::initializer_list<std::pair<const NodeId, Selection>> items) {
  ChoiceAssignment a;
  a.selections = std::map<NodeId, Selection>(items);
  return a;
}

const Value kTexas = std::string("Texas");

}  // namespace

TEST_CASE("default assignments") {
  const auto catalog = covid_catalog();
  CHECK(default_assignment(parse_sps(kMeasureTemplate), *catalog) == assign({{0, sel::Index{0}}}));
  CHECK(default_assignment(parse_sps(kTrendTemplate), *catalog) ==
        assign({{0, sel::Off{}}, {2, sel::Off{}}}));

  const auto t = parse_sps(
      "select * from covid where state = ANY{&state} and cases > ANY{10-20} and "
      "state in (SUBSET[,]{&state}) and deaths in (SUBSET[,]{1, 2})");
  CHECK(default_assignment(t, *catalog) == assign({{0, sel::Value{std::string("Ohio")}},
                                                   {1, sel::Number{10}},
                                                   {2, sel::ValueSet{{std::string("Ohio")}}},
                                                   {3, sel::IndexSet{{0}}}}));

  DatasetCatalog sparse(Clock::fixed(kClockDate));
  sparse.ingest_csv("t", "a,b\n1,\n2,\n");
  try {
    default_assignment(parse_sps("select a from t where b = ANY{&b}"), sparse);
    FAIL("expected EmptyDomain");
  } catch (const EmptyDomain& e) {
    CHECK(e.node() == 0);
  }
}

TEST_CASE("measure template instantiates to the cases and deaths queries") {
  const auto catalog = covid_catalog();
  const auto t = parse_sps(kMeasureTemplate);
  CHECK(instantiate(t, assign({{0, sel::Index{0}}}), *catalog) == kCasesByState);
  CHECK(instantiate(t, assign({{0, sel::Index{1}}}), *catalog) == kDeathsByState);
}

TEST_CASE("trend template with every Opt off drops the WHERE clause") {
  const auto catalog = covid_catalog();
  const auto t = parse_sps(kTrendTemplate);
  const std::string sql = instantiate(t, assign({{0, sel::Off{}}, {2, sel::Off{}}}), *catalog);
  CHECK(sql == "select date, sum(cases) from covid group by date");
  CHECK(catalog->execute_sql(sql) ==
        catalog->execute_sql("select date, sum(cases) from covid group by date"));
}

TEST_CASE("trend template Texas over the last 30 days") {
  const auto catalog = covid_catalog();
  const auto t = parse_sps(kTrendTemplate);
  const auto a = assign({{0, sel::On{}}, {1, sel::Value{kTexas}}, {2, sel::On{}}, {3, sel::Index{1}}});
  CHECK(instantiate(t, a, *catalog) ==
        "select date, sum(cases) from covid where state = 'Texas' and "
        "date > date('2022-10-01', '-30 days') group by date");

  // Only one Opt on: neighbouring connective goes, WHERE stays.
  CHECK(instantiate(t, assign({{0, sel::Off{}}, {2, sel::On{}}, {3, sel::Index{0}}}), *catalog) ==
        "select date, sum(cases) from covid where date > date('2022-10-01', '-7 days') group by date");
  CHECK(instantiate(t, assign({{0, sel::On{}}, {1, sel::Value{kTexas}}, {2, sel::Off{}}}), *catalog) ==
        "select date, sum(cases) from covid where state = 'Texas' group by date");
}

TEST_CASE("pruning of projections, parentheses and HAVING") {
  const auto catalog = covid_catalog();
  auto off_all = [&](const char* sps) {
    const auto t = parse_sps(sps);
    ChoiceAssignment a;
    for (const auto& n : t.nodes) a.selections[n.id] = sel::Off{};
    return instantiate(t, a, *catalog);
  };
  CHECK(off_all("select state, OPT{max(deaths)}, sum(cases) from covid group by state") ==
        "select state, sum(cases) from covid group by state");
  CHECK(off_all("select OPT{max(deaths)}, state from covid") == "select state from covid");
  CHECK(off_all("select state from covid where deaths > 1 and (OPT{cases > 2} or OPT{cases < 1})") ==
        "select state from covid where deaths > 1");
  CHECK(off_all("select state from covid group by state having OPT{sum(cases) > 3} order by 1") ==
        "select state from covid group by state order by 1");
  CHECK(off_all("select state from covid where OPT{a} or OPT{b} and OPT{c} limit 3") ==
        "select state from covid limit 3");
}

TEST_CASE("subsets, ranges and value quoting") {
  const auto catalog = covid_catalog();
  const auto t = parse_sps(
      "select * from covid where state in (SUBSET[,]{&state}) and cases > ANY{0.0-1.0} and "
      "deaths in (SUBSET[, ]{1, 2, 3})");
  const auto a = assign({{0, sel::ValueSet{{std::string("Ohio"), std::string("Utah")}}},
                         {1, sel::Number{0.5}},
                         {2, sel::IndexSet{{0, 2}}}});
  CHECK(instantiate(t, a, *catalog) ==
        "select * from covid where state in ('Ohio','Utah') and cases > 0.5 and deaths in (1, 3)");

  const auto n = parse_sps("select * from covid where cases = ANY{&cases}");
  const auto v = default_assignment(n, *catalog);
  CHECK(std::regex_search(instantiate(n, v, *catalog), std::regex(R"(cases = \d+$)")));  // bare integer
}

TEST_CASE("instantiate errors") {
  const auto catalog = covid_catalog();
  const auto t = parse_sps(kTrendTemplate);
  try {
    instantiate(t, assign({{0, sel::On{}}, {2, sel::Off{}}}), *catalog);
    FAIL("expected IncompleteAssignment");
  } catch (const IncompleteAssignment& e) {
    CHECK(e.node() == 1);
  }
  CHECK_THROWS_AS(instantiate(t, assign({{0, sel::Off{}}}), *catalog), IncompleteAssignment);
  auto out_of_range = [&](const ChoiceAssignment& a) -> NodeId {
    try {
      instantiate(t, a, *catalog);
    } catch (const SelectionOutOfRange& e) {
      return e.node();
    }
    return 99;
  };
  CHECK(out_of_range(assign({{0, sel::On{}}, {1, sel::Value{std::string("Atlantis")}}, {2, sel::Off{}}})) == 1);
  CHECK(out_of_range(assign({{0, sel::Off{}}, {2, sel::On{}}, {3, sel::Index{2}}})) == 3);
  CHECK(out_of_range(assign({{0, sel::Index{0}}, {2, sel::Off{}}})) == 0);

  const auto s = parse_sps("select * from covid where deaths in (SUBSET[,]{1, 2})");
  CHECK_THROWS_AS(instantiate(s, assign({{0, sel::IndexSet{}}}), *catalog), SelectionOutOfRange);
  CHECK_THROWS_AS(instantiate(s, assign({{0, sel::IndexSet{{1, 0}}}}), *catalog), SelectionOutOfRange);
  const auto r = parse_sps("select * from covid where cases > ANY{0-1}");
  CHECK_THROWS_AS(instantiate(r, assign({{0, sel::Number{1.5}}}), *catalog), SelectionOutOfRange);
}

TEST_CASE("enumeration examples") {
  const auto catalog = covid_catalog();
  CHECK(enumerate_assignments(parse_sps(kMeasureTemplate), *catalog, 10).size() == 2);

  // Oracle: (Off | On x each state) x (Off | On x each window).
  const auto states = catalog->attribute_domain("covid", "state");
  std::size_t expected = 0;
  for (std::size_t s = 0; s <= states.size(); ++s)
    for (std::size_t w = 0; w <= 2; ++w) ++expected;
  const auto trend = enumerate_assignments(parse_sps(kTrendTemplate), *catalog, 100);
  CHECK(trend.size() == expected);
  CHECK(trend.size() == 12);
  CHECK(trend.front() == default_assignment(parse_sps(kTrendTemplate), *catalog));

  std::size_t subsets = 0;
  for (unsigned mask = 0; mask < 8; ++mask) subsets += mask != 0;
  const auto abc = enumerate_assignments(parse_sps("select SUBSET[,]{a,b,c} from t"), *catalog, 100);
  CHECK(abc.size() == subsets);

  CHECK(enumerate_assignments(parse_sps(kTrendTemplate), *catalog, 5).size() == 5);

  const auto ranged = enumerate_assignments(parse_sps("select ANY{0.0-1.0}"), *catalog, 10);
  REQUIRE(ranged.size() == 3);
  CHECK(std::get<sel::Number>(*ranged[1].find(0)).value == 0.5);
}

TEST_CASE("query space counts") {
  const auto catalog = covid_catalog();
  CHECK(count_concrete_queries(parse_sps(kMeasureTemplate), *catalog).count == 2);
  CHECK(count_concrete_queries(parse_sps("select ANY{0.0-1.0}"), *catalog).continuous);
  CHECK_FALSE(count_concrete_queries(parse_sps(kTrendTemplate), *catalog).continuous);

  // 50 distinct states: (1+50) x (1+2), checked against distinct SQL strings.
  DatasetCatalog wide(Clock::fixed(kClockDate));
  std::string csv = "date,state,cases\n";
  const auto names = read_file(data_path("us_states.txt"));
  std::size_t added = 0;
  std::istringstream in(names);
  for (std::string line; std::getline(in, line) && added < 50; ++added)
    csv += "2022-09-01," + line + ",1\n";
  wide.ingest_csv("covid", csv);
  const auto t = parse_sps(kTrendTemplate);
  CHECK(count_concrete_queries(t, wide).count == 153);
  CHECK(brute_force_sql(t, wide, "covid").size() == 153);
  CHECK(enumerate_assignments(t, wide, 1000).size() == 153);
}

TEST_CASE("apply_delta") {
  const auto catalog = covid_catalog();
  const auto t = parse_sps(kTrendTemplate);
  const auto defaults = default_assignment(t, *catalog);

  const auto texas = apply_delta(defaults, {{0, sel::On{}}, {1, sel::Value{kTexas}}}, t, *catalog);
  CHECK(texas == assign({{0, sel::On{}}, {1, sel::Value{kTexas}}, {2, sel::Off{}}}));
  CHECK(instantiate(t, texas, *catalog).find("state = 'Texas'") != std::string::npos);

  CHECK(apply_delta(defaults, {}, t, *catalog) == defaults);

  // Turning Opt#2 on fills Any#3 with the same value default_assignment would.
  const auto window = apply_delta(defaults, {{2, sel::On{}}}, t, *catalog);
  CHECK(*window.find(3) == default_selection(t, 3, *catalog));
  CHECK(*window.find(3) == Selection{sel::Index{0}});

  // Turning an Opt off drops its descendants.
  const auto off = apply_delta(texas, {{0, sel::Off{}}}, t, *catalog);
  CHECK(off == defaults);

  CHECK_THROWS_AS(apply_delta(defaults, {{1, sel::Value{std::string("Mars")}}}, t, *catalog),
                  SelectionOutOfRange);
  CHECK_THROWS_AS(apply_delta(defaults, {{9, sel::On{}}}, t, *catalog), SelectionOutOfRange);

  // Switching an Any branch drops selections under the old branch.
  const auto nested = parse_sps("select ANY{sum(ANY{cases, deaths}), count(*)} from covid");
  const auto d = default_assignment(nested, *catalog);
  CHECK(d.selections.size() == 2);
  CHECK(apply_delta(d, {{0, sel::Index{1}}}, nested, *catalog) == assign({{0, sel::Index{1}}}));
}

TEST_CASE("property: soundness, count consistency, pruning and idempotence") {
  const auto catalog = covid_catalog();
  TemplateGen gen(7);
  const std::regex artifacts(
      R"(\b(where|having|and|or)\s*($|\)|\b(group|order|limit|and|or)\b)|\bwhere\s+(and|or)\b|,\s*(,|from\b))",
      std::regex::icase);
  for (int trial = 0; trial < 40; ++trial) {
    const std::string text = gen.next();
    CAPTURE(text);
    const auto t = parse_sps(text);

    const auto all = enumerate_assignments(t, *catalog, 1u << 20);
    const auto size = count_concrete_queries(t, *catalog);
    REQUIRE_FALSE(size.continuous);
    CHECK(size.count == all.size());
    CHECK(brute_force_sql(t, *catalog, "covid").size() == all.size());

    std::size_t executed = 0;
    for (const auto& a : all) {
      const std::string sql = instantiate(t, a, *catalog);
      if (executed++ < 200) CHECK_NOTHROW(catalog->execute_sql(sql));
      CHECK(sql.find("ANY{") == std::string::npos);
      bool opts_off = true;
      for (const auto& [id, s] : a.selections)
        if (t.node(id).kind == ChoiceKind::Opt && !std::holds_alternative<sel::Off>(s)) opts_off = false;
      if (opts_off) CHECK_FALSE(std::regex_search(sql, artifacts));

      CHECK(apply_delta(a, {}, t, *catalog) == a);
    }
    if (!all.empty()) {
      const auto& last = all.back();
      Delta delta(last.selections.begin(), last.selections.end());
      const auto once = apply_delta(all.front(), delta, t, *catalog);
      CHECK(apply_delta(once, delta, t, *catalog) == once);
    }
  }
}
