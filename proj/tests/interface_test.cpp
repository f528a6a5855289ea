#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "choicesql/interface.hpp"
#include "choicesql/validate.hpp"
#include "choicesql/wire.hpp"
#include "support/cost_oracle.hpp"
#include "support/fixtures.hpp"
#include "support/template_gen.hpp"

using namespace choicesql;
using namespace choicesql::testing;

namespace {

std::vector<SpsTemplate> parse_all(const std::vector<std::string>& texts) {
  std::vector<SpsTemplate> out;
  for (const auto& t : texts) out.push_back(parse_sps(t));
  return out;
}

std::vector<SpsTemplate> covid_templates() { return parse_all({kMeasureTemplate, kTrendTemplate}); }

void check_spec_invariants(const InterfaceSpec& spec, const std::vector<SpsTemplate>& templates,
                           const DatasetCatalog& catalog) {
  std::map<std::pair<std::size_t, NodeId>, int> bound;
  for (const auto& w : spec.widgets) {
    ++bound[{w.template_id, w.node_id}];
    const auto cands = widget_candidates(templates[w.template_id], w.node_id, catalog);
    CHECK(std::find(cands.begin(), cands.end(), w.widget_type) != cands.end());
  }
  for (const auto& i : spec.interactions) {
    if (i.opt_node) ++bound[{i.template_id, *i.opt_node}];
    ++bound[{i.template_id, i.any_node}];
    const auto& target = templates[i.template_id].node(i.any_node);
    REQUIRE(target.domain_ref());
    CHECK(domain_column(templates[i.template_id], i.any_node, catalog).column.name == i.binding_column);
  }
  std::size_t total_nodes = 0;
  for (std::size_t t = 0; t < templates.size(); ++t) {
    total_nodes += templates[t].size();
    for (NodeId id = 0; id < templates[t].size(); ++id) CHECK(bound[{t, id}] == 1);
  }
  CHECK(bound.size() == total_nodes);
  CHECK(spec.total_cost == interface_cost(spec, CostParams{}));

  const auto& cells = spec.layout.cells;
  CHECK(cells.size() == spec.views.size() + spec.widgets.size());
  for (std::size_t a = 0; a < cells.size(); ++a) {
    const auto& c = cells[a];
    const bool listed = std::count(spec.layout.overflow.begin(), spec.layout.overflow.end(), c.id) == 1;
    const bool inside = c.x >= 0 && c.y >= 0 && c.x + c.w <= spec.layout.screen.width &&
                        c.y + c.h <= spec.layout.screen.height;
    CHECK(inside != listed);
    for (std::size_t b = a + 1; b < cells.size(); ++b) {
      const auto& d = cells[b];
      const bool disjoint = c.x + c.w <= d.x || d.x + d.w <= c.x || c.y + c.h <= d.y || d.y + d.h <= c.y;
      CHECK(disjoint);
    }
  }
}

}  // namespace

TEST_CASE("visualization rules") {
  const auto catalog = covid_catalog();
  auto vis = [&](const char* sql) { return choose_visualization(parse_sps(sql), *catalog); };

  const ViewSpec map = vis(kMeasureTemplate);
  CHECK(map.vis_type == VisType::Choropleth);
  REQUIRE(map.x);
  REQUIRE(map.color);
  CHECK(map.x->column == "state");
  CHECK(map.color->column == "sum(cases)");
  CHECK(map.fallback == VisType::Bar);

  const ViewSpec line = vis(kTrendTemplate);
  CHECK(line.vis_type == VisType::Line);
  CHECK(line.x->semantic_type == SemanticType::Temporal);
  CHECK(line.y->column == "sum(cases)");

  CHECK(vis("select count(*) from covid").vis_type == VisType::SingleValue);
  CHECK(vis("select cases, deaths from covid").vis_type == VisType::Scatter);
  CHECK(vis("select state, date, cases from covid").vis_type == VisType::Table);
  CHECK(vis("select date, state from covid").vis_type == VisType::Table);

  catalog->ingest_csv("shop", "item,qty\napple,3\npear,5\nfig,1\n");
  CHECK(vis("select item, qty from shop").vis_type == VisType::Bar);
  std::string many = "k,v\n";
  for (int i = 0; i < 31; ++i) many += "key" + std::to_string(i) + "," + std::to_string(i) + "\n";
  catalog->ingest_csv("wide", many);
  CHECK(vis("select k, v from wide").vis_type == VisType::Table);

  CHECK_THROWS_AS(vis("select nosuch from covid"), SqlError);
}

TEST_CASE("widget candidate table") {
  const auto catalog = covid_catalog();
  auto cands = [&](const char* sql) { return widget_candidates(parse_sps(sql), 0, *catalog); };
  using W = WidgetType;
  CHECK(cands("select ANY{cases, deaths} from covid") == std::vector{W::ButtonSet, W::Dropdown});
  CHECK(cands("select ANY{a, b, c, d, e} from covid") == std::vector{W::Dropdown, W::ButtonSet});
  CHECK(cands("select * from covid where state = ANY{&state}") == std::vector{W::Dropdown, W::ButtonSet});
  CHECK(cands("select ANY{0.0-1.0}") == std::vector{W::Slider});
  CHECK(cands("select SUBSET[,]{a, b, c, d, e, f} from covid") ==
        std::vector{W::CheckboxGroup, W::Multiselect});
  CHECK(cands("select SUBSET[,]{a, b, c, d, e, f, g} from covid") == std::vector{W::Multiselect});
  CHECK(cands("select * from covid where state in (SUBSET[,]{&state})") ==
        std::vector{W::CheckboxGroup, W::Multiselect});
  CHECK(cands("select * from covid where OPT{cases > 1}") == std::vector{W::Toggle});
}

TEST_CASE("cross-view bindings") {
  const auto catalog = covid_catalog();
  SUBCASE("measure and trend templates give one click on the map") {
    const auto found = detect_cross_view_bindings(covid_templates(), *catalog);
    REQUIRE(found.size() == 1);
    CHECK(found[0].source_view == "v0");
    CHECK(found[0].event == "click");
    CHECK(found[0].template_id == 1);
    CHECK(found[0].opt_node == NodeId{0});
    CHECK(found[0].any_node == 1);
    CHECK(found[0].binding_column == "state");
    CHECK(found[0].on_deselect == Deselect::OptOff);
  }
  SUBCASE("unrelated templates") {
    const auto t = parse_all({"select count(*) from covid where OPT{cases > 5}",
                              "select date, sum(deaths) from covid group by date"});
    CHECK(detect_cross_view_bindings(t, *catalog).empty());
  }
  SUBCASE("no OPT wrapper restores the default on deselect") {
    const auto t = parse_all({kMeasureTemplate, "select date, sum(cases) from covid where state = ANY{&state} "
                                         "group by date"});
    const auto found = detect_cross_view_bindings(t, *catalog);
    REQUIRE(found.size() == 1);
    CHECK(!found[0].opt_node);
    CHECK(found[0].on_deselect == Deselect::RestoreDefault);
    const auto start = default_assignment(t[1], *catalog);
    const auto clicked = apply_delta(start, click_delta(found[0], std::string("Texas")), t[1], *catalog);
    CHECK(instantiate(t[1], clicked, *catalog).find("state = 'Texas'") != std::string::npos);
    CHECK(apply_delta(clicked, deselect_delta(found[0], t[1], *catalog), t[1], *catalog) == start);
  }
  SUBCASE("click then deselect with an OPT wrapper") {
    const auto t = covid_templates();
    const auto found = detect_cross_view_bindings(t, *catalog);
    const auto start = default_assignment(t[1], *catalog);
    const auto clicked = apply_delta(start, click_delta(found[0], std::string("Utah")), t[1], *catalog);
    CHECK(clicked.is_on(0));
    CHECK(apply_delta(clicked, deselect_delta(found[0], t[1], *catalog), t[1], *catalog) == start);
  }
  SUBCASE("patterns that must not bind") {
    for (const char* b : {"select date, sum(cases) from covid where state <> ANY{&state} group by date",
                          "select date, sum(cases) from covid where OPT{state = ANY{&state} and cases > 1} "
                          "group by date",
                          "select date, sum(cases) from covid where OPT{cases > 1 and state = "
                          "OPT{ANY{&state}}} group by date",
                          "select date, sum(cases) from covid where date = ANY{&date} group by date"}) {
      CAPTURE(b);
      CHECK(detect_cross_view_bindings(parse_all({kMeasureTemplate, b}), *catalog).empty());
    }
  }
  SUBCASE("whitespace and case in the pattern are ignored") {
    const auto t = parse_all({kMeasureTemplate, "select date, sum(cases) from covid where "
                                         "OPT{ STATE=ANY{&state} } group by date"});
    CHECK(detect_cross_view_bindings(t, *catalog).size() == 1);
  }
  SUBCASE("a view never binds its own template") {
    const auto t = parse_all({"select state, sum(cases) from covid where OPT{state = ANY{&state}} "
                              "group by state"});
    CHECK(detect_cross_view_bindings(t, *catalog).empty());
  }
}

TEST_CASE("cost arithmetic with default parameters") {
  const CostParams params;
  InterfaceSpec empty;
  CHECK(interface_cost(empty, params) == 0);

  InterfaceSpec one;
  one.widgets.push_back(WidgetSpec{"w0", WidgetType::Toggle});
  CHECK(interface_cost_micros(one, params) == 1'000'000 + 200'000);
  CHECK(interface_cost(one, params) == 1.2);

  InterfaceSpec covid;
  covid.widgets = {WidgetSpec{"w0", WidgetType::Toggle}, WidgetSpec{"w1", WidgetType::ButtonSet},
                   WidgetSpec{"w2", WidgetType::ButtonSet}};
  covid.interactions.push_back(InteractionSpec{});
  CHECK(interface_cost(covid, params) == 4.1);

  covid.layout.overflow = {"w2"};
  CHECK(interface_cost_micros(covid, params) == 4'100'000 + 10'000'000);
}

TEST_CASE("cost parameters load from config") {
  const CostParams shipped = CostParams::load(data_path("cost_params.json"));
  const CostParams defaults;
  CHECK(std::equal(std::begin(shipped.widget_cost), std::end(shipped.widget_cost),
                   std::begin(defaults.widget_cost)));
  CHECK(shipped.interaction_cost == defaults.interaction_cost);
  CHECK(shipped.overflow_penalty == defaults.overflow_penalty);
  CHECK(shipped.widget_space_cost == defaults.widget_space_cost);

  const CostParams p = CostParams::from_json_text(R"({"widget_costs": {"dropdown": 0.25}})");
  CHECK(p.widget(WidgetType::Dropdown) == 250'000);
  CHECK(p.widget(WidgetType::Toggle) == 1'000'000);
  CHECK_THROWS_AS(CostParams::from_json_text(R"({"interaction_cost": -1})"), Error);
  CHECK_THROWS_AS(CostParams::from_json_text(R"({"widget_costs": {"knob": 1}})"), Error);
  CHECK_THROWS_AS(CostParams::from_json_text("[1]"), Error);
  CHECK_THROWS_AS(CostParams::load("/nonexistent/cost.json"), Error);
}

TEST_CASE("covid interface matches the golden file") {
  const auto catalog = covid_catalog();
  const auto templates = covid_templates();
  const InterfaceSpec spec = generate_interface(templates, *catalog, Screen{1280, 800});
  CHECK(spec.views.size() == 2);
  CHECK(std::count_if(spec.widgets.begin(), spec.widgets.end(),
                      [](const auto& w) { return w.widget_type == WidgetType::Toggle; }) == 1);
  CHECK(std::count_if(spec.widgets.begin(), spec.widgets.end(),
                      [](const auto& w) { return w.widget_type == WidgetType::ButtonSet; }) == 2);
  CHECK(spec.widgets.size() == 3);
  CHECK(spec.interactions.size() == 1);
  CHECK(spec.total_cost == 4.1);
  check_spec_invariants(spec, templates, *catalog);
  CHECK(wire::dump(wire::to_json(spec)) == read_file(data_path("golden/covid_interface.json")));
  CHECK(wire::spec_from_json(wire::to_json(spec)) == spec);
}

TEST_CASE("template without choice nodes") {
  const auto catalog = covid_catalog();
  const auto t = parse_all({"select state, sum(cases) from covid group by state"});
  const InterfaceSpec spec = generate_interface(t, *catalog);
  CHECK(spec.views.size() == 1);
  CHECK(spec.widgets.empty());
  CHECK(spec.interactions.empty());
  CHECK(spec.total_cost == 0);
  CHECK(spec.layout.cells == std::vector<LayoutCell>{{"v0", 0, 0, 1280, 360}});
}

TEST_CASE("widgets on a short screen overflow and pay the penalty") {
  const auto catalog = covid_catalog();
  const auto t = parse_all({"select date, ANY{sum, max}(cases) from covid where OPT{cases > 10} and "
                            "OPT{deaths > 1} and OPT{state = 'Ohio'} group by date"});
  const InterfaceSpec spec = generate_interface(t, *catalog, Screen{640, 200});
  // 120 px view plus four 40 px rows: the last two rows end at 240 and 280.
  CHECK(spec.layout.overflow == std::vector<std::string>{"w2", "w3"});
  CHECK(interface_cost_micros(spec, CostParams{}) == 4 * 1'200'000 + 2 * 10'000'000);
  check_spec_invariants(spec, t, *catalog);
  CHECK_THROWS_AS(generate_interface(t, *catalog, Screen{0, 100}), Error);
}

TEST_CASE("interaction is dropped when a widget is cheaper") {
  const auto catalog = covid_catalog();
  CostParams params;
  params.interaction_cost = 5'000'000;
  const InterfaceSpec spec = generate_interface(covid_templates(), *catalog, Screen{1280, 800}, params);
  CHECK(spec.interactions.empty());
  CHECK(spec.widgets.size() == 5);
  CHECK(interface_cost_micros(spec, params) == 5 * 1'200'000);
}

TEST_CASE("assemble rejects inconsistent bindings") {
  const auto catalog = covid_catalog();
  const BindingProblem p = analyze_bindings(covid_templates(), *catalog);
  REQUIRE(p.nodes.size() == 5);
  // Node 1 is Opt#0 of trend template; binding it alone to the click is invalid.
  Binding b(5, 0);
  b[1] = p.nodes[1].candidates.size();
  CHECK_THROWS_AS(assemble_interface(p, b, Screen{}, CostParams{}), Error);
  CHECK_THROWS_AS(assemble_interface(p, Binding(4, 0), Screen{}, CostParams{}), Error);
  b[2] = p.nodes[2].candidates.size();
  CHECK_NOTHROW(assemble_interface(p, b, Screen{}, CostParams{}));
}

TEST_CASE("property: generated cost equals the brute-force minimum") {
  const auto catalog = covid_catalog();
  TemplateGen gen(4242);
  std::size_t checked = 0, with_interactions = 0;
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<std::string> texts = {gen.next(), gen.next()};
    if (trial % 3 == 0) texts = {kMeasureTemplate, gen.next()};
    const auto templates = parse_all(texts);
    CAPTURE(texts[0]);
    CAPTURE(texts[1]);
    const Screen screen{1024, trial % 2 ? 800 : 420};
    const BindingProblem p = analyze_bindings(templates, *catalog);
    const auto alternatives = binding_alternatives(p);
    if (alternatives > kExhaustiveSearchLimit) continue;
    const OracleResult oracle = brute_force_cost(p, screen);
    CHECK(oracle.alternatives == alternatives);
    const InterfaceSpec spec = generate_interface(templates, *catalog, screen);
    CHECK(interface_cost_micros(spec, CostParams{}) == oracle.min_cost);
    check_spec_invariants(spec, templates, *catalog);
    ++checked;
    if (!p.interactions.empty()) ++with_interactions;
  }
  CHECK(checked >= 30);
  CHECK(with_interactions >= 5);
}

TEST_CASE("property: adding a choice node never lowers the cost") {
  const auto catalog = covid_catalog();
  TemplateGen gen(99);
  for (int trial = 0; trial < 30; ++trial) {
    const std::string base = gen.next();
    const std::string grown = "select * from (" + base + ") where OPT{1 = 1}";
    CAPTURE(base);
    const auto a = generate_interface(parse_all({kMeasureTemplate, base}), *catalog);
    const auto b = generate_interface(parse_all({kMeasureTemplate, grown}), *catalog);
    CHECK(interface_cost_micros(b, CostParams{}) >= interface_cost_micros(a, CostParams{}));
  }
}

TEST_CASE("greedy search on a large binding space keeps the invariants") {
  const auto catalog = covid_catalog();
  std::string sql = "select date, sum(cases) from covid where OPT{state = ANY{&state}}";
  for (int i = 0; i < 13; ++i)
    sql += " and cases > ANY{" + std::to_string(i) + ", " + std::to_string(i + 100) + "}";
  sql += " group by date order by ANY{1, 2} limit ANY{5, 10, 20, 50, 100}";
  const auto templates = parse_all({kMeasureTemplate, sql});
  const BindingProblem p = analyze_bindings(templates, *catalog);
  REQUIRE(binding_alternatives(p) > kExhaustiveSearchLimit);
  const InterfaceSpec spec = generate_interface(templates, *catalog, Screen{1280, 2000});
  check_spec_invariants(spec, templates, *catalog);
  CHECK(spec.interactions.size() == 1);
  for (const auto& w : spec.widgets) CHECK(w.widget_type != WidgetType::Dropdown);
}

TEST_CASE("generation is deterministic on the wire") {
  const auto a = covid_catalog();
  const auto b = covid_catalog();
  TemplateGen gen(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = parse_all({gen.next(), gen.next()});
    CHECK(wire::dump(wire::to_json(generate_interface(t, *a))) ==
          wire::dump(wire::to_json(generate_interface(t, *b))));
  }
}

TEST_CASE("wire round trips") {
  using wire::Json;
  for (const Selection& s : std::vector<Selection>{sel::Index{2}, sel::Value{std::string("Texas")},
                                                   sel::Value{std::int64_t{3}}, sel::Number{0.5},
                                                   sel::IndexSet{{0, 2}}, sel::ValueSet{{std::string("a")}},
                                                   sel::On{}, sel::Off{}})
    CHECK(wire::selection_from_json(wire::to_json(s)) == s);
  CHECK_THROWS_AS(wire::selection_from_json(Json::parse(R"({"bogus": 1})")), wire::WireError);
  CHECK_THROWS_AS(wire::selection_from_json(Json::parse(R"({"index": "x"})")), wire::WireError);
  CHECK_THROWS_AS(wire::selection_from_json(Json::parse("[]")), wire::WireError);

  ChoiceAssignment a;
  a.selections = {{0, sel::On{}}, {1, sel::Value{std::string("Ohio")}}};
  CHECK(wire::assignment_from_json(wire::to_json(a)) == a);

  Json bad = wire::to_json(InterfaceSpec{});
  bad["spec_version"] = 2;
  CHECK_THROWS_AS(wire::spec_from_json(bad), wire::WireError);
}
