#include "choicesql/interface.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "text_util.hpp"

namespace choicesql {

namespace {

constexpr const char* kWidgetNames[] = {"button_set",     "dropdown",    "toggle",
                                        "checkbox_group", "multiselect", "slider"};
constexpr std::size_t kMaxDistinctBarKeys = 30;
constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > kSaturated / a) return kSaturated;
  return a * b;
}

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) { return b > kSaturated - a ? kSaturated : a + b; }

std::int64_t to_micros(double v, const std::string& what) {
  if (!std::isfinite(v) || v < 0) throw Error("cost " + what + " must be a finite number >= 0");
  return std::llround(v * 1e6);
}

Encoding encode(const ResultTable& r, std::size_t i) {
  return Encoding{r.columns[i].name, i, r.columns[i].semantic_type};
}

std::size_t distinct_count(const ResultTable& r, std::size_t col) {
  std::set<std::string> seen;
  for (const auto& row : r.rows) seen.insert(value_label(row[col]));
  return seen.size();
}

std::string strip_spaces(std::string_view s) {
  std::string out;
  for (char c : s)
    if (!detail::is_space(c)) out += c;
  return out;
}

std::size_t subset_arity(const SpsTemplate& t, NodeId id, const DatasetCatalog& catalog) {
  const ChoiceNode& n = t.node(id);
  if (const auto* f = n.fragments()) return f->choices.size();
  const auto col = domain_column(t, id, catalog);
  return catalog.attribute_domain(col.table, col.column.name).size();
}

const Fragment& enclosing_fragment(const SpsTemplate& t, const ChoiceNode& n) {
  if (!n.parent) return t.root;
  return t.node(*n.parent).fragments()->choices.at(*n.branch);
}

// True when the text just before the node reads `<lhs> =` for one of `names`.
bool equality_before(std::string_view text, const std::vector<std::string>& names) {
  std::string_view s = detail::trim(text);
  if (s.empty() || s.back() != '=') return false;
  s.remove_suffix(1);
  if (!s.empty() && (s.back() == '<' || s.back() == '>' || s.back() == '!')) return false;
  s = detail::trim(s);
  for (const auto& name : names) {
    if (s.size() < name.size()) continue;
    const std::string_view tail = s.substr(s.size() - name.size());
    if (!detail::iequals(tail, name)) continue;
    if (s.size() == name.size()) return true;
    const char before = s[s.size() - name.size() - 1];
    if (!detail::is_ident_char(before) && before != '.') return true;
  }
  return false;
}

bool operand_after(std::string_view text) {
  const std::string_view s = detail::trim(text);
  return !s.empty() && std::string_view("+-*/|%").find(s.front()) != std::string_view::npos;
}

struct Match {
  std::optional<NodeId> opt;
  std::string column;
};

// Recognizes `col = ANY{&col}`, alone inside an OPT or as a top-level
// predicate term.
std::optional<Match> match_equality(const SpsTemplate& t, const ChoiceNode& n,
                                    const DatasetCatalog& catalog) {
  const auto* d = n.domain_ref();
  if (n.kind != ChoiceKind::Any || !d) return std::nullopt;
  std::optional<DatasetCatalog::ColumnRef> col;
  try {
    col = domain_column(t, n.id, catalog);
  } catch (const Error&) {
    return std::nullopt;
  }
  const std::vector<std::string> names = {d->attribute, col->table + "." + col->column.name,
                                          col->column.name};
  if (n.parent) {
    const ChoiceNode& p = t.node(*n.parent);
    if (p.kind != ChoiceKind::Opt || p.parent) return std::nullopt;
    const std::string text = strip_spaces(print_fragment(t, p.fragments()->choices.front()));
    for (const auto& name : names) {
      if (detail::iequals(text, strip_spaces(name) + "=ANY{&" + strip_spaces(d->attribute) + "}"))
        return Match{p.id, col->column.name};
    }
    return std::nullopt;
  }
  const Fragment& f = enclosing_fragment(t, n);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto* ref = std::get_if<NodeRef>(&f[i]);
    if (!ref || ref->id != n.id) continue;
    if (i == 0) return std::nullopt;
    const auto* before = std::get_if<Literal>(&f[i - 1]);
    if (!before || !equality_before(before->text, names)) return std::nullopt;
    if (i + 1 < f.size()) {
      const auto* after = std::get_if<Literal>(&f[i + 1]);
      if (after && operand_after(after->text)) return std::nullopt;
    }
    return Match{std::nullopt, col->column.name};
  }
  return std::nullopt;
}

bool clickable(VisType t) {
  return t == VisType::Choropleth || t == VisType::Bar || t == VisType::Line ||
         t == VisType::Scatter;
}

std::vector<std::string> node_options(const SpsTemplate& t, NodeId id,
                                      const DatasetCatalog& catalog) {
  const ChoiceNode& n = t.node(id);
  std::vector<std::string> out;
  if (n.kind == ChoiceKind::Opt) return {"off", "on"};
  if (const auto* f = n.fragments()) {
    for (const auto& choice : f->choices)
      out.push_back(detail::normalize_whitespace(print_fragment(t, choice)));
  } else if (n.domain_ref()) {
    const auto col = domain_column(t, id, catalog);
    for (const auto& v : catalog.attribute_domain(col.table, col.column.name))
      out.push_back(value_label(v));
  }
  return out;
}

// Covered nodes of an interaction, as (template, node) pairs.
std::vector<std::pair<std::size_t, NodeId>> covered(const InteractionSpec& i) {
  std::vector<std::pair<std::size_t, NodeId>> out;
  if (i.opt_node) out.emplace_back(i.template_id, *i.opt_node);
  out.emplace_back(i.template_id, i.any_node);
  return out;
}

struct Ranked {
  std::int64_t cost = 0;
  std::size_t widgets = 0;
  Binding binding;

  bool better_than(const Ranked& o) const {
    if (cost != o.cost) return cost < o.cost;
    if (widgets != o.widgets) return widgets < o.widgets;
    return binding < o.binding;
  }
};

class Search {
 public:
  Search(const BindingProblem& p, const Screen& screen, const CostParams& params)
      : p_(p), screen_(screen), params_(params), binding_(p.nodes.size(), 0) {
    for (std::size_t i = 0; i < p.nodes.size(); ++i)
      index_[{p.nodes[i].template_id, p.nodes[i].node_id}] = i;
  }

  Binding exhaustive() {
    std::vector<int> owner(p_.nodes.size(), -1);
    interactions(0, owner);
    return best_->binding;
  }

  Binding greedy() {
    for (std::size_t i = 0; i < p_.nodes.size(); ++i) binding_[i] = cheapest(p_.nodes[i]);
    Ranked current = rank(binding_);
    for (std::size_t k = 0; k < p_.interactions.size(); ++k) {
      Binding trial = current.binding;
      bool free = true;
      for (const auto& key : covered(p_.interactions[k])) {
        const std::size_t ni = index_.at(key);
        const auto& node = p_.nodes[ni];
        if (trial[ni] >= node.candidates.size()) free = false;
        const auto pos = std::find(node.interactions.begin(), node.interactions.end(), k);
        trial[ni] = node.candidates.size() + static_cast<std::size_t>(pos - node.interactions.begin());
      }
      if (!free) continue;
      Ranked r = rank(trial);
      if (r.better_than(current)) current = std::move(r);
    }
    for (std::size_t ni = 0; ni < p_.nodes.size(); ++ni) {
      if (current.binding[ni] >= p_.nodes[ni].candidates.size()) continue;
      for (std::size_t c = 0; c < p_.nodes[ni].candidates.size(); ++c) {
        Binding trial = current.binding;
        trial[ni] = c;
        Ranked r = rank(trial);
        if (r.better_than(current)) current = std::move(r);
      }
    }
    return current.binding;
  }

 private:
  std::size_t cheapest(const BindingProblem::Node& n) const {
    std::size_t best = 0;
    for (std::size_t c = 1; c < n.candidates.size(); ++c)
      if (params_.widget(n.candidates[c]) < params_.widget(n.candidates[best])) best = c;
    return best;
  }

  Ranked rank(const Binding& b) const {
    const InterfaceSpec spec = assemble_interface(p_, b, screen_, params_);
    return Ranked{interface_cost_micros(spec, params_), spec.widgets.size(), b};
  }

  void interactions(std::size_t k, std::vector<int>& owner) {
    if (k == p_.interactions.size()) {
      widgets(0, owner);
      return;
    }
    interactions(k + 1, owner);
    const auto keys = covered(p_.interactions[k]);
    for (const auto& key : keys)
      if (owner[index_.at(key)] != -1) return;
    for (const auto& key : keys) owner[index_.at(key)] = static_cast<int>(k);
    interactions(k + 1, owner);
    for (const auto& key : keys) owner[index_.at(key)] = -1;
  }

  void widgets(std::size_t ni, const std::vector<int>& owner) {
    if (ni == p_.nodes.size()) {
      Ranked r = rank(binding_);
      if (!best_ || r.better_than(*best_)) best_ = std::move(r);
      return;
    }
    const auto& node = p_.nodes[ni];
    if (owner[ni] != -1) {
      const auto pos = std::find(node.interactions.begin(), node.interactions.end(),
                                 static_cast<std::size_t>(owner[ni]));
      binding_[ni] = node.candidates.size() + static_cast<std::size_t>(pos - node.interactions.begin());
      widgets(ni + 1, owner);
      return;
    }
    for (std::size_t c = 0; c < node.candidates.size(); ++c) {
      binding_[ni] = c;
      widgets(ni + 1, owner);
    }
  }

  const BindingProblem& p_;
  Screen screen_;
  const CostParams& params_;
  std::map<std::pair<std::size_t, NodeId>, std::size_t> index_;
  Binding binding_;
  std::optional<Ranked> best_;
};

std::uint64_t count_alternatives(const BindingProblem& p, std::size_t k,
                                 std::vector<bool>& taken,
                                 const std::map<std::pair<std::size_t, NodeId>, std::size_t>& index) {
  if (k == p.interactions.size()) {
    std::uint64_t n = 1;
    for (std::size_t i = 0; i < p.nodes.size(); ++i)
      if (!taken[i]) n = sat_mul(n, p.nodes[i].candidates.size());
    return n;
  }
  std::uint64_t total = count_alternatives(p, k + 1, taken, index);
  const auto keys = covered(p.interactions[k]);
  for (const auto& key : keys)
    if (taken[index.at(key)]) return total;
  for (const auto& key : keys) taken[index.at(key)] = true;
  total = sat_add(total, count_alternatives(p, k + 1, taken, index));
  for (const auto& key : keys) taken[index.at(key)] = false;
  return total;
}

}  // namespace

const char* to_string(VisType t) {
  switch (t) {
    case VisType::Choropleth: return "choropleth";
    case VisType::Line: return "line";
    case VisType::Bar: return "bar";
    case VisType::Scatter: return "scatter";
    case VisType::Table: return "table";
    case VisType::SingleValue: return "single_value";
  }
  return "?";
}

const char* to_string(WidgetType t) { return kWidgetNames[static_cast<int>(t)]; }

const char* to_string(Deselect d) { return d == Deselect::OptOff ? "opt_off" : "restore_default"; }

std::optional<WidgetType> widget_type_from_string(std::string_view s) {
  for (int i = 0; i < 6; ++i)
    if (s == kWidgetNames[i]) return static_cast<WidgetType>(i);
  return std::nullopt;
}

CostParams CostParams::from_json_text(std::string_view text) {
  CostParams p;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("cost config: ") + e.what());
  }
  if (!j.is_object()) throw Error("cost config must be a JSON object");
  auto number = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw Error("cost " + key + " must be a number");
    return to_micros(v.get<double>(), key);
  };
  if (j.contains("widget_costs")) {
    const auto& w = j["widget_costs"];
    if (!w.is_object()) throw Error("widget_costs must be an object");
    for (const auto& [key, value] : w.items()) {
      const auto type = widget_type_from_string(key);
      if (!type) throw Error("unknown widget type in cost config: " + key);
      p.widget_cost[static_cast<int>(*type)] = number(value, key);
    }
  }
  if (j.contains("interaction_cost")) p.interaction_cost = number(j["interaction_cost"], "interaction_cost");
  if (j.contains("overflow_penalty")) p.overflow_penalty = number(j["overflow_penalty"], "overflow_penalty");
  if (j.contains("widget_space_cost"))
    p.widget_space_cost = number(j["widget_space_cost"], "widget_space_cost");
  return p;
}

CostParams CostParams::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read cost config " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return from_json_text(s.str());
}

ViewSpec choose_visualization(const SpsTemplate& tmpl, const DatasetCatalog& catalog) {
  const ResultTable r = catalog.execute_sql(instantiate(tmpl, default_assignment(tmpl, catalog), catalog));
  ViewSpec v;
  if (r.columns.size() == 2) {
    const SemanticType a = r.columns[0].semantic_type;
    const SemanticType b = r.columns[1].semantic_type;
    if (b == SemanticType::Quantitative) {
      if (a == SemanticType::Geographic) {
        v.vis_type = VisType::Choropleth;
        v.x = encode(r, 0);
        v.color = encode(r, 1);
        v.fallback = VisType::Bar;
        return v;
      }
      if (a == SemanticType::Temporal) {
        v.vis_type = VisType::Line;
        v.x = encode(r, 0);
        v.y = encode(r, 1);
        return v;
      }
      if (a == SemanticType::Categorical && distinct_count(r, 0) <= kMaxDistinctBarKeys) {
        v.vis_type = VisType::Bar;
        v.x = encode(r, 0);
        v.y = encode(r, 1);
        return v;
      }
      if (a == SemanticType::Quantitative) {
        v.vis_type = VisType::Scatter;
        v.x = encode(r, 0);
        v.y = encode(r, 1);
        return v;
      }
    }
  }
  if (r.columns.size() == 1 && r.rows.size() == 1) {
    v.vis_type = VisType::SingleValue;
    v.y = encode(r, 0);
    return v;
  }
  v.vis_type = VisType::Table;
  return v;
}

std::vector<WidgetType> widget_candidates(const SpsTemplate& tmpl, NodeId id,
                                          const DatasetCatalog& catalog) {
  const ChoiceNode& n = tmpl.node(id);
  switch (n.kind) {
    case ChoiceKind::Opt:
      return {WidgetType::Toggle};
    case ChoiceKind::Any:
      if (n.range()) return {WidgetType::Slider};
      if (const auto* f = n.fragments(); f && f->choices.size() <= 4)
        return {WidgetType::ButtonSet, WidgetType::Dropdown};
      return {WidgetType::Dropdown, WidgetType::ButtonSet};
    case ChoiceKind::Subset:
      if (subset_arity(tmpl, id, catalog) <= 6)
        return {WidgetType::CheckboxGroup, WidgetType::Multiselect};
      return {WidgetType::Multiselect};
  }
  return {};
}

std::vector<InteractionSpec> detect_cross_view_bindings(const std::vector<SpsTemplate>& templates,
                                                        const std::vector<ViewSpec>& views,
                                                        const DatasetCatalog& catalog) {
  std::vector<InteractionSpec> out;
  for (const ViewSpec& source : views) {
    if (!clickable(source.vis_type) || !source.x) continue;
    for (std::size_t b = 0; b < templates.size(); ++b) {
      if (b == source.template_id) continue;
      const SpsTemplate& t = templates[b];
      const auto positions = list_choice_nodes(t);
      for (const auto& [node, pos] : positions) {
        if (pos.context != ClauseContext::Predicate) continue;
        const auto m = match_equality(t, node, catalog);
        if (!m || !detail::iequals(m->column, source.x->column)) continue;
        InteractionSpec i;
        i.id = "i" + std::to_string(out.size());
        i.source_view = source.id;
        i.template_id = b;
        i.opt_node = m->opt;
        i.any_node = node.id;
        i.binding_column = source.x->column;
        i.on_deselect = m->opt ? Deselect::OptOff : Deselect::RestoreDefault;
        out.push_back(std::move(i));
      }
    }
  }
  return out;
}

std::vector<InteractionSpec> detect_cross_view_bindings(const std::vector<SpsTemplate>& templates,
                                                        const DatasetCatalog& catalog) {
  return analyze_bindings(templates, catalog).interactions;
}

std::int64_t interface_cost_micros(const InterfaceSpec& spec, const CostParams& params) {
  std::int64_t total = 0;
  for (const WidgetSpec& w : spec.widgets) total += params.widget(w.widget_type) + params.widget_space_cost;
  total += static_cast<std::int64_t>(spec.interactions.size()) * params.interaction_cost;
  total += static_cast<std::int64_t>(spec.layout.overflow.size()) * params.overflow_penalty;
  return total;
}

double interface_cost(const InterfaceSpec& spec, const CostParams& params) {
  return static_cast<double>(interface_cost_micros(spec, params)) / 1e6;
}

BindingProblem analyze_bindings(const std::vector<SpsTemplate>& templates,
                                const DatasetCatalog& catalog) {
  BindingProblem p;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    ViewSpec v = choose_visualization(templates[i], catalog);
    v.id = "v" + std::to_string(i);
    v.template_id = i;
    p.views.push_back(std::move(v));
  }
  p.interactions = detect_cross_view_bindings(templates, p.views, catalog);
  std::map<std::pair<std::size_t, NodeId>, std::size_t> index;
  for (std::size_t ti = 0; ti < templates.size(); ++ti) {
    const SpsTemplate& t = templates[ti];
    for (const ChoiceNode& n : t.nodes) {
      BindingProblem::Node node;
      node.template_id = ti;
      node.node_id = n.id;
      node.kind = n.kind;
      node.candidates = widget_candidates(t, n.id, catalog);
      node.options = node_options(t, n.id, catalog);
      if (const auto* r = n.range()) node.range = NumericBounds{r->lo, r->hi};
      index[{ti, n.id}] = p.nodes.size();
      p.nodes.push_back(std::move(node));
    }
  }
  for (std::size_t k = 0; k < p.interactions.size(); ++k)
    for (const auto& key : covered(p.interactions[k])) p.nodes[index.at(key)].interactions.push_back(k);
  return p;
}

InterfaceSpec assemble_interface(const BindingProblem& problem, const Binding& binding,
                                 const Screen& screen, const CostParams& params) {
  if (screen.width <= 0 || screen.height <= 0) throw Error("screen size must be positive");
  if (binding.size() != problem.nodes.size()) throw Error("binding does not cover every choice node");

  std::vector<std::optional<std::size_t>> bound_by(problem.nodes.size());
  std::set<std::size_t> used;
  for (std::size_t i = 0; i < binding.size(); ++i) {
    const auto& node = problem.nodes[i];
    if (binding[i] < node.candidates.size()) continue;
    const std::size_t local = binding[i] - node.candidates.size();
    if (local >= node.interactions.size()) throw Error("binding choice out of range");
    bound_by[i] = node.interactions[local];
    used.insert(node.interactions[local]);
  }
  for (std::size_t k : used) {
    for (std::size_t i = 0; i < problem.nodes.size(); ++i) {
      const auto& node = problem.nodes[i];
      const bool covers = std::find(node.interactions.begin(), node.interactions.end(), k) !=
                          node.interactions.end();
      if (covers && bound_by[i] != k) throw Error("interaction binds only part of its nodes");
    }
  }

  InterfaceSpec spec;
  spec.views = problem.views;
  for (std::size_t k : used) {
    InteractionSpec interaction = problem.interactions[k];
    interaction.id = "i" + std::to_string(spec.interactions.size());
    spec.interactions.push_back(std::move(interaction));
  }
  for (std::size_t i = 0; i < problem.nodes.size(); ++i) {
    const auto& node = problem.nodes[i];
    if (bound_by[i]) continue;
    WidgetSpec w;
    w.id = "w" + std::to_string(spec.widgets.size());
    w.widget_type = node.candidates[binding[i]];
    w.template_id = node.template_id;
    w.node_id = node.node_id;
    w.node_kind = node.kind;
    w.options = node.options;
    w.range = node.range;
    w.anchor_view = problem.views.at(node.template_id).id;
    spec.widgets.push_back(std::move(w));
  }

  const auto n_views = static_cast<std::int64_t>(spec.views.size());
  const auto n_widgets = static_cast<std::int64_t>(spec.widgets.size());
  std::int64_t view_h = 0;
  if (n_views > 0)
    view_h = std::clamp((screen.height - kWidgetRowHeight * n_widgets) / n_views, kMinViewHeight,
                        kMaxViewHeight);
  spec.layout.screen = screen;
  std::int64_t y = 0;
  auto place = [&](const std::string& id, std::int64_t h) {
    spec.layout.cells.push_back(LayoutCell{id, 0, y, screen.width, h});
    if (y + h > screen.height) spec.layout.overflow.push_back(id);
    y += h;
  };
  for (const ViewSpec& v : spec.views) {
    place(v.id, view_h);
    for (const WidgetSpec& w : spec.widgets)
      if (w.template_id == v.template_id) place(w.id, kWidgetRowHeight);
  }
  spec.total_cost = static_cast<double>(interface_cost_micros(spec, params)) / 1e6;
  return spec;
}

std::uint64_t binding_alternatives(const BindingProblem& problem) {
  std::map<std::pair<std::size_t, NodeId>, std::size_t> index;
  for (std::size_t i = 0; i < problem.nodes.size(); ++i)
    index[{problem.nodes[i].template_id, problem.nodes[i].node_id}] = i;
  if (problem.interactions.size() > 20) return kSaturated;
  std::vector<bool> taken(problem.nodes.size(), false);
  return count_alternatives(problem, 0, taken, index);
}

InterfaceSpec generate_interface(const std::vector<SpsTemplate>& templates,
                                 const DatasetCatalog& catalog, const Screen& screen,
                                 const CostParams& params) {
  if (screen.width <= 0 || screen.height <= 0) throw Error("screen size must be positive");
  const BindingProblem problem = analyze_bindings(templates, catalog);
  Search search(problem, screen, params);
  const Binding best = binding_alternatives(problem) <= kExhaustiveSearchLimit ? search.exhaustive()
                                                                               : search.greedy();
  return assemble_interface(problem, best, screen, params);
}

Delta click_delta(const InteractionSpec& interaction, const Value& clicked) {
  Delta d;
  if (interaction.opt_node) d[*interaction.opt_node] = sel::On{};
  d[interaction.any_node] = sel::Value{clicked};
  return d;
}

Delta deselect_delta(const InteractionSpec& interaction, const SpsTemplate& tmpl,
                     const DatasetCatalog& catalog) {
  Delta d;
  if (interaction.opt_node) d[*interaction.opt_node] = sel::Off{};
  else d[interaction.any_node] = default_selection(tmpl, interaction.any_node, catalog);
  return d;
}

}  // namespace choicesql
