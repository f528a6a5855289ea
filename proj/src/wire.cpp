#include "choicesql/wire.hpp"

#include "text_util.hpp"

namespace choicesql::wire {

namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw WireError(std::string("missing field '") + key + "'");
  return j.at(key);
}

template <typename T>
T get(const Json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw WireError(std::string("field '") + key + "' has the wrong type");
  }
}

VisType vis_from(const std::string& s) {
  for (VisType t : {VisType::Choropleth, VisType::Line, VisType::Bar, VisType::Scatter,
                    VisType::Table, VisType::SingleValue})
    if (s == to_string(t)) return t;
  throw WireError("unknown vis_type " + s);
}

SemanticType semantic_from(const std::string& s) {
  for (SemanticType t : {SemanticType::Categorical, SemanticType::Quantitative,
                         SemanticType::Temporal, SemanticType::Geographic})
    if (s == to_string(t)) return t;
  throw WireError("unknown semantic type " + s);
}

std::string kind_name(ChoiceKind k) { return detail::to_lower(to_string(k)); }

ChoiceKind kind_from(const std::string& s) {
  for (ChoiceKind k : {ChoiceKind::Any, ChoiceKind::Subset, ChoiceKind::Opt})
    if (s == kind_name(k)) return k;
  throw WireError("unknown node kind " + s);
}

Json to_json(const std::optional<Encoding>& e) {
  if (!e) return nullptr;
  Json j;
  j["column"] = e->column;
  j["index"] = e->index;
  j["type"] = to_string(e->semantic_type);
  return j;
}

std::optional<Encoding> encoding_from(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return Encoding{get<std::string>(j, "column"), get<std::size_t>(j, "index"),
                  semantic_from(get<std::string>(j, "type"))};
}

template <typename T>
Json optional_json(const std::optional<T>& v) {
  if (!v) return nullptr;
  return *v;
}

}  // namespace

Json to_json(const Value& v) {
  return std::visit(
      [](const auto& x) -> Json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) return nullptr;
        else return x;
      },
      v);
}

Value value_from_json(const Json& j) {
  if (j.is_null()) return std::monostate{};
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw WireError("a value must be null, a number or a string");
}

Json to_json(const ResultTable& r) {
  Json j;
  Json cols = Json::array();
  for (const auto& c : r.columns) cols.push_back(Json{{"name", c.name}, {"type", to_string(c.semantic_type)}});
  j["columns"] = std::move(cols);
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json out = Json::array();
    for (const auto& v : row) out.push_back(to_json(v));
    rows.push_back(std::move(out));
  }
  j["rows"] = std::move(rows);
  return j;
}

Json to_json(const TableSchema& s) {
  Json j;
  j["name"] = s.name;
  Json cols = Json::array();
  for (const auto& c : s.columns)
    cols.push_back(Json{{"name", c.name},
                        {"storage", to_string(c.storage_type)},
                        {"type", to_string(c.semantic_type)}});
  j["columns"] = std::move(cols);
  j["row_count"] = s.row_count;
  return j;
}

Json to_json(const Selection& s) {
  return std::visit(
      [](const auto& x) -> Json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, sel::Index>) return Json{{"index", x.index}};
        else if constexpr (std::is_same_v<T, sel::Value>) return Json{{"value", to_json(x.value)}};
        else if constexpr (std::is_same_v<T, sel::Number>) return Json{{"number", x.value}};
        else if constexpr (std::is_same_v<T, sel::IndexSet>) return Json{{"indices", x.indices}};
        else if constexpr (std::is_same_v<T, sel::ValueSet>) {
          Json values = Json::array();
          for (const auto& v : x.values) values.push_back(to_json(v));
          return Json{{"values", std::move(values)}};
        } else if constexpr (std::is_same_v<T, sel::On>) return Json{{"on", true}};
        else return Json{{"on", false}};
      },
      s);
}

Selection selection_from_json(const Json& j) {
  if (!j.is_object() || j.size() != 1) throw WireError("a selection is an object with one field");
  if (j.contains("index")) return sel::Index{get<std::size_t>(j, "index")};
  if (j.contains("value")) return sel::Value{value_from_json(j.at("value"))};
  if (j.contains("number")) return sel::Number{get<double>(j, "number")};
  if (j.contains("indices")) return sel::IndexSet{get<std::vector<std::size_t>>(j, "indices")};
  if (j.contains("values")) {
    const Json& values = j.at("values");
    if (!values.is_array()) throw WireError("field 'values' has the wrong type");
    sel::ValueSet vs;
    for (const auto& v : values) vs.values.push_back(value_from_json(v));
    return vs;
  }
  if (j.contains("on")) {
    if (get<bool>(j, "on")) return sel::On{};
    return sel::Off{};
  }
  throw WireError("unknown selection field " + j.begin().key());
}

Json to_json(const ChoiceAssignment& a) {
  Json out = Json::array();
  for (const auto& [id, s] : a.selections) out.push_back(Json{{"node_id", id}, {"selection", to_json(s)}});
  return out;
}

ChoiceAssignment assignment_from_json(const Json& j) {
  if (!j.is_array()) throw WireError("an assignment is an array");
  ChoiceAssignment a;
  for (const auto& e : j) a.selections[get<NodeId>(e, "node_id")] = selection_from_json(field(e, "selection"));
  return a;
}

Json to_json(const Diagnostic& d) {
  Json j;
  j["code"] = to_string(d.code);
  j["message"] = d.message;
  j["node"] = optional_json(d.node);
  j["assignment"] = optional_json(d.assignment);
  return j;
}

Json to_json(const InterfaceSpec& spec) {
  Json j;
  j["spec_version"] = kSpecVersion;
  Json views = Json::array();
  for (const auto& v : spec.views) {
    Json o;
    o["id"] = v.id;
    o["template_id"] = v.template_id;
    o["vis_type"] = to_string(v.vis_type);
    o["x"] = to_json(v.x);
    o["y"] = to_json(v.y);
    o["color"] = to_json(v.color);
    o["fallback"] = v.fallback ? Json(to_string(*v.fallback)) : Json(nullptr);
    views.push_back(std::move(o));
  }
  j["views"] = std::move(views);
  Json widgets = Json::array();
  for (const auto& w : spec.widgets) {
    Json o;
    o["id"] = w.id;
    o["widget_type"] = to_string(w.widget_type);
    o["template_id"] = w.template_id;
    o["node_id"] = w.node_id;
    o["node_kind"] = kind_name(w.node_kind);
    o["options"] = w.options;
    o["range"] = w.range ? Json{{"lo", w.range->lo}, {"hi", w.range->hi}} : Json(nullptr);
    o["anchor_view"] = w.anchor_view;
    widgets.push_back(std::move(o));
  }
  j["widgets"] = std::move(widgets);
  Json interactions = Json::array();
  for (const auto& i : spec.interactions) {
    Json o;
    o["id"] = i.id;
    o["source_view"] = i.source_view;
    o["event"] = i.event;
    o["template_id"] = i.template_id;
    o["opt_node"] = optional_json(i.opt_node);
    o["any_node"] = i.any_node;
    o["binding_column"] = i.binding_column;
    o["on_deselect"] = to_string(i.on_deselect);
    interactions.push_back(std::move(o));
  }
  j["interactions"] = std::move(interactions);
  Json layout;
  layout["screen"] = Json{{"width", spec.layout.screen.width}, {"height", spec.layout.screen.height}};
  Json cells = Json::array();
  for (const auto& c : spec.layout.cells)
    cells.push_back(Json{{"id", c.id}, {"x", c.x}, {"y", c.y}, {"w", c.w}, {"h", c.h}});
  layout["cells"] = std::move(cells);
  layout["overflow"] = spec.layout.overflow;
  j["layout"] = std::move(layout);
  j["total_cost"] = spec.total_cost;
  return j;
}

InterfaceSpec spec_from_json(const Json& j) {
  if (get<int>(j, "spec_version") != kSpecVersion) throw WireError("unsupported spec_version");
  InterfaceSpec spec;
  for (const auto& o : field(j, "views")) {
    ViewSpec v;
    v.id = get<std::string>(o, "id");
    v.template_id = get<std::size_t>(o, "template_id");
    v.vis_type = vis_from(get<std::string>(o, "vis_type"));
    v.x = encoding_from(field(o, "x"));
    v.y = encoding_from(field(o, "y"));
    v.color = encoding_from(field(o, "color"));
    if (!field(o, "fallback").is_null()) v.fallback = vis_from(get<std::string>(o, "fallback"));
    spec.views.push_back(std::move(v));
  }
  for (const auto& o : field(j, "widgets")) {
    WidgetSpec w;
    w.id = get<std::string>(o, "id");
    const auto type = widget_type_from_string(get<std::string>(o, "widget_type"));
    if (!type) throw WireError("unknown widget_type");
    w.widget_type = *type;
    w.template_id = get<std::size_t>(o, "template_id");
    w.node_id = get<NodeId>(o, "node_id");
    w.node_kind = kind_from(get<std::string>(o, "node_kind"));
    w.options = get<std::vector<std::string>>(o, "options");
    if (const Json& r = field(o, "range"); !r.is_null())
      w.range = NumericBounds{get<double>(r, "lo"), get<double>(r, "hi")};
    w.anchor_view = get<std::string>(o, "anchor_view");
    spec.widgets.push_back(std::move(w));
  }
  for (const auto& o : field(j, "interactions")) {
    InteractionSpec i;
    i.id = get<std::string>(o, "id");
    i.source_view = get<std::string>(o, "source_view");
    i.event = get<std::string>(o, "event");
    i.template_id = get<std::size_t>(o, "template_id");
    if (!field(o, "opt_node").is_null()) i.opt_node = get<NodeId>(o, "opt_node");
    i.any_node = get<NodeId>(o, "any_node");
    i.binding_column = get<std::string>(o, "binding_column");
    const auto deselect = get<std::string>(o, "on_deselect");
    if (deselect == to_string(Deselect::OptOff)) i.on_deselect = Deselect::OptOff;
    else if (deselect == to_string(Deselect::RestoreDefault)) i.on_deselect = Deselect::RestoreDefault;
    else throw WireError("unknown on_deselect " + deselect);
    spec.interactions.push_back(std::move(i));
  }
  const Json& layout = field(j, "layout");
  const Json& screen = field(layout, "screen");
  spec.layout.screen = Screen{get<std::int64_t>(screen, "width"), get<std::int64_t>(screen, "height")};
  for (const auto& c : field(layout, "cells"))
    spec.layout.cells.push_back(LayoutCell{get<std::string>(c, "id"), get<std::int64_t>(c, "x"),
                                           get<std::int64_t>(c, "y"), get<std::int64_t>(c, "w"),
                                           get<std::int64_t>(c, "h")});
  spec.layout.overflow = get<std::vector<std::string>>(layout, "overflow");
  spec.total_cost = get<double>(j, "total_cost");
  return spec;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace choicesql::wire
