#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "choicesql/catalog.hpp"
#include "choicesql/grammar.hpp"
#include "choicesql/instantiate.hpp"

namespace choicesql {

enum class VisType { Choropleth, Line, Bar, Scatter, Table, SingleValue };
enum class WidgetType { ButtonSet, Dropdown, Toggle, CheckboxGroup, Multiselect, Slider };
enum class Deselect { OptOff, RestoreDefault };

const char* to_string(VisType t);
const char* to_string(WidgetType t);
const char* to_string(Deselect d);
std::optional<WidgetType> widget_type_from_string(std::string_view s);

struct Encoding {
  std::string column;
  std::size_t index = 0;  // position in the view's result columns
  SemanticType semantic_type = SemanticType::Categorical;
  bool operator==(const Encoding&) const = default;
};

struct ViewSpec {
  std::string id;
  std::size_t template_id = 0;
  VisType vis_type = VisType::Table;
  std::optional<Encoding> x;
  std::optional<Encoding> y;
  std::optional<Encoding> color;
  /// Rendering to use when region shapes are missing (choropleth only).
  std::optional<VisType> fallback;
  bool operator==(const ViewSpec&) const = default;
};

struct NumericBounds {
  double lo = 0;
  double hi = 0;
  bool operator==(const NumericBounds&) const = default;
};

struct WidgetSpec {
  std::string id;
  WidgetType widget_type = WidgetType::Toggle;
  std::size_t template_id = 0;
  NodeId node_id = 0;
  ChoiceKind node_kind = ChoiceKind::Any;
  std::vector<std::string> options;  // labels in selection order
  std::optional<NumericBounds> range;  // sliders
  std::string anchor_view;
  bool operator==(const WidgetSpec&) const = default;
};

/// A click on a mark of `source_view` sets `any_node` to the clicked key and
/// switches `opt_node` On.
struct InteractionSpec {
  std::string id;
  std::string source_view;
  std::string event = "click";
  std::size_t template_id = 0;
  std::optional<NodeId> opt_node;
  NodeId any_node = 0;
  std::string binding_column;
  Deselect on_deselect = Deselect::RestoreDefault;
  bool operator==(const InteractionSpec&) const = default;
};

struct LayoutCell {
  std::string id;
  std::int64_t x = 0, y = 0, w = 0, h = 0;
  bool operator==(const LayoutCell&) const = default;
};

struct Screen {
  std::int64_t width = 1280;
  std::int64_t height = 800;
  bool operator==(const Screen&) const = default;
};

struct LayoutGrid {
  Screen screen;
  std::vector<LayoutCell> cells;
  std::vector<std::string> overflow;  // ids of cells extending past the screen
  bool operator==(const LayoutGrid&) const = default;
};

struct InterfaceSpec {
  std::vector<ViewSpec> views;
  std::vector<WidgetSpec> widgets;
  std::vector<InteractionSpec> interactions;
  LayoutGrid layout;
  double total_cost = 0;
  bool operator==(const InterfaceSpec&) const = default;
};

/// Costs are kept as integer micro-units so sums are exact.
struct CostParams {
  std::int64_t widget_cost[6] = {1'000'000, 2'000'000, 1'000'000, 1'500'000, 2'500'000, 1'500'000};
  std::int64_t interaction_cost = 500'000;
  std::int64_t overflow_penalty = 10'000'000;
  std::int64_t widget_space_cost = 200'000;

  std::int64_t widget(WidgetType t) const { return widget_cost[static_cast<int>(t)]; }

  /// JSON with `widget_costs`, `interaction_cost`, `overflow_penalty` and
  /// `widget_space_cost`. Missing keys keep their defaults.
  static CostParams from_json_text(std::string_view text);
  static CostParams load(const std::string& path);
};

inline constexpr std::int64_t kWidgetRowHeight = 40;
inline constexpr std::int64_t kMinViewHeight = 120;
inline constexpr std::int64_t kMaxViewHeight = 360;

ViewSpec choose_visualization(const SpsTemplate& tmpl, const DatasetCatalog& catalog);

std::vector<WidgetType> widget_candidates(const SpsTemplate& tmpl, NodeId id,
                                          const DatasetCatalog& catalog);

/// Views must be ordered by template id, one per template.
std::vector<InteractionSpec> detect_cross_view_bindings(const std::vector<SpsTemplate>& templates,
                                                        const std::vector<ViewSpec>& views,
                                                        const DatasetCatalog& catalog);
std::vector<InteractionSpec> detect_cross_view_bindings(const std::vector<SpsTemplate>& templates,
                                                        const DatasetCatalog& catalog);

std::int64_t interface_cost_micros(const InterfaceSpec& spec, const CostParams& params);
double interface_cost(const InterfaceSpec& spec, const CostParams& params);

/// Everything the search needs, computed once per template list.
struct BindingProblem {
  struct Node {
    std::size_t template_id = 0;
    NodeId node_id = 0;
    ChoiceKind kind = ChoiceKind::Any;
    std::vector<WidgetType> candidates;
    std::vector<std::size_t> interactions;  // indices into `interactions` covering this node
    std::vector<std::string> options;
    std::optional<NumericBounds> range;
  };
  std::vector<ViewSpec> views;
  std::vector<Node> nodes;  // by (template_id, node_id)
  std::vector<InteractionSpec> interactions;
};

BindingProblem analyze_bindings(const std::vector<SpsTemplate>& templates,
                                const DatasetCatalog& catalog);

/// One entry per problem node: `c < candidates.size()` picks that widget,
/// otherwise `interactions[c - candidates.size()]` binds it. An interaction
/// must bind every node it covers.
using Binding = std::vector<std::size_t>;

/// Builds the spec for a binding, including layout and total cost. Throws
/// Error when the binding is inconsistent.
InterfaceSpec assemble_interface(const BindingProblem& problem, const Binding& binding,
                                 const Screen& screen, const CostParams& params);

inline constexpr std::uint64_t kExhaustiveSearchLimit = 4096;

/// Number of consistent bindings, saturating at UINT64_MAX.
std::uint64_t binding_alternatives(const BindingProblem& problem);

InterfaceSpec generate_interface(const std::vector<SpsTemplate>& templates,
                                 const DatasetCatalog& catalog, const Screen& screen = {},
                                 const CostParams& params = {});

Delta click_delta(const InteractionSpec& interaction, const Value& clicked);
Delta deselect_delta(const InteractionSpec& interaction, const SpsTemplate& tmpl,
                     const DatasetCatalog& catalog);

}  // namespace choicesql
