#pragma once

// SPS: SQL text extended with ANY / SUBSET / OPT choice nodes.
//
//   choice := "ANY{" body "}" | "SUBSET[" sep "]{" body "}" | "OPT{" fragment "}"
//   body   := fragment ("," fragment)* | number "-" number | "&" ident
//
// Keywords are matched case-sensitively and never inside string literals.
// `\{`, `\}` and `\&` escape the corresponding characters in literal text.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "choicesql/errors.hpp"

namespace choicesql {

/// Half-open byte range into the template source.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool contains(const Span& other) const noexcept {
    return begin <= other.begin && other.end <= end;
  }
  bool operator==(const Span&) const = default;
};

struct Literal {
  std::string text;  // raw source text, escapes intact
  Span span;
  bool operator==(const Literal&) const = default;
};

struct NodeRef {
  NodeId id = 0;
  bool operator==(const NodeRef&) const = default;
};

using Segment = std::variant<Literal, NodeRef>;
using Fragment = std::vector<Segment>;

struct Fragments {
  std::vector<Fragment> choices;
  bool operator==(const Fragments&) const = default;
};

struct NumericRange {
  double lo = 0;
  double hi = 0;
  std::string text;  // body as written; empty means print canonically
  bool operator==(const NumericRange&) const = default;
};

struct DomainRef {
  std::string attribute;
  std::string text;  // body as written; empty means `&attribute`
  bool operator==(const DomainRef&) const = default;
};

using ChoiceBody = std::variant<Fragments, NumericRange, DomainRef>;

enum class ChoiceKind { Any, Subset, Opt };

const char* to_string(ChoiceKind kind);

struct ChoiceNode {
  NodeId id = 0;
  ChoiceKind kind = ChoiceKind::Any;
  std::string separator;  // Subset only
  ChoiceBody body;
  Span span;
  int depth = 0;
  std::optional<NodeId> parent;
  /// Index of the parent's fragment that holds this node.
  std::optional<std::size_t> branch;

  bool operator==(const ChoiceNode&) const = default;

  const Fragments* fragments() const { return std::get_if<Fragments>(&body); }
  const NumericRange* range() const { return std::get_if<NumericRange>(&body); }
  const DomainRef* domain_ref() const { return std::get_if<DomainRef>(&body); }
};

enum class SqlKind { SelectQuery };

struct SpsTemplate {
  std::string source;
  Fragment root;
  std::vector<ChoiceNode> nodes;  // indexed by NodeId
  SqlKind sql_kind = SqlKind::SelectQuery;

  bool operator==(const SpsTemplate&) const = default;

  const ChoiceNode& node(NodeId id) const { return nodes.at(id); }
  std::size_t size() const noexcept { return nodes.size(); }
};

enum class ClauseContext { Projection, Predicate, GroupBy, OrderBy, Limit, Other };

const char* to_string(ClauseContext context);

struct NodePosition {
  NodeId node = 0;
  ClauseContext context = ClauseContext::Other;
  bool operator==(const NodePosition&) const = default;
};

SpsTemplate parse_sps(std::string_view text);

std::string print_sps(const SpsTemplate& tmpl);

/// Prints one fragment of a template (its literals and nested nodes).
std::string print_fragment(const SpsTemplate& tmpl, const Fragment& fragment);

std::vector<std::pair<ChoiceNode, NodePosition>> list_choice_nodes(const SpsTemplate& tmpl);

/// Removes `\` from the `\{`, `\}`, `\&` escapes.
std::string unescape_literal(std::string_view raw);

/// True if `node` is `ancestor` or nested somewhere below it.
bool is_descendant(const SpsTemplate& tmpl, NodeId node, NodeId ancestor);

}  // namespace choicesql
