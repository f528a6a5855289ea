#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "choicesql/catalog.hpp"
#include "choicesql/grammar.hpp"

namespace choicesql {

namespace sel {
struct Index {
  std::size_t index = 0;
  bool operator==(const Index&) const = default;
};
struct Value {
  choicesql::Value value;
  bool operator==(const Value&) const = default;
};
struct Number {
  double value = 0;
  bool operator==(const Number&) const = default;
};
struct IndexSet {
  std::vector<std::size_t> indices;  // ascending, non-empty
  bool operator==(const IndexSet&) const = default;
};
struct ValueSet {
  std::vector<choicesql::Value> values;  // in domain order, non-empty
  bool operator==(const ValueSet&) const = default;
};
struct On {
  bool operator==(const On&) const = default;
};
struct Off {
  bool operator==(const Off&) const = default;
};
}  // namespace sel

/// Resolution of one choice node.
///   Any    -> Index | Value (DomainRef) | Number (NumericRange)
///   Subset -> IndexSet | ValueSet (DomainRef)
///   Opt    -> On | Off
using Selection =
    std::variant<sel::Index, sel::Value, sel::Number, sel::IndexSet, sel::ValueSet, sel::On, sel::Off>;

std::string describe(const Selection& s);

struct ChoiceAssignment {
  std::map<NodeId, Selection> selections;

  bool operator==(const ChoiceAssignment&) const = default;
  const Selection* find(NodeId id) const;
  bool is_on(NodeId id) const;
};

/// `{Any#0->1, Opt#2->On}` style rendering for diagnostics.
std::string describe(const SpsTemplate& tmpl, const ChoiceAssignment& a);

using Delta = std::map<NodeId, Selection>;

struct QuerySpaceSize {
  std::uint64_t count = 1;
  bool continuous = false;
  bool saturated = false;  // count exceeded 2^64-1 and was clamped
  bool operator==(const QuerySpaceSize&) const = default;
};

/// Number of local options of a node, independent of its ancestors.
/// NumericRange nodes expose {lo, mid, hi}; Subset nodes every non-empty
/// subset (saturating for very large domains).
std::size_t option_count(const SpsTemplate& tmpl, NodeId id, const DatasetCatalog& catalog);

/// The `i`-th local option, in enumeration order.
Selection option_at(const SpsTemplate& tmpl, NodeId id, std::size_t i,
                    const DatasetCatalog& catalog);

/// True when every ancestor of `id` selects the branch holding it.
bool is_reachable(const SpsTemplate& tmpl, const ChoiceAssignment& a, NodeId id);

/// Default for a single node: first choice, domain minimum, range lo, first
/// subset element, or Off.
Selection default_selection(const SpsTemplate& tmpl, NodeId id, const DatasetCatalog& catalog);

ChoiceAssignment default_assignment(const SpsTemplate& tmpl, const DatasetCatalog& catalog);

/// Concrete SQL for the assignment, whitespace-normalized. Throws
/// IncompleteAssignment or SelectionOutOfRange.
std::string instantiate(const SpsTemplate& tmpl, const ChoiceAssignment& a,
                        const DatasetCatalog& catalog);

/// Checks one selection against its node. Throws SelectionOutOfRange.
void check_selection(const SpsTemplate& tmpl, NodeId id, const Selection& s,
                     const DatasetCatalog& catalog);

/// Visits assignments in lexicographic order over node ids until `visit`
/// returns false or `cap` assignments were produced. Returns the number visited.
std::size_t enumerate_assignments(const SpsTemplate& tmpl, const DatasetCatalog& catalog,
                                  std::size_t cap,
                                  const std::function<bool(const ChoiceAssignment&)>& visit);

std::vector<ChoiceAssignment> enumerate_assignments(const SpsTemplate& tmpl,
                                                    const DatasetCatalog& catalog,
                                                    std::size_t cap);

QuerySpaceSize count_concrete_queries(const SpsTemplate& tmpl, const DatasetCatalog& catalog);

/// Merges `delta` into `a`. Newly reachable nodes take their defaults and
/// unreachable selections are dropped.
ChoiceAssignment apply_delta(const ChoiceAssignment& a, const Delta& delta,
                             const SpsTemplate& tmpl, const DatasetCatalog& catalog);

/// Column a DomainRef node draws from. Throws UnknownColumn when unresolved.
DatasetCatalog::ColumnRef domain_column(const SpsTemplate& tmpl, NodeId id,
                                        const DatasetCatalog& catalog);

}  // namespace choicesql
