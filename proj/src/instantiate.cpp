#include "choicesql/instantiate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "text_util.hpp"

namespace choicesql {

namespace {

constexpr char kRemoved = '\x01';

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

bool same_value(const Value& a, const Value& b) {
  if (a == b) return true;
  if (std::holds_alternative<std::monostate>(a) || std::holds_alternative<std::monostate>(b))
    return false;
  return value_label(a) == value_label(b);
}

std::vector<Value> domain_of(const SpsTemplate& t, NodeId id, const DatasetCatalog& catalog) {
  const auto col = domain_column(t, id, catalog);
  return catalog.attribute_domain(col.table, col.column.name);
}

std::size_t subset_count(std::size_t k) {
  if (k >= std::numeric_limits<std::size_t>::digits) return std::numeric_limits<std::size_t>::max();
  return (std::size_t{1} << k) - 1;
}

std::vector<std::size_t> mask_indices(std::size_t mask) {
  std::vector<std::size_t> out;
  for (std::size_t bit = 0; mask; ++bit, mask >>= 1)
    if (mask & 1) out.push_back(bit);
  return out;
}

// Local options of one node with its domain fetched once.
struct NodeChoices {
  const ChoiceNode* node = nullptr;
  std::vector<Value> domain;
  std::size_t count = 0;

  NodeChoices(const SpsTemplate& t, NodeId id, const DatasetCatalog& catalog) : node(&t.node(id)) {
    if (node->domain_ref()) domain = domain_of(t, id, catalog);
    switch (node->kind) {
      case ChoiceKind::Opt:
        count = 2;
        break;
      case ChoiceKind::Any:
        if (const auto* f = node->fragments()) count = f->choices.size();
        else if (const auto* r = node->range()) count = r->lo == r->hi ? 1 : 3;
        else count = domain.size();
        break;
      case ChoiceKind::Subset:
        count = subset_count(node->fragments() ? node->fragments()->choices.size() : domain.size());
        break;
    }
  }

  Selection at(std::size_t i) const {
    switch (node->kind) {
      case ChoiceKind::Opt:
        return i == 0 ? Selection{sel::Off{}} : Selection{sel::On{}};
      case ChoiceKind::Any:
        if (node->fragments()) return sel::Index{i};
        if (const auto* r = node->range()) {
          const double v = i == 0 ? r->lo : i == 1 && count == 3 ? (r->lo + r->hi) / 2 : r->hi;
          return sel::Number{v};
        }
        return sel::Value{domain.at(i)};
      case ChoiceKind::Subset: {
        const auto idx = mask_indices(i + 1);
        if (node->fragments()) return sel::IndexSet{idx};
        sel::ValueSet vs;
        for (std::size_t j : idx) vs.values.push_back(domain.at(j));
        return vs;
      }
    }
    return sel::Off{};
  }
};

class Renderer {
 public:
  Renderer(const SpsTemplate& t, const ChoiceAssignment& a, const DatasetCatalog& c)
      : t_(t), a_(a), catalog_(c) {}

  std::string fragment(const Fragment& f) {
    std::string out;
    for (const Segment& s : f) {
      if (const auto* lit = std::get_if<Literal>(&s))
        out += unescape_literal(lit->text);
      else
        out += node(std::get<NodeRef>(s).id);
    }
    return out;
  }

 private:
  std::string trimmed(const Fragment& f) { return std::string(detail::trim(fragment(f))); }

  std::string node(NodeId id) {
    const Selection* s = a_.find(id);
    if (!s) throw IncompleteAssignment(id, "no selection for reachable node " + std::to_string(id));
    check_selection(t_, id, *s, catalog_);
    const ChoiceNode& n = t_.node(id);
    if (std::holds_alternative<sel::Off>(*s)) return std::string(1, kRemoved);
    if (std::holds_alternative<sel::On>(*s)) return trimmed(n.fragments()->choices.front());
    if (const auto* i = std::get_if<sel::Index>(s)) return trimmed(n.fragments()->choices[i->index]);
    if (const auto* num = std::get_if<sel::Number>(s)) return format_number(num->value);
    if (const auto* v = std::get_if<sel::Value>(s)) return quoted(id, v->value);
    std::string out;
    if (const auto* is = std::get_if<sel::IndexSet>(s)) {
      for (std::size_t k = 0; k < is->indices.size(); ++k) {
        if (k) out += n.separator;
        out += trimmed(n.fragments()->choices[is->indices[k]]);
      }
    } else if (const auto* vs = std::get_if<sel::ValueSet>(s)) {
      for (std::size_t k = 0; k < vs->values.size(); ++k) {
        if (k) out += n.separator;
        out += quoted(id, vs->values[k]);
      }
    }
    return out;
  }

  std::string quoted(NodeId id, const Value& v) {
    return quote_value(v, domain_column(t_, id, catalog_).column.storage_type);
  }

  const SpsTemplate& t_;
  const ChoiceAssignment& a_;
  const DatasetCatalog& catalog_;
};

std::size_t prev_nonspace(const std::string& s, std::size_t p) {
  while (p > 0) {
    --p;
    if (!detail::is_space(s[p])) return p;
  }
  return std::string::npos;
}

std::size_t next_nonspace(const std::string& s, std::size_t p) {
  for (++p; p < s.size(); ++p)
    if (!detail::is_space(s[p])) return p;
  return std::string::npos;
}

bool is_connective(std::string_view word) {
  return detail::iequals(word, "and") || detail::iequals(word, "or");
}

// Start of the identifier word ending at `last`, or npos.
std::size_t word_start(const std::string& s, std::size_t last) {
  if (last == std::string::npos || !detail::is_ident_char(s[last])) return std::string::npos;
  std::size_t b = last;
  while (b > 0 && detail::is_ident_char(s[b - 1])) --b;
  return b;
}

void prune_removed(std::string& s) {
  for (std::size_t p = s.find(kRemoved); p != std::string::npos; p = s.find(kRemoved)) {
    // A removed predicate alone inside grouping parentheses removes them too.
    for (;;) {
      const std::size_t l = prev_nonspace(s, p);
      const std::size_t r = next_nonspace(s, p);
      if (l == std::string::npos || r == std::string::npos || s[l] != '(' || s[r] != ')') break;
      if (l > 0 && detail::is_ident_char(s[l - 1])) break;  // function call
      s.replace(l, r - l + 1, std::string(1, kRemoved));
      p = l;
    }
    const std::size_t l = prev_nonspace(s, p);
    const std::size_t r = next_nonspace(s, p);
    const std::size_t lw = word_start(s, l);
    if (lw != std::string::npos && is_connective(std::string_view(s).substr(lw, l - lw + 1))) {
      s.erase(lw, p - lw + 1);
      continue;
    }
    if (r != std::string::npos && detail::is_ident_char(s[r]) &&
        is_connective(detail::word_at(s, r))) {
      s.erase(p, r + detail::word_at(s, r).size() - p);
      continue;
    }
    if (l != std::string::npos && s[l] == ',') {
      s.erase(l, p - l + 1);
      continue;
    }
    if (r != std::string::npos && s[r] == ',') {
      s.erase(p, r - p + 1);
      continue;
    }
    s.erase(p, 1);
  }

  // Drop WHERE / HAVING keywords left without a condition.
  static constexpr std::string_view followers[] = {"group", "order", "limit", "having", "union",
                                                   "intersect", "except", "window"};
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const char c = s[i];
      if (c == '\'' || c == '"') {
        const std::size_t end = detail::skip_quoted(s, i);
        if (end == std::string::npos) break;
        i = end - 1;
        continue;
      }
      if (!detail::is_ident_char(c) || (i > 0 && detail::is_ident_char(s[i - 1]))) continue;
      const std::string_view w = detail::word_at(s, i);
      if (detail::iequals(w, "where") || detail::iequals(w, "having")) {
        const std::size_t r = next_nonspace(s, i + w.size() - 1);
        bool empty = r == std::string::npos || s[r] == ')' || s[r] == ';';
        if (!empty && detail::is_ident_char(s[r])) {
          const std::string_view next = detail::word_at(s, r);
          for (std::string_view f : followers) empty = empty || detail::iequals(next, f);
        }
        if (empty) {
          s.erase(i, w.size());
          changed = true;
          break;
        }
      }
      i += w.size() - 1;
    }
  }
}

bool ascending_unique(const std::vector<std::size_t>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] <= v[i - 1]) return false;
  return true;
}

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b, bool& sat) {
  std::uint64_t r;
  if (__builtin_add_overflow(a, b, &r)) {
    sat = true;
    return std::numeric_limits<std::uint64_t>::max();
  }
  return r;
}

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b, bool& sat) {
  std::uint64_t r;
  if (__builtin_mul_overflow(a, b, &r)) {
    sat = true;
    return std::numeric_limits<std::uint64_t>::max();
  }
  return r;
}

struct Counter {
  const SpsTemplate& t;
  const DatasetCatalog& catalog;
  QuerySpaceSize size;

  std::uint64_t fragment(const Fragment& f) {
    std::uint64_t c = 1;
    for (const Segment& s : f)
      if (const auto* ref = std::get_if<NodeRef>(&s)) c = sat_mul(c, node(ref->id), size.saturated);
    return c;
  }

  std::uint64_t node(NodeId id) {
    const ChoiceNode& n = t.node(id);
    if (n.kind == ChoiceKind::Opt) return sat_add(1, fragment(n.fragments()->choices.front()), size.saturated);
    if (n.range()) {
      size.continuous = true;
      return 1;
    }
    if (n.domain_ref()) {
      const std::uint64_t k = domain_of(t, id, catalog).size();
      if (n.kind == ChoiceKind::Any) return k;
      if (k >= 64) {
        size.saturated = true;
        return std::numeric_limits<std::uint64_t>::max();
      }
      return (std::uint64_t{1} << k) - 1;
    }
    const auto& choices = n.fragments()->choices;
    if (n.kind == ChoiceKind::Any) {
      std::uint64_t c = 0;
      for (const Fragment& f : choices) c = sat_add(c, fragment(f), size.saturated);
      return c;
    }
    // Σ over non-empty subsets of Π c_i  =  Π (1 + c_i) − 1
    std::uint64_t prod = 1;
    for (const Fragment& f : choices) prod = sat_mul(prod, sat_add(1, fragment(f), size.saturated), size.saturated);
    return prod - 1;
  }
};

}  // namespace

std::string describe(const Selection& s) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, sel::Index>) return std::to_string(v.index);
        else if constexpr (std::is_same_v<T, sel::Value>) return quote_value(v.value, StorageType::Text);
        else if constexpr (std::is_same_v<T, sel::Number>) return format_number(v.value);
        else if constexpr (std::is_same_v<T, sel::IndexSet>) {
          std::string out = "[";
          for (std::size_t i = 0; i < v.indices.size(); ++i)
            out += (i ? "," : "") + std::to_string(v.indices[i]);
          return out + "]";
        } else if constexpr (std::is_same_v<T, sel::ValueSet>) {
          std::string out = "[";
          for (std::size_t i = 0; i < v.values.size(); ++i)
            out += (i ? "," : "") + quote_value(v.values[i], StorageType::Text);
          return out + "]";
        } else if constexpr (std::is_same_v<T, sel::On>) return "On";
        else return "Off";
      },
      s);
}

const Selection* ChoiceAssignment::find(NodeId id) const {
  const auto it = selections.find(id);
  return it == selections.end() ? nullptr : &it->second;
}

bool ChoiceAssignment::is_on(NodeId id) const {
  const Selection* s = find(id);
  return s && std::holds_alternative<sel::On>(*s);
}

std::string describe(const SpsTemplate& tmpl, const ChoiceAssignment& a) {
  std::string out = "{";
  bool first = true;
  for (const auto& [id, s] : a.selections) {
    if (!first) out += ", ";
    first = false;
    const std::string kind = id < tmpl.size() ? to_string(tmpl.node(id).kind) : "Node";
    out += kind + "#" + std::to_string(id) + "->" + describe(s);
  }
  return out + "}";
}

DatasetCatalog::ColumnRef domain_column(const SpsTemplate& tmpl, NodeId id,
                                        const DatasetCatalog& catalog) {
  const DomainRef* ref = tmpl.node(id).domain_ref();
  if (!ref) throw Error("node " + std::to_string(id) + " has no domain reference");
  auto col = catalog.resolve_column(ref->attribute, tmpl.source);
  if (!col) throw UnknownColumn("unresolved domain reference &" + ref->attribute);
  return *col;
}

std::size_t option_count(const SpsTemplate& tmpl, NodeId id, const DatasetCatalog& catalog) {
  return NodeChoices(tmpl, id, catalog).count;
}

Selection option_at(const SpsTemplate& tmpl, NodeId id, std::size_t i,
                    const DatasetCatalog& catalog) {
  const NodeChoices c(tmpl, id, catalog);
  if (i >= c.count) throw SelectionOutOfRange(id, "option index out of range");
  return c.at(i);
}

bool is_reachable(const SpsTemplate& tmpl, const ChoiceAssignment& a, NodeId id) {
  const ChoiceNode* n = &tmpl.node(id);
  while (n->parent) {
    const ChoiceNode& p = tmpl.node(*n->parent);
    const Selection* s = a.find(p.id);
    if (!s) return false;
    const std::size_t branch = n->branch.value_or(0);
    switch (p.kind) {
      case ChoiceKind::Opt:
        if (!std::holds_alternative<sel::On>(*s)) return false;
        break;
      case ChoiceKind::Any: {
        const auto* i = std::get_if<sel::Index>(s);
        if (!i || i->index != branch) return false;
        break;
      }
      case ChoiceKind::Subset: {
        const auto* is = std::get_if<sel::IndexSet>(s);
        if (!is || std::find(is->indices.begin(), is->indices.end(), branch) == is->indices.end())
          return false;
        break;
      }
    }
    n = &p;
  }
  return true;
}

Selection default_selection(const SpsTemplate& tmpl, NodeId id, const DatasetCatalog& catalog) {
  const ChoiceNode& n = tmpl.node(id);
  if (n.kind == ChoiceKind::Opt) return sel::Off{};
  if (const auto* r = n.range()) return sel::Number{r->lo};
  if (n.domain_ref()) {
    const auto domain = domain_of(tmpl, id, catalog);
    if (domain.empty()) throw EmptyDomain(id, "domain of &" + n.domain_ref()->attribute + " is empty");
    if (n.kind == ChoiceKind::Any) return sel::Value{domain.front()};
    return sel::ValueSet{{domain.front()}};
  }
  if (n.kind == ChoiceKind::Any) return sel::Index{0};
  return sel::IndexSet{{0}};
}

ChoiceAssignment default_assignment(const SpsTemplate& tmpl, const DatasetCatalog& catalog) {
  ChoiceAssignment a;
  for (const ChoiceNode& n : tmpl.nodes)
    if (is_reachable(tmpl, a, n.id)) a.selections[n.id] = default_selection(tmpl, n.id, catalog);
  return a;
}

void check_selection(const SpsTemplate& tmpl, NodeId id, const Selection& s,
                     const DatasetCatalog& catalog) {
  if (id >= tmpl.size()) throw SelectionOutOfRange(id, "no node " + std::to_string(id));
  const ChoiceNode& n = tmpl.node(id);
  auto fail = [&](const std::string& why) {
    throw SelectionOutOfRange(id, to_string(n.kind) + std::string("#") + std::to_string(id) + ": " + why);
  };
  auto in_domain = [&](const Value& v) {
    const auto domain = domain_of(tmpl, id, catalog);
    return std::any_of(domain.begin(), domain.end(), [&](const Value& d) { return same_value(d, v); });
  };
  switch (n.kind) {
    case ChoiceKind::Opt:
      if (!std::holds_alternative<sel::On>(s) && !std::holds_alternative<sel::Off>(s))
        fail("expected On or Off");
      return;
    case ChoiceKind::Any:
      if (const auto* f = n.fragments()) {
        const auto* i = std::get_if<sel::Index>(&s);
        if (!i) fail("expected a choice index");
        if (i->index >= f->choices.size()) fail("index " + std::to_string(i->index) + " out of range");
      } else if (const auto* r = n.range()) {
        const auto* num = std::get_if<sel::Number>(&s);
        if (!num) fail("expected a number");
        if (!std::isfinite(num->value) || num->value < r->lo || num->value > r->hi)
          fail("number outside [" + format_number(r->lo) + ", " + format_number(r->hi) + "]");
      } else {
        const auto* v = std::get_if<sel::Value>(&s);
        if (!v) fail("expected a domain value");
        if (!in_domain(v->value)) fail("value " + value_label(v->value) + " not in domain");
      }
      return;
    case ChoiceKind::Subset:
      if (const auto* f = n.fragments()) {
        const auto* is = std::get_if<sel::IndexSet>(&s);
        if (!is) fail("expected an index set");
        if (is->indices.empty()) fail("empty subset");
        if (!ascending_unique(is->indices)) fail("indices must be ascending and unique");
        if (is->indices.back() >= f->choices.size()) fail("index out of range");
      } else {
        const auto* vs = std::get_if<sel::ValueSet>(&s);
        if (!vs) fail("expected a value set");
        if (vs->values.empty()) fail("empty subset");
        for (std::size_t i = 0; i < vs->values.size(); ++i) {
          if (!in_domain(vs->values[i])) fail("value " + value_label(vs->values[i]) + " not in domain");
          for (std::size_t j = 0; j < i; ++j)
            if (same_value(vs->values[i], vs->values[j])) fail("duplicate value in subset");
        }
      }
      return;
  }
}

std::string instantiate(const SpsTemplate& tmpl, const ChoiceAssignment& a,
                        const DatasetCatalog& catalog) {
  std::string sql = Renderer(tmpl, a, catalog).fragment(tmpl.root);
  prune_removed(sql);
  return detail::normalize_whitespace(catalog.rewrite_today(sql));
}

std::size_t enumerate_assignments(const SpsTemplate& tmpl, const DatasetCatalog& catalog,
                                  std::size_t cap,
                                  const std::function<bool(const ChoiceAssignment&)>& visit) {
  if (cap == 0) return 0;
  std::vector<NodeChoices> choices;
  choices.reserve(tmpl.size());
  for (const ChoiceNode& n : tmpl.nodes) choices.emplace_back(tmpl, n.id, catalog);

  ChoiceAssignment a;
  std::size_t produced = 0;
  bool stop = false;
  std::function<void(NodeId)> dfs = [&](NodeId from) {
    for (NodeId id = from; id < tmpl.size(); ++id) {
      if (!is_reachable(tmpl, a, id)) continue;
      for (std::size_t i = 0; i < choices[id].count && !stop; ++i) {
        a.selections[id] = choices[id].at(i);
        dfs(id + 1);
      }
      a.selections.erase(id);
      return;
    }
    ++produced;
    if (!visit(a) || produced >= cap) stop = true;
  };
  dfs(0);
  return produced;
}

std::vector<ChoiceAssignment> enumerate_assignments(const SpsTemplate& tmpl,
                                                    const DatasetCatalog& catalog,
                                                    std::size_t cap) {
  std::vector<ChoiceAssignment> out;
  enumerate_assignments(tmpl, catalog, cap, [&](const ChoiceAssignment& a) {
    out.push_back(a);
    return true;
  });
  return out;
}

QuerySpaceSize count_concrete_queries(const SpsTemplate& tmpl, const DatasetCatalog& catalog) {
  Counter c{tmpl, catalog, {}};
  c.size.count = c.fragment(tmpl.root);
  return c.size;
}

ChoiceAssignment apply_delta(const ChoiceAssignment& a, const Delta& delta,
                             const SpsTemplate& tmpl, const DatasetCatalog& catalog) {
  for (const auto& [id, s] : delta) check_selection(tmpl, id, s, catalog);
  ChoiceAssignment merged = a;
  for (const auto& [id, s] : delta) merged.selections[id] = s;

  ChoiceAssignment out;
  for (const ChoiceNode& n : tmpl.nodes) {
    if (!is_reachable(tmpl, out, n.id)) continue;
    if (const Selection* s = merged.find(n.id)) {
      check_selection(tmpl, n.id, *s, catalog);
      out.selections[n.id] = *s;
    } else {
      out.selections[n.id] = default_selection(tmpl, n.id, catalog);
    }
  }
  return out;
}

}  // namespace choicesql
