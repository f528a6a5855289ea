#include "choicesql/grammar.hpp"

#include <charconv>
#include <regex>
#include <string>

#include "text_util.hpp"

namespace choicesql {

const char* to_string(ChoiceKind kind) {
  switch (kind) {
    case ChoiceKind::Any: return "Any";
    case ChoiceKind::Subset: return "Subset";
    case ChoiceKind::Opt: return "Opt";
  }
  return "?";
}

const char* to_string(ClauseContext context) {
  switch (context) {
    case ClauseContext::Projection: return "Projection";
    case ClauseContext::Predicate: return "Predicate";
    case ClauseContext::GroupBy: return "GroupBy";
    case ClauseContext::OrderBy: return "OrderBy";
    case ClauseContext::Limit: return "Limit";
    case ClauseContext::Other: return "Other";
  }
  return "?";
}

namespace {

using detail::is_ident_char;

enum class Keyword { None, Any, Subset, SubsetMissingSep, Opt };

Keyword keyword_at(std::string_view src, std::size_t pos) {
  if (pos > 0 && is_ident_char(src[pos - 1])) return Keyword::None;
  const std::string_view rest = src.substr(pos);
  if (rest.starts_with("ANY{")) return Keyword::Any;
  if (rest.starts_with("OPT{")) return Keyword::Opt;
  if (rest.starts_with("SUBSET[")) return Keyword::Subset;
  if (rest.starts_with("SUBSET{")) return Keyword::SubsetMissingSep;
  return Keyword::None;
}

bool is_escape(std::string_view src, std::size_t pos) {
  return src[pos] == '\\' && pos + 1 < src.size() &&
         (src[pos + 1] == '{' || src[pos + 1] == '}' || src[pos + 1] == '&');
}

bool parse_number(std::string_view text, double& out) {
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

bool is_blank(const Fragment& f) {
  for (const Segment& s : f) {
    if (std::holds_alternative<NodeRef>(s)) return false;
    if (!detail::trim(std::get<Literal>(s).text).empty()) return false;
  }
  return true;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) { out_.source = std::string(src); }

  SpsTemplate run() {
    out_.root = parse_fragment(std::nullopt, std::nullopt, 0, /*in_body=*/false,
                               /*split_commas=*/false);
    return std::move(out_);
  }

 private:
  // Reads literal text and nested nodes until end of input (root) or until a
  // top-level `,` / `}` inside a choice body. The terminator is not consumed.
  Fragment parse_fragment(std::optional<NodeId> parent, std::optional<std::size_t> branch,
                          int depth, bool in_body, bool split_commas) {
    Fragment segments;
    std::vector<std::pair<char, std::size_t>> open;  // expected closer, offset
    std::size_t lit_begin = pos_;

    auto flush = [&](std::size_t end) {
      if (end > lit_begin) {
        segments.emplace_back(
            Literal{std::string(src_.substr(lit_begin, end - lit_begin)), {lit_begin, end}});
      }
    };

    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (is_escape(src_, pos_)) {
        pos_ += 2;
        continue;
      }
      if (c == '\'' || c == '"') {
        const std::size_t end = detail::skip_quoted(src_, pos_);
        if (end == std::string_view::npos)
          throw SyntaxError(pos_, std::string("closing ") + c);
        pos_ = end;
        continue;
      }
      if (const Keyword kw = keyword_at(src_, pos_); kw != Keyword::None) {
        flush(pos_);
        const NodeId id = parse_node(kw, parent, branch, depth);
        segments.emplace_back(NodeRef{id});
        lit_begin = pos_;
        continue;
      }
      if (c == '(' || c == '[' || c == '{') {
        open.emplace_back(c == '(' ? ')' : c == '[' ? ']' : '}', pos_);
        ++pos_;
        continue;
      }
      if (c == ')' || c == ']' || c == '}') {
        if (open.empty()) {
          if (in_body && c == '}') break;
          throw SyntaxError(pos_, "balanced brackets (unexpected '" + std::string(1, c) + "')");
        }
        if (open.back().first != c)
          throw SyntaxError(pos_, std::string("'") + open.back().first + "'");
        open.pop_back();
        ++pos_;
        continue;
      }
      if (c == ',' && split_commas && open.empty()) break;
      ++pos_;
    }
    if (!open.empty())
      throw SyntaxError(open.back().second, std::string("matching '") + open.back().first + "'");
    if (in_body && pos_ >= src_.size()) throw SyntaxError(pos_, "'}' closing choice body");
    flush(pos_);
    return segments;
  }

  NodeId parse_node(Keyword kw, std::optional<NodeId> parent, std::optional<std::size_t> branch,
                    int depth) {
    const std::size_t start = pos_;
    ChoiceNode node;
    node.id = out_.nodes.size();
    node.parent = parent;
    node.branch = branch;
    node.depth = depth;
    switch (kw) {
      case Keyword::Any:
        node.kind = ChoiceKind::Any;
        pos_ += 4;
        break;
      case Keyword::Opt:
        node.kind = ChoiceKind::Opt;
        pos_ += 4;
        break;
      case Keyword::SubsetMissingSep:
        throw SyntaxError(pos_ + 6, "'[' separator ']' after SUBSET");
      case Keyword::Subset: {
        node.kind = ChoiceKind::Subset;
        pos_ += 7;
        const std::size_t close = src_.find(']', pos_);
        if (close == std::string_view::npos) throw SyntaxError(pos_, "']' closing SUBSET separator");
        if (close == pos_) throw SyntaxError(pos_, "non-empty SUBSET separator");
        node.separator = std::string(src_.substr(pos_, close - pos_));
        pos_ = close + 1;
        if (pos_ >= src_.size() || src_[pos_] != '{')
          throw SyntaxError(pos_, "'{' after SUBSET separator");
        ++pos_;
        break;
      }
      case Keyword::None:
        break;
    }
    const NodeId id = node.id;
    out_.nodes.push_back(std::move(node));

    const std::size_t body_begin = pos_;
    Fragments fragments;
    if (out_.nodes[id].kind == ChoiceKind::Opt) {
      fragments.choices.push_back(parse_fragment(id, 0, depth + 1, true, false));
      if (is_blank(fragments.choices.back())) throw SyntaxError(body_begin, "fragment inside OPT");
    } else {
      for (;;) {
        const std::size_t frag_begin = pos_;
        fragments.choices.push_back(
            parse_fragment(id, fragments.choices.size(), depth + 1, true, true));
        if (is_blank(fragments.choices.back())) throw SyntaxError(frag_begin, "non-empty choice");
        if (src_[pos_] == ',') {
          ++pos_;
          continue;
        }
        break;
      }
    }
    // parse_fragment stops only on `}` or `,` inside a body, so this is `}`.
    const std::size_t body_end = pos_;
    ++pos_;

    ChoiceNode& n = out_.nodes[id];
    n.span = {start, pos_};
    n.body = classify(n.kind, std::move(fragments), src_.substr(body_begin, body_end - body_begin),
                      body_begin);
    return id;
  }

  static ChoiceBody classify(ChoiceKind kind, Fragments fragments, std::string_view raw,
                             std::size_t offset) {
    if (kind == ChoiceKind::Opt || fragments.choices.size() != 1) return fragments;
    const Fragment& only = fragments.choices.front();
    if (only.size() != 1 || !std::holds_alternative<Literal>(only.front())) return fragments;

    const std::string_view body = detail::trim(raw);
    static const std::regex ident(R"(&([A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)?))");
    static const std::regex range(R"((-?\d+(?:\.\d+)?)\s*-\s*(-?\d+(?:\.\d+)?))");
    std::match_results<std::string_view::const_iterator> m;
    if (std::regex_match(body.begin(), body.end(), m, ident))
      return DomainRef{m[1].str(), std::string(raw)};
    if (kind == ChoiceKind::Any && std::regex_match(body.begin(), body.end(), m, range)) {
      NumericRange r;
      if (!parse_number({&*m[1].first, static_cast<std::size_t>(m[1].length())}, r.lo) ||
          !parse_number({&*m[2].first, static_cast<std::size_t>(m[2].length())}, r.hi))
        throw SyntaxError(offset, "numeric range bounds");
      if (r.lo > r.hi) throw SyntaxError(offset, "numeric range with lo <= hi");
      r.text = std::string(raw);
      return r;
    }
    return fragments;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  SpsTemplate out_;
};

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void print_node(const SpsTemplate& t, const ChoiceNode& n, std::string& out);

void print_segments(const SpsTemplate& t, const Fragment& f, std::string& out) {
  for (const Segment& s : f) {
    if (const auto* lit = std::get_if<Literal>(&s))
      out += lit->text;
    else
      print_node(t, t.node(std::get<NodeRef>(s).id), out);
  }
}

void print_node(const SpsTemplate& t, const ChoiceNode& n, std::string& out) {
  switch (n.kind) {
    case ChoiceKind::Any: out += "ANY{"; break;
    case ChoiceKind::Opt: out += "OPT{"; break;
    case ChoiceKind::Subset: out += "SUBSET[" + n.separator + "]{"; break;
  }
  if (const auto* f = n.fragments()) {
    for (std::size_t i = 0; i < f->choices.size(); ++i) {
      if (i) out += ',';
      print_segments(t, f->choices[i], out);
    }
  } else if (const auto* r = n.range()) {
    out += r->text.empty() ? format_number(r->lo) + "-" + format_number(r->hi) : r->text;
  } else if (const auto* d = n.domain_ref()) {
    out += d->text.empty() ? "&" + d->attribute : d->text;
  }
  out += '}';
}

struct KeywordHit {
  std::size_t offset;
  ClauseContext context;
};

void collect_keywords(const SpsTemplate& t, const Fragment& f, std::vector<KeywordHit>& hits) {
  for (const Segment& s : f) {
    if (const auto* ref = std::get_if<NodeRef>(&s)) {
      if (const auto* frags = t.node(ref->id).fragments())
        for (const Fragment& inner : frags->choices) collect_keywords(t, inner, hits);
      continue;
    }
    const Literal& lit = std::get<Literal>(s);
    const std::string_view text = lit.text;
    for (std::size_t i = 0; i < text.size();) {
      const char c = text[i];
      if (c == '\'' || c == '"') {
        const std::size_t end = detail::skip_quoted(text, i);
        i = end == std::string_view::npos ? text.size() : end;
        continue;
      }
      if (!is_ident_char(c) || (i > 0 && is_ident_char(text[i - 1]))) {
        ++i;
        continue;
      }
      const std::string_view word = detail::word_at(text, i);
      const std::string lower = detail::to_lower(word);
      std::optional<ClauseContext> ctx;
      if (lower == "select") ctx = ClauseContext::Projection;
      else if (lower == "where" || lower == "having" || lower == "on") ctx = ClauseContext::Predicate;
      else if (lower == "from" || lower == "join") ctx = ClauseContext::Other;
      else if (lower == "limit") ctx = ClauseContext::Limit;
      else if (lower == "group" || lower == "order") {
        std::size_t j = i + word.size();
        while (j < text.size() && detail::is_space(text[j])) ++j;
        if (detail::iequals(detail::word_at(text, j), "by"))
          ctx = lower == "group" ? ClauseContext::GroupBy : ClauseContext::OrderBy;
      }
      if (ctx) hits.push_back({lit.span.begin + i, *ctx});
      i += word.size();
    }
  }
}

}  // namespace

SpsTemplate parse_sps(std::string_view text) {
  if (text.empty()) throw SyntaxError(0, "non-empty SPS text");
  return Parser(text).run();
}

std::string print_fragment(const SpsTemplate& tmpl, const Fragment& fragment) {
  std::string out;
  print_segments(tmpl, fragment, out);
  return out;
}

std::string print_sps(const SpsTemplate& tmpl) { return print_fragment(tmpl, tmpl.root); }

std::vector<std::pair<ChoiceNode, NodePosition>> list_choice_nodes(const SpsTemplate& tmpl) {
  std::vector<KeywordHit> hits;
  collect_keywords(tmpl, tmpl.root, hits);
  std::vector<std::pair<ChoiceNode, NodePosition>> out;
  out.reserve(tmpl.nodes.size());
  for (const ChoiceNode& n : tmpl.nodes) {
    NodePosition pos{n.id, ClauseContext::Other};
    std::size_t best = 0;
    bool found = false;
    for (const KeywordHit& h : hits) {
      if (h.offset < n.span.begin && (!found || h.offset > best)) {
        best = h.offset;
        pos.context = h.context;
        found = true;
      }
    }
    out.emplace_back(n, pos);
  }
  return out;
}

std::string unescape_literal(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (is_escape(raw, i)) ++i;
    out.push_back(raw[i]);
  }
  return out;
}

bool is_descendant(const SpsTemplate& tmpl, NodeId node, NodeId ancestor) {
  std::optional<NodeId> cur = node;
  while (cur) {
    if (*cur == ancestor) return true;
    cur = tmpl.node(*cur).parent;
  }
  return false;
}

}  // namespace choicesql
