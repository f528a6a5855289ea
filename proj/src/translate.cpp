#include "choicesql/translate.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "choicesql/validate.hpp"
#include "text_util.hpp"

namespace choicesql {

namespace {

constexpr const char* kPromptHeader =
    "-- Translate each question into an SPS query. SPS is SQL with choice nodes:\n"
    "-- ANY{a, b} picks one choice, SUBSET[sep]{a, b} picks a non-empty subset joined by sep,\n"
    "-- OPT{x} includes or omits x, ANY{&col} ranges over the values of col.\n\n";
constexpr std::string_view kErrorMarker = "-- error:";

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::string line;
  std::istringstream in{std::string(text)};
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

std::string one_line(std::string_view s) {
  std::string out(detail::trim(s));
  for (char& c : out)
    if (c == '\n' || c == '\r') c = ' ';
  return out;
}

BankEntry parse_record(const std::vector<std::string>& lines, std::size_t index) {
  enum class Field { None, Schema, Nl, Sps };
  BankEntry entry;
  Field field = Field::None;
  std::string schema, nl, sps;
  bool have_schema = false;
  auto flush_pair = [&] {
    if (field == Field::Nl) throw BankParseError(index, "NL without SPS");
    if (field != Field::Sps) return;
    const std::string text(detail::trim(sps));
    if (text.empty()) throw BankParseError(index, "empty SPS");
    try {
      parse_sps(text);
    } catch (const SyntaxError& e) {
      throw BankParseError(index, e.what());
    }
    entry.pairs.push_back(ExamplePair{one_line(nl), text});
  };
  for (const std::string& line : lines) {
    const std::string_view l = line;
    if (starts_with(l, "SCHEMA:")) {
      if (have_schema) throw BankParseError(index, "more than one SCHEMA");
      field = Field::Schema;
      have_schema = true;
      schema = line.substr(7);
    } else if (starts_with(l, "NL:")) {
      if (!have_schema) throw BankParseError(index, "NL before SCHEMA");
      if (field == Field::Nl) throw BankParseError(index, "NL without SPS");
      flush_pair();
      field = Field::Nl;
      nl = line.substr(3);
      sps.clear();
    } else if (starts_with(l, "SPS:")) {
      if (field != Field::Nl) throw BankParseError(index, "SPS without NL");
      field = Field::Sps;
      sps = line.substr(4);
    } else if (field == Field::Schema) {
      schema += "\n" + line;
    } else if (field == Field::Sps) {
      sps += "\n" + line;
    } else if (!detail::trim(l).empty()) {
      throw BankParseError(index, "unexpected line: " + line);
    }
  }
  flush_pair();
  entry.schema_text = std::string(detail::trim(schema));
  if (!have_schema || entry.schema_text.empty()) throw BankParseError(index, "missing SCHEMA");
  if (entry.pairs.empty()) throw BankParseError(index, "record has no NL/SPS pairs");
  return entry;
}

std::string last_nl(const std::string& prompt) {
  std::string found;
  for (const std::string& line : split_lines(prompt))
    if (starts_with(line, "NL: ")) found = line.substr(4);
  return found;
}

std::size_t count_errors(const std::string& prompt) {
  std::size_t n = 0;
  for (const std::string& line : split_lines(prompt))
    if (starts_with(line, kErrorMarker)) ++n;
  return n;
}

std::string describe_all(const std::vector<Diagnostic>& diagnostics) {
  std::string out;
  for (const auto& d : diagnostics) {
    if (!out.empty()) out += "; ";
    out += describe(d);
  }
  return one_line(out);
}

TranslationResult run(const Prompt& prompt, const DatasetCatalog& catalog, LlmBackend& backend,
                      const TranslateOptions& options) {
  TranslationResult result;
  result.nl = prompt.nl;
  std::string text = prompt.text;
  const int attempts = std::max(1, options.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    result.attempts = attempt;
    result.sps_text = extract_sps(backend.complete(text, options.max_tokens, options.temperature));
    result.diagnostics.clear();
    try {
      SpsTemplate t = parse_sps(result.sps_text);
      result.diagnostics = validate_template(t, catalog);
      if (result.diagnostics.empty()) {
        result.tmpl = std::move(t);
        return result;
      }
    } catch (const SyntaxError& e) {
      result.diagnostics.push_back(Diagnostic{DiagnosticCode::SyntaxError, e.what(), std::nullopt, std::nullopt});
    }
    text += " " + one_line(result.sps_text) + "\n" + std::string(kErrorMarker) + " " +
            describe_all(result.diagnostics) + "\nNL: " + prompt.nl + "\nSPS:";
  }
  return result;
}

}  // namespace

std::size_t ExampleBank::pair_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.pairs.size();
  return n;
}

ExampleBank parse_example_bank(std::string_view text) {
  ExampleBank bank;
  std::vector<std::vector<std::string>> records(1);
  for (std::string& line : split_lines(text)) {
    if (detail::trim(line) == "---") records.emplace_back();
    else records.back().push_back(std::move(line));
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    bool blank = true;
    for (const auto& l : records[i])
      if (!detail::trim(l).empty()) blank = false;
    if (blank) {
      // A trailing separator leaves an empty last record.
      if (i + 1 == records.size() && i > 0) continue;
      throw BankParseError(i, "empty record");
    }
    bank.entries.push_back(parse_record(records[i], i));
  }
  return bank;
}

ExampleBank load_example_bank(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read example bank " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return parse_example_bank(s.str());
}

bool covers_all_node_kinds(const ExampleBank& bank) {
  bool seen[3] = {false, false, false};
  for (const auto& e : bank.entries)
    for (const auto& p : e.pairs)
      for (const ChoiceNode& n : parse_sps(p.sps).nodes) seen[static_cast<int>(n.kind)] = true;
  return seen[0] && seen[1] && seen[2];
}

std::vector<Prompt> build_prompt(const ExampleBank& bank, const DatasetCatalog& catalog,
                                 const std::vector<std::string>& nl_queries) {
  if (bank.pair_count() == 0) throw EmptyBank();
  const std::string schema = catalog.schema_text();
  std::string prefix = kPromptHeader;
  for (const auto& e : bank.entries) {
    prefix += "### Schema\n" + e.schema_text + "\n\n";
    for (const auto& p : e.pairs) prefix += "NL: " + p.nl + "\nSPS: " + p.sps + "\n\n";
  }
  prefix += "### Schema\n" + schema + "\n\n";
  std::vector<Prompt> out;
  for (const auto& q : nl_queries) {
    const std::string nl = one_line(q);
    out.push_back(Prompt{nl, prefix + "NL: " + nl + "\nSPS:"});
  }
  return out;
}

MockBackend::MockBackend(std::map<std::string, std::vector<std::string>> responses)
    : responses_(std::move(responses)) {}

MockBackend MockBackend::from_json_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("mock responses: ") + e.what());
  }
  if (!j.is_object()) throw Error("mock responses must be a JSON object");
  std::map<std::string, std::vector<std::string>> responses;
  for (const auto& [nl, value] : j.items()) {
    auto& list = responses[one_line(nl)];
    if (value.is_string()) {
      list.push_back(value.get<std::string>());
    } else if (value.is_array() && !value.empty()) {
      for (const auto& v : value) {
        if (!v.is_string()) throw Error("mock responses for '" + nl + "' must be strings");
        list.push_back(v.get<std::string>());
      }
    } else {
      throw Error("mock responses for '" + nl + "' must be a string or a non-empty list");
    }
  }
  return MockBackend(std::move(responses));
}

MockBackend MockBackend::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read mock responses " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return from_json_text(s.str());
}

std::string MockBackend::complete(const std::string& prompt, int, double) {
  const auto it = responses_.find(last_nl(prompt));
  if (it == responses_.end()) return "";
  const std::size_t round = std::min(count_errors(prompt), it->second.size() - 1);
  return it->second[round];
}

std::string extract_sps(std::string_view completion) {
  std::vector<std::string> kept;
  bool any = false;
  for (std::string& line : split_lines(completion)) {
    const std::string_view t = detail::trim(line);
    if (starts_with(t, "```")) {
      if (any) break;
      continue;
    }
    if (any && (starts_with(t, "NL:") || starts_with(t, "###") || starts_with(t, "---") ||
                starts_with(t, kErrorMarker)))
      break;
    if (!any && t.empty()) continue;
    if (!any && starts_with(t, "SPS:")) line = std::string(t.substr(4));
    any = true;
    kept.push_back(std::move(line));
  }
  std::string out;
  for (const auto& l : kept) out += (out.empty() ? "" : "\n") + l;
  out = std::string(detail::trim(out));
  if (!out.empty() && out.back() == ';') out.pop_back();
  return std::string(detail::trim(out));
}

TranslationResult translate_one(const Prompt& prompt, const DatasetCatalog& catalog,
                                LlmBackend& backend, const TranslateOptions& options) {
  TranslationResult r = run(prompt, catalog, backend, options);
  if (!r.ok()) throw TranslationFailed(r.nl, r.diagnostics);
  return r;
}

std::vector<TranslationResult> translate(const std::vector<std::string>& nl_queries,
                                         const DatasetCatalog& catalog, const ExampleBank& bank,
                                         LlmBackend& backend, const TranslateOptions& options) {
  std::vector<TranslationResult> out;
  for (const Prompt& p : build_prompt(bank, catalog, nl_queries))
    out.push_back(run(p, catalog, backend, options));
  return out;
}

}  // namespace choicesql
