#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "choicesql/catalog.hpp"
#include "choicesql/errors.hpp"
#include "choicesql/grammar.hpp"

namespace choicesql {

struct ExamplePair {
  std::string nl;
  std::string sps;
  bool operator==(const ExamplePair&) const = default;
};

struct BankEntry {
  std::string schema_text;
  std::vector<ExamplePair> pairs;
  bool operator==(const BankEntry&) const = default;
};

struct ExampleBank {
  std::vector<BankEntry> entries;
  std::size_t pair_count() const;
  bool operator==(const ExampleBank&) const = default;
};

/// Records separated by `---` lines. Each record holds one `SCHEMA:` block
/// followed by `NL:` / `SPS:` pairs; SCHEMA and SPS may span several lines.
/// Throws BankParseError with the 0-based record index.
ExampleBank parse_example_bank(std::string_view text);
ExampleBank load_example_bank(const std::string& path);

/// True when the bank's SPS use each of ANY, SUBSET and OPT at least once.
bool covers_all_node_kinds(const ExampleBank& bank);

struct Prompt {
  std::string nl;
  std::string text;
  bool operator==(const Prompt&) const = default;
};

/// One prompt per query, each the bank demonstrations followed by the
/// catalog schema, the query and the `SPS:` cue. Throws EmptyBank, EmptyCatalog.
std::vector<Prompt> build_prompt(const ExampleBank& bank, const DatasetCatalog& catalog,
                                 const std::vector<std::string>& nl_queries);

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  /// Throws BackendUnavailable when the model cannot be reached.
  virtual std::string complete(const std::string& prompt, int max_tokens, double temperature) = 0;
};

/// Replays canned completions keyed by the query on the prompt's last `NL:`
/// line. The i-th repair round (counted by `-- error:` lines) gets the i-th
/// response; the last response repeats. Unknown queries complete to "".
class MockBackend : public LlmBackend {
 public:
  MockBackend() = default;
  explicit MockBackend(std::map<std::string, std::vector<std::string>> responses);
  /// JSON object mapping each query to a completion or a list of completions.
  static MockBackend from_json_text(std::string_view text);
  static MockBackend load(const std::string& path);

  std::string complete(const std::string& prompt, int max_tokens, double temperature) override;

 private:
  std::map<std::string, std::vector<std::string>> responses_;
};

struct LiveBackendConfig {
  std::string endpoint;  // full completions URL
  std::string model = "code-davinci-002";
  std::string api_key;
  int timeout_seconds = 60;

  /// CHOICESQL_LLM_ENDPOINT, CHOICESQL_LLM_MODEL, CHOICESQL_LLM_API_KEY.
  static LiveBackendConfig from_env();
};

/// OpenAI-style text completion endpoint over HTTP(S).
class LiveBackend : public LlmBackend {
 public:
  explicit LiveBackend(LiveBackendConfig config);
  std::string complete(const std::string& prompt, int max_tokens, double temperature) override;

 private:
  LiveBackendConfig config_;
};

struct TranslateOptions {
  int max_attempts = 3;
  int max_tokens = 256;
  double temperature = 0.0;
};

struct TranslationResult {
  std::string nl;
  std::string sps_text;
  std::optional<SpsTemplate> tmpl;  // set on success
  int attempts = 0;
  std::vector<Diagnostic> diagnostics;  // from the last attempt
  bool ok() const { return tmpl.has_value(); }
};

/// First SPS statement in a completion: code fences and anything after a
/// following demonstration marker are dropped.
std::string extract_sps(std::string_view completion);

/// Translates one query, retrying with the error appended to the prompt.
/// Throws TranslationFailed after `max_attempts`, BackendUnavailable.
TranslationResult translate_one(const Prompt& prompt, const DatasetCatalog& catalog,
                                LlmBackend& backend, const TranslateOptions& options = {});

/// Translates each query independently. Failed queries are returned with
/// `ok() == false` and their diagnostics; BackendUnavailable propagates.
std::vector<TranslationResult> translate(const std::vector<std::string>& nl_queries,
                                         const DatasetCatalog& catalog, const ExampleBank& bank,
                                         LlmBackend& backend, const TranslateOptions& options = {});

}  // namespace choicesql
