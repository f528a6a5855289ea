#include "choicesql/errors.hpp"

namespace choicesql {

SyntaxError::SyntaxError(std::size_t position, std::string expected)
    : Error("syntax error at byte " + std::to_string(position) + ": expected " + expected),
      position_(position),
      expected_(std::move(expected)) {}

MalformedCsv::MalformedCsv(std::size_t line, const std::string& what)
    : Error("malformed CSV at line " + std::to_string(line) + ": " + what), line_(line) {}

TranslationFailed::TranslationFailed(std::string nl, std::vector<Diagnostic> diagnostics)
    : Error("translation failed for: " + nl), nl_(std::move(nl)), diagnostics_(std::move(diagnostics)) {}

BankParseError::BankParseError(std::size_t entry, const std::string& what)
    : Error("example bank entry " + std::to_string(entry) + ": " + what), entry_(entry) {}

const char* to_string(DiagnosticCode code) {
  switch (code) {
    case DiagnosticCode::SyntaxError: return "SyntaxError";
    case DiagnosticCode::UnresolvedDomainRef: return "UnresolvedDomainRef";
    case DiagnosticCode::EmptyDomain: return "EmptyDomain";
    case DiagnosticCode::InstantiationError: return "InstantiationError";
    case DiagnosticCode::ExecutionError: return "ExecutionError";
  }
  return "?";
}

std::string describe(const Diagnostic& d) {
  std::string out = to_string(d.code);
  if (d.node) out += " (node " + std::to_string(*d.node) + ")";
  if (d.assignment) out += " on assignment " + *d.assignment;
  out += ": " + d.message;
  return out;
}

}  // namespace choicesql
