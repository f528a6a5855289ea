#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace choicesql {

using NodeId = std::size_t;

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed SPS text. `position` is a byte offset into the source.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, std::string expected);

  std::size_t position() const noexcept { return position_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t position_;
  std::string expected_;
};

class SqlError : public Error {
 public:
  using Error::Error;
};

class MalformedCsv : public Error {
 public:
  MalformedCsv(std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptyTable : public Error {
 public:
  EmptyTable() : Error("table has a header but no rows") {}
};

class EmptyCatalog : public Error {
 public:
  EmptyCatalog() : Error("catalog has no tables") {}
};

class UnknownColumn : public Error {
 public:
  using Error::Error;
};

class UnknownTable : public Error {
 public:
  using Error::Error;
};

/// Raised for errors attached to one choice node.
class NodeError : public Error {
 public:
  NodeError(NodeId node, const std::string& what) : Error(what), node_(node) {}
  NodeId node() const noexcept { return node_; }

 private:
  NodeId node_;
};

class EmptyDomain : public NodeError {
 public:
  using NodeError::NodeError;
};

class IncompleteAssignment : public NodeError {
 public:
  using NodeError::NodeError;
};

class SelectionOutOfRange : public NodeError {
 public:
  using NodeError::NodeError;
};

enum class DiagnosticCode {
  SyntaxError,
  UnresolvedDomainRef,
  EmptyDomain,
  InstantiationError,
  ExecutionError,
};

const char* to_string(DiagnosticCode code);

/// A non-fatal finding from template validation or translation.
struct Diagnostic {
  DiagnosticCode code;
  std::string message;
  std::optional<NodeId> node;
  /// Compact rendering of the failing assignment, e.g. `{Any#0->1}`.
  std::optional<std::string> assignment;

  bool operator==(const Diagnostic&) const = default;
};

std::string describe(const Diagnostic& d);

class BackendUnavailable : public Error {
 public:
  using Error::Error;
};

class TranslationFailed : public Error {
 public:
  TranslationFailed(std::string nl, std::vector<Diagnostic> diagnostics);
  const std::string& nl() const noexcept { return nl_; }
  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string nl_;
  std::vector<Diagnostic> diagnostics_;
};

class EmptyBank : public Error {
 public:
  EmptyBank() : Error("example bank is empty") {}
};

class BankParseError : public Error {
 public:
  BankParseError(std::size_t entry, const std::string& what);
  std::size_t entry() const noexcept { return entry_; }

 private:
  std::size_t entry_;
};

}  // namespace choicesql
