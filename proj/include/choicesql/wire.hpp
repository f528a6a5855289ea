#pragma once

#include <string>

#include <json.hpp>

#include "choicesql/catalog.hpp"
#include "choicesql/errors.hpp"
#include "choicesql/grammar.hpp"
#include "choicesql/instantiate.hpp"
#include "choicesql/interface.hpp"

namespace choicesql::wire {

using Json = nlohmann::ordered_json;

inline constexpr int kSpecVersion = 1;

/// Malformed request payloads.
class WireError : public Error {
 public:
  using Error::Error;
};

Json to_json(const Value& v);
Value value_from_json(const Json& j);

Json to_json(const ResultTable& r);
Json to_json(const TableSchema& s);

/// `{"index": 1}`, `{"value": "Texas"}`, `{"number": 0.5}`, `{"indices": [0, 2]}`,
/// `{"values": [...]}`, `{"on": true}`.
Json to_json(const Selection& s);
Selection selection_from_json(const Json& j);

Json to_json(const ChoiceAssignment& a);
ChoiceAssignment assignment_from_json(const Json& j);

Json to_json(const Diagnostic& d);

Json to_json(const InterfaceSpec& spec);
InterfaceSpec spec_from_json(const Json& j);

/// Canonical text form: two-space indent, trailing newline.
std::string dump(const Json& j);

}  // namespace choicesql::wire
