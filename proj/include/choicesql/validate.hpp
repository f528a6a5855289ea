#pragma once

#include <cstddef>
#include <vector>

#include "choicesql/catalog.hpp"
#include "choicesql/errors.hpp"
#include "choicesql/grammar.hpp"

namespace choicesql {

inline constexpr std::size_t kDefaultEnumerationCap = 200;

/// Resolves every `&attr` and executes up to `cap` enumerated instantiations.
/// An empty result means the template is usable against `catalog`.
std::vector<Diagnostic> validate_template(const SpsTemplate& tmpl, const DatasetCatalog& catalog,
                                          std::size_t cap = kDefaultEnumerationCap);

}  // namespace choicesql
