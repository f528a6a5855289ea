#include "choicesql/validate.hpp"

#include "choicesql/instantiate.hpp"

namespace choicesql {

std::vector<Diagnostic> validate_template(const SpsTemplate& tmpl, const DatasetCatalog& catalog,
                                          std::size_t cap) {
  std::vector<Diagnostic> out;
  for (const ChoiceNode& n : tmpl.nodes) {
    const DomainRef* ref = n.domain_ref();
    if (!ref) continue;
    const auto col = catalog.resolve_column(ref->attribute, tmpl.source);
    if (!col) {
      out.push_back({DiagnosticCode::UnresolvedDomainRef,
                     "&" + ref->attribute + " does not name a column", n.id, std::nullopt});
    } else if (catalog.attribute_domain(col->table, col->column.name).empty()) {
      out.push_back({DiagnosticCode::EmptyDomain, "&" + ref->attribute + " has no values", n.id,
                     std::nullopt});
    }
  }
  if (!out.empty()) return out;

  enumerate_assignments(tmpl, catalog, cap, [&](const ChoiceAssignment& a) {
    std::string sql;
    try {
      sql = instantiate(tmpl, a, catalog);
    } catch (const NodeError& e) {
      out.push_back({DiagnosticCode::InstantiationError, e.what(), e.node(), describe(tmpl, a)});
      return true;
    }
    try {
      catalog.execute_sql(sql);
    } catch (const SqlError& e) {
      out.push_back({DiagnosticCode::ExecutionError, std::string(e.what()) + " in: " + sql,
                     std::nullopt, describe(tmpl, a)});
    }
    return true;
  });
  return out;
}

}  // namespace choicesql
