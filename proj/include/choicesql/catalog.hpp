#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "choicesql/errors.hpp"

struct sqlite3;

namespace choicesql {

enum class StorageType { Text, Integer, Real, Date };
enum class SemanticType { Categorical, Quantitative, Temporal, Geographic };

const char* to_string(StorageType t);
const char* to_string(SemanticType t);

/// A single SQL value. monostate is NULL.
using Value = std::variant<std::monostate, std::int64_t, double, std::string>;

/// Label form of a value, as shown in widgets (`Texas`, `42`, `0.5`).
std::string value_label(const Value& v);

/// SQL literal for `v` as stored in a column of type `storage`.
/// Text and dates are single-quoted with `'` doubled; numbers are bare.
std::string quote_value(const Value& v, StorageType storage);

struct ColumnInfo {
  std::string name;
  StorageType storage_type = StorageType::Text;
  SemanticType semantic_type = SemanticType::Categorical;
  bool operator==(const ColumnInfo&) const = default;
};

struct TableSchema {
  std::string name;
  std::vector<ColumnInfo> columns;
  std::int64_t row_count = 0;

  const ColumnInfo* column(std::string_view name) const;
  bool operator==(const TableSchema&) const = default;
};

struct ResultColumn {
  std::string name;
  SemanticType semantic_type = SemanticType::Categorical;
  bool operator==(const ResultColumn&) const = default;
};

struct ResultTable {
  std::vector<ResultColumn> columns;
  std::vector<std::vector<Value>> rows;
  bool operator==(const ResultTable&) const = default;
};

/// Provides the current date for `today()`. Fixed clocks make execution
/// reproducible; the default reads the system date (UTC).
class Clock {
 public:
  Clock() = default;
  static Clock fixed(std::string iso_date);

  std::string today() const;
  bool is_fixed() const noexcept { return fixed_.has_value(); }

 private:
  std::optional<std::string> fixed_;
};

/// Region names that mark a categorical column as geographic. Matching is
/// case-insensitive.
class RegionList {
 public:
  RegionList() = default;
  explicit RegionList(const std::vector<std::string>& names);

  static RegionList us_states();
  /// One name per line; blank lines and `#` comments are skipped.
  static RegionList load(const std::string& path);

  bool contains(std::string_view name) const;
  std::size_t size() const noexcept { return names_.size(); }

 private:
  std::set<std::string> names_;
};

bool is_iso_date(std::string_view s);

/// Parses RFC-4180 CSV into records. Throws MalformedCsv.
std::vector<std::vector<std::string>> parse_csv(std::string_view bytes);

/// Ingested tables backed by an in-memory SQLite database.
///
/// Reads (execute, domains, schema) may run concurrently; ingest takes the
/// writer lock for the whole catalog.
class DatasetCatalog {
 public:
  explicit DatasetCatalog(Clock clock = {}, RegionList regions = RegionList::us_states());
  ~DatasetCatalog();

  DatasetCatalog(const DatasetCatalog&) = delete;
  DatasetCatalog& operator=(const DatasetCatalog&) = delete;

  /// Creates or replaces table `name` from a CSV payload with a header row.
  TableSchema ingest_csv(const std::string& name, std::string_view bytes);

  /// Distinct non-null values of `table.column`, ascending. Cached until the
  /// table is re-ingested.
  std::vector<Value> attribute_domain(const std::string& table, const std::string& column) const;

  /// Runs one read-only statement. `today()` is replaced by the clock's date.
  ResultTable execute_sql(std::string_view sql) const;

  /// `table(col:type, ...)`, one line per table in name order.
  std::string schema_text() const;
  std::string schema_text(const std::string& table) const;

  std::vector<TableSchema> tables() const;
  std::optional<TableSchema> table(const std::string& name) const;
  bool empty() const;

  struct ColumnRef {
    std::string table;
    ColumnInfo column;
  };

  /// Resolves an `&attr` reference. `attr` may be `table.column`; a bare
  /// column prefers tables named in `context_sql`, then name order.
  std::optional<ColumnRef> resolve_column(std::string_view attr,
                                          std::string_view context_sql = {}) const;

  std::string rewrite_today(std::string_view sql) const;
  const Clock& clock() const noexcept { return clock_; }
  const RegionList& regions() const noexcept { return regions_; }

 private:
  ResultTable run_locked(std::string_view sql) const;
  SemanticType infer_result_type(int index, const std::string& expr,
                                 const std::vector<std::vector<Value>>& rows,
                                 const char* origin_table, const char* origin_column) const;

  Clock clock_;
  RegionList regions_;
  sqlite3* db_ = nullptr;
  mutable std::mutex db_mutex_;  // serializes statements on the connection
  std::map<std::string, TableSchema> tables_;
  mutable std::shared_mutex mutex_;

  mutable std::mutex cache_mutex_;
  mutable std::map<std::pair<std::string, std::string>, std::vector<Value>> domain_cache_;
};

}  // namespace choicesql
