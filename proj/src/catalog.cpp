#include "choicesql/catalog.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <regex>
#include <sstream>

#include "text_util.hpp"

namespace choicesql {

const char* to_string(StorageType t) {
  switch (t) {
    case StorageType::Text: return "text";
    case StorageType::Integer: return "int";
    case StorageType::Real: return "real";
    case StorageType::Date: return "date";
  }
  return "?";
}

const char* to_string(SemanticType t) {
  switch (t) {
    case SemanticType::Categorical: return "categorical";
    case SemanticType::Quantitative: return "quantitative";
    case SemanticType::Temporal: return "temporal";
    case SemanticType::Geographic: return "geographic";
  }
  return "?";
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

bool parse_int(std::string_view s, std::int64_t& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_real(std::string_view s, double& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string quote_ident(std::string_view name) {
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

bool valid_identifier(std::string_view s) {
  static const std::regex re("[A-Za-z_][A-Za-z0-9_]*");
  return std::regex_match(s.begin(), s.end(), re);
}

const std::vector<std::string>& us_state_names() {
  static const std::vector<std::string> names = {
      "Alabama", "Alaska", "Arizona", "Arkansas", "California", "Colorado", "Connecticut",
      "Delaware", "District of Columbia", "Florida", "Georgia", "Hawaii", "Idaho", "Illinois",
      "Indiana", "Iowa", "Kansas", "Kentucky", "Louisiana", "Maine", "Maryland",
      "Massachusetts", "Michigan", "Minnesota", "Mississippi", "Missouri", "Montana",
      "Nebraska", "Nevada", "New Hampshire", "New Jersey", "New Mexico", "New York",
      "North Carolina", "North Dakota", "Ohio", "Oklahoma", "Oregon", "Pennsylvania",
      "Rhode Island", "South Carolina", "South Dakota", "Tennessee", "Texas", "Utah",
      "Vermont", "Virginia", "Washington", "West Virginia", "Wisconsin", "Wyoming"};
  return names;
}

Value read_column(sqlite3_stmt* stmt, int i) {
  switch (sqlite3_column_type(stmt, i)) {
    case SQLITE_INTEGER: return static_cast<std::int64_t>(sqlite3_column_int64(stmt, i));
    case SQLITE_FLOAT: return sqlite3_column_double(stmt, i);
    case SQLITE_NULL: return std::monostate{};
    default: {
      const auto* text = reinterpret_cast<const char*>(sqlite3_column_text(stmt, i));
      return std::string(text ? text : "", static_cast<std::size_t>(sqlite3_column_bytes(stmt, i)));
    }
  }
}

struct Statement {
  sqlite3_stmt* stmt = nullptr;
  ~Statement() { sqlite3_finalize(stmt); }
};

void exec_or_throw(sqlite3* db, const std::string& sql) {
  char* err = nullptr;
  if (sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw SqlError(msg);
  }
}

bool contains_choice_token(std::string_view sql) {
  for (std::size_t i = 0; i < sql.size(); ++i) {
    const char c = sql[i];
    if (c == '\'' || c == '"') {
      const std::size_t end = detail::skip_quoted(sql, i);
      if (end == std::string_view::npos) return false;
      i = end - 1;
      continue;
    }
    if (i > 0 && detail::is_ident_char(sql[i - 1])) continue;
    const std::string_view rest = sql.substr(i);
    if (rest.starts_with("ANY{") || rest.starts_with("OPT{") || rest.starts_with("SUBSET["))
      return true;
  }
  return false;
}

struct ColumnProfile {
  std::size_t non_null = 0;
  std::size_t numeric = 0;
  std::size_t integral = 0;
  std::size_t dates = 0;
  std::set<std::string> distinct;
};

}  // namespace

std::string value_label(const Value& v) {
  if (std::holds_alternative<std::monostate>(v)) return "NULL";
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&v)) return format_double(*d);
  return std::get<std::string>(v);
}

std::string quote_value(const Value& v, StorageType storage) {
  if (std::holds_alternative<std::monostate>(v)) return "NULL";
  const bool numeric_storage = storage == StorageType::Integer || storage == StorageType::Real;
  if (numeric_storage && !std::holds_alternative<std::string>(v)) return value_label(v);
  std::string out = "'";
  for (char c : value_label(v)) {
    if (c == '\'') out += '\'';
    out += c;
  }
  return out + "'";
}

const ColumnInfo* TableSchema::column(std::string_view col) const {
  for (const ColumnInfo& c : columns)
    if (c.name == col) return &c;
  return nullptr;
}

Clock Clock::fixed(std::string iso_date) {
  if (!is_iso_date(iso_date)) throw Error("clock date must be YYYY-MM-DD: " + iso_date);
  Clock c;
  c.fixed_ = std::move(iso_date);
  return c;
}

std::string Clock::today() const {
  if (fixed_) return *fixed_;
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[16];
  std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
  return buf;
}

RegionList::RegionList(const std::vector<std::string>& names) {
  for (const std::string& n : names) {
    const std::string_view t = detail::trim(n);
    if (!t.empty()) names_.insert(detail::to_lower(t));
  }
}

RegionList RegionList::us_states() { return RegionList(us_state_names()); }

RegionList RegionList::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open region list: " + path);
  std::vector<std::string> names;
  for (std::string line; std::getline(in, line);) {
    const std::string_view t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    names.emplace_back(t);
  }
  return RegionList(names);
}

bool RegionList::contains(std::string_view name) const {
  return names_.count(detail::to_lower(detail::trim(name))) > 0;
}

bool is_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  int y = 0, m = 0, d = 0;
  auto num = [&](std::size_t at, std::size_t len, int& out) {
    for (std::size_t i = at; i < at + len; ++i)
      if (s[i] < '0' || s[i] > '9') return false;
    std::from_chars(s.data() + at, s.data() + at + len, out);
    return true;
  };
  if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return false;
  if (m < 1 || m > 12 || d < 1) return false;
  static constexpr int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  return d <= days[m - 1] + (m == 2 && leap ? 1 : 0);
}

std::vector<std::vector<std::string>> parse_csv(std::string_view bytes) {
  if (bytes.starts_with("\xEF\xBB\xBF")) bytes.remove_prefix(3);
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  std::size_t line = 1;
  std::size_t record_line = 1;
  bool in_quotes = false;
  bool field_quoted = false;
  bool field_started = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_quoted = false;
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = record.size() == 1 && record[0].empty();
    if (!blank) {
      if (!records.empty() && record.size() != records.front().size())
        throw MalformedCsv(record_line, "expected " + std::to_string(records.front().size()) +
                                            " fields, found " + std::to_string(record.size()));
      records.push_back(std::move(record));
    }
    record.clear();
  };

  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const char c = bytes[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < bytes.size() && bytes[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started) throw MalformedCsv(line, "quote inside unquoted field");
        in_quotes = true;
        field_quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < bytes.size() && bytes[i + 1] == '\n') break;
        [[fallthrough]];
      case '\n':
        end_record();
        ++line;
        record_line = line;
        break;
      default:
        if (field_quoted) throw MalformedCsv(line, "text after closing quote");
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) throw MalformedCsv(record_line, "unterminated quoted field");
  if (field_started || !record.empty()) end_record();
  return records;
}

DatasetCatalog::DatasetCatalog(Clock clock, RegionList regions)
    : clock_(std::move(clock)), regions_(std::move(regions)) {
  if (sqlite3_open_v2(":memory:", &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE |
                                            SQLITE_OPEN_FULLMUTEX,
                      nullptr) != SQLITE_OK) {
    sqlite3_close(db_);
    throw SqlError("cannot open in-memory database");
  }
}

DatasetCatalog::~DatasetCatalog() { sqlite3_close(db_); }

TableSchema DatasetCatalog::ingest_csv(const std::string& name, std::string_view bytes) {
  if (!valid_identifier(name)) throw Error("invalid table name: " + name);
  auto records = parse_csv(bytes);
  if (records.empty()) throw MalformedCsv(1, "missing header row");
  const std::vector<std::string> header = records.front();
  if (records.size() == 1) throw EmptyTable();

  TableSchema schema;
  schema.name = name;
  std::set<std::string> seen;
  for (const std::string& h : header) {
    const std::string col(detail::trim(h));
    if (col.empty()) throw MalformedCsv(1, "empty column name");
    if (!seen.insert(col).second) throw MalformedCsv(1, "duplicate column name: " + col);
    schema.columns.push_back({col, StorageType::Text, SemanticType::Categorical});
  }

  for (std::size_t c = 0; c < header.size(); ++c) {
    ColumnProfile p;
    for (std::size_t r = 1; r < records.size(); ++r) {
      const std::string_view v = detail::trim(records[r][c]);
      if (v.empty()) continue;
      ++p.non_null;
      std::int64_t i = 0;
      double d = 0;
      if (parse_int(v, i)) {
        ++p.numeric;
        ++p.integral;
      } else if (parse_real(v, d)) {
        ++p.numeric;
      }
      if (is_iso_date(v)) ++p.dates;
      p.distinct.emplace(v);
    }
    ColumnInfo& info = schema.columns[c];
    const double n = static_cast<double>(p.non_null);
    if (p.non_null > 0 && static_cast<double>(p.numeric) >= 0.95 * n) {
      info.semantic_type = SemanticType::Quantitative;
      info.storage_type = p.integral == p.numeric ? StorageType::Integer : StorageType::Real;
    } else if (p.non_null > 0 && static_cast<double>(p.dates) >= 0.95 * n) {
      info.semantic_type = SemanticType::Temporal;
      info.storage_type = StorageType::Date;
    } else {
      std::size_t regions = 0;
      for (const std::string& v : p.distinct) regions += regions_.contains(v) ? 1 : 0;
      const bool geo = !p.distinct.empty() &&
                       static_cast<double>(regions) >= 0.8 * static_cast<double>(p.distinct.size());
      info.semantic_type = geo ? SemanticType::Geographic : SemanticType::Categorical;
    }
  }
  schema.row_count = static_cast<std::int64_t>(records.size() - 1);

  std::unique_lock lock(mutex_);
  std::lock_guard db_lock(db_mutex_);
  const std::string table = quote_ident(name);
  std::string create = "CREATE TABLE " + table + " (";
  std::string insert = "INSERT INTO " + table + " VALUES (";
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    const ColumnInfo& col = schema.columns[c];
    const char* decl = col.storage_type == StorageType::Integer ? "INTEGER"
                       : col.storage_type == StorageType::Real  ? "REAL"
                                                                : "TEXT";
    create += (c ? ", " : "") + quote_ident(col.name) + " " + decl;
    insert += c ? ", ?" : "?";
  }
  create += ")";
  insert += ")";

  exec_or_throw(db_, "BEGIN");
  try {
    exec_or_throw(db_, "DROP TABLE IF EXISTS " + table);
    exec_or_throw(db_, create);
    Statement ins;
    if (sqlite3_prepare_v2(db_, insert.c_str(), -1, &ins.stmt, nullptr) != SQLITE_OK)
      throw SqlError(sqlite3_errmsg(db_));
    for (std::size_t r = 1; r < records.size(); ++r) {
      sqlite3_reset(ins.stmt);
      for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        const int slot = static_cast<int>(c) + 1;
        const std::string v(detail::trim(records[r][c]));
        std::int64_t i = 0;
        double d = 0;
        switch (schema.columns[c].storage_type) {
          case StorageType::Integer:
            if (parse_int(v, i)) sqlite3_bind_int64(ins.stmt, slot, i);
            else sqlite3_bind_null(ins.stmt, slot);
            break;
          case StorageType::Real:
            if (parse_real(v, d)) sqlite3_bind_double(ins.stmt, slot, d);
            else sqlite3_bind_null(ins.stmt, slot);
            break;
          case StorageType::Date:
            if (is_iso_date(v)) sqlite3_bind_text(ins.stmt, slot, v.c_str(), -1, SQLITE_TRANSIENT);
            else sqlite3_bind_null(ins.stmt, slot);
            break;
          case StorageType::Text:
            if (v.empty()) sqlite3_bind_null(ins.stmt, slot);
            else sqlite3_bind_text(ins.stmt, slot, v.c_str(), -1, SQLITE_TRANSIENT);
            break;
        }
      }
      if (sqlite3_step(ins.stmt) != SQLITE_DONE) throw SqlError(sqlite3_errmsg(db_));
    }
    exec_or_throw(db_, "COMMIT");
  } catch (...) {
    sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
    throw;
  }

  tables_[name] = schema;
  std::lock_guard cache_lock(cache_mutex_);
  std::erase_if(domain_cache_, [&](const auto& entry) { return entry.first.first == name; });
  return schema;
}

std::vector<Value> DatasetCatalog::attribute_domain(const std::string& table,
                                                    const std::string& column) const {
  std::shared_lock lock(mutex_);
  const auto it = tables_.find(table);
  if (it == tables_.end()) throw UnknownTable("unknown table: " + table);
  if (!it->second.column(column)) throw UnknownColumn("unknown column: " + table + "." + column);
  {
    std::lock_guard cache_lock(cache_mutex_);
    if (const auto hit = domain_cache_.find({table, column}); hit != domain_cache_.end())
      return hit->second;
  }
  const std::string col = quote_ident(column);
  ResultTable r = run_locked("SELECT DISTINCT " + col + " FROM " + quote_ident(table) +
                             " WHERE " + col + " IS NOT NULL ORDER BY " + col);
  std::vector<Value> values;
  values.reserve(r.rows.size());
  for (auto& row : r.rows) values.push_back(std::move(row.front()));
  std::lock_guard cache_lock(cache_mutex_);
  domain_cache_[{table, column}] = values;
  return values;
}

ResultTable DatasetCatalog::execute_sql(std::string_view sql) const {
  if (contains_choice_token(sql)) throw SqlError("query still contains choice nodes");
  std::shared_lock lock(mutex_);
  return run_locked(rewrite_today(sql));
}

ResultTable DatasetCatalog::run_locked(std::string_view sql) const {
  std::lock_guard db_lock(db_mutex_);
  Statement st;
  const char* tail = nullptr;
  if (sqlite3_prepare_v2(db_, sql.data(), static_cast<int>(sql.size()), &st.stmt, &tail) !=
      SQLITE_OK)
    throw SqlError(sqlite3_errmsg(db_));
  if (!st.stmt) throw SqlError("empty statement");
  const std::string_view rest(tail, static_cast<std::size_t>(sql.data() + sql.size() - tail));
  if (!detail::trim(rest).empty() && detail::trim(rest) != ";")
    throw SqlError("only a single statement is allowed");
  if (!sqlite3_stmt_readonly(st.stmt)) throw SqlError("only read-only statements are allowed");

  ResultTable out;
  const int ncols = sqlite3_column_count(st.stmt);
  for (;;) {
    const int rc = sqlite3_step(st.stmt);
    if (rc == SQLITE_DONE) break;
    if (rc != SQLITE_ROW) throw SqlError(sqlite3_errmsg(db_));
    std::vector<Value> row;
    row.reserve(static_cast<std::size_t>(ncols));
    for (int i = 0; i < ncols; ++i) row.push_back(read_column(st.stmt, i));
    out.rows.push_back(std::move(row));
  }
  for (int i = 0; i < ncols; ++i) {
    const char* name = sqlite3_column_name(st.stmt, i);
    ResultColumn col;
    col.name = name ? name : "";
    col.semantic_type = infer_result_type(i, col.name, out.rows, sqlite3_column_table_name(st.stmt, i),
                                          sqlite3_column_origin_name(st.stmt, i));
    out.columns.push_back(std::move(col));
  }
  return out;
}

SemanticType DatasetCatalog::infer_result_type(int index, const std::string& expr,
                                               const std::vector<std::vector<Value>>& rows,
                                               const char* origin_table,
                                               const char* origin_column) const {
  auto source_type = [&](std::string_view column) -> std::optional<SemanticType> {
    for (const auto& [name, schema] : tables_) {
      if (origin_table && name != origin_table) continue;
      if (const ColumnInfo* c = schema.column(column)) return c->semantic_type;
    }
    return std::nullopt;
  };
  if (origin_column) {
    if (auto t = source_type(origin_column)) return *t;
  }

  // Expression columns: classify by the outermost function, then by values.
  static const std::regex call(R"(^\s*([A-Za-z_]+)\s*\(\s*(?:distinct\s+)?([^()]*?)\s*\)\s*$)",
                               std::regex::icase);
  std::smatch m;
  if (std::regex_match(expr, m, call)) {
    const std::string fn = detail::to_lower(m[1].str());
    if (fn == "count" || fn == "sum" || fn == "avg" || fn == "total")
      return SemanticType::Quantitative;
    if (fn == "date") return SemanticType::Temporal;
    if (fn == "min" || fn == "max") {
      std::string inner = m[2].str();
      if (inner.size() > 2 && inner.front() == '"' && inner.back() == '"')
        inner = inner.substr(1, inner.size() - 2);
      if (auto t = source_type(inner)) return *t;
    }
  }
  bool any = false, all_numeric = true, all_dates = true;
  for (const auto& row : rows) {
    const Value& v = row[static_cast<std::size_t>(index)];
    if (std::holds_alternative<std::monostate>(v)) continue;
    any = true;
    const auto* s = std::get_if<std::string>(&v);
    if (s) all_numeric = false;
    if (!s || !is_iso_date(*s)) all_dates = false;
  }
  if (any && all_numeric) return SemanticType::Quantitative;
  if (any && all_dates) return SemanticType::Temporal;
  return SemanticType::Categorical;
}

std::string DatasetCatalog::schema_text() const {
  std::shared_lock lock(mutex_);
  if (tables_.empty()) throw EmptyCatalog();
  std::string out;
  for (const auto& [name, schema] : tables_) {
    if (!out.empty()) out += '\n';
    out += name + "(";
    for (std::size_t i = 0; i < schema.columns.size(); ++i) {
      if (i) out += ", ";
      out += schema.columns[i].name + ":" + to_string(schema.columns[i].storage_type);
    }
    out += ")";
  }
  return out;
}

std::string DatasetCatalog::schema_text(const std::string& table) const {
  std::shared_lock lock(mutex_);
  if (tables_.empty()) throw EmptyCatalog();
  const auto it = tables_.find(table);
  if (it == tables_.end()) throw UnknownTable("unknown table: " + table);
  std::string out = table + "(";
  for (std::size_t i = 0; i < it->second.columns.size(); ++i) {
    if (i) out += ", ";
    out += it->second.columns[i].name + ":" + to_string(it->second.columns[i].storage_type);
  }
  return out + ")";
}

std::vector<TableSchema> DatasetCatalog::tables() const {
  std::shared_lock lock(mutex_);
  std::vector<TableSchema> out;
  for (const auto& [name, schema] : tables_) out.push_back(schema);
  return out;
}

std::optional<TableSchema> DatasetCatalog::table(const std::string& name) const {
  std::shared_lock lock(mutex_);
  const auto it = tables_.find(name);
  if (it == tables_.end()) return std::nullopt;
  return it->second;
}

bool DatasetCatalog::empty() const {
  std::shared_lock lock(mutex_);
  return tables_.empty();
}

std::optional<DatasetCatalog::ColumnRef> DatasetCatalog::resolve_column(
    std::string_view attr, std::string_view context_sql) const {
  std::shared_lock lock(mutex_);
  if (const auto dot = attr.find('.'); dot != std::string_view::npos) {
    const auto it = tables_.find(std::string(attr.substr(0, dot)));
    if (it == tables_.end()) return std::nullopt;
    if (const ColumnInfo* c = it->second.column(attr.substr(dot + 1))) return ColumnRef{it->first, *c};
    return std::nullopt;
  }
  auto mentioned = [&](const std::string& table) {
    for (std::size_t pos = context_sql.find(table); pos != std::string_view::npos;
         pos = context_sql.find(table, pos + 1)) {
      const bool left = pos == 0 || !detail::is_ident_char(context_sql[pos - 1]);
      const std::size_t end = pos + table.size();
      const bool right = end >= context_sql.size() || !detail::is_ident_char(context_sql[end]);
      if (left && right) return true;
    }
    return false;
  };
  std::optional<ColumnRef> fallback;
  for (const auto& [name, schema] : tables_) {
    const ColumnInfo* c = schema.column(attr);
    if (!c) continue;
    if (mentioned(name)) return ColumnRef{name, *c};
    if (!fallback) fallback = ColumnRef{name, *c};
  }
  return fallback;
}

std::string DatasetCatalog::rewrite_today(std::string_view sql) const {
  std::string out;
  out.reserve(sql.size());
  const std::string literal = "'" + clock_.today() + "'";
  for (std::size_t i = 0; i < sql.size();) {
    const char c = sql[i];
    if (c == '\'' || c == '"') {
      std::size_t end = detail::skip_quoted(sql, i);
      if (end == std::string_view::npos) end = sql.size();
      out.append(sql.substr(i, end - i));
      i = end;
      continue;
    }
    if (detail::is_ident_char(c) && (i == 0 || !detail::is_ident_char(sql[i - 1]))) {
      const std::string_view word = detail::word_at(sql, i);
      if (detail::iequals(word, "today")) {
        std::size_t j = i + word.size();
        while (j < sql.size() && detail::is_space(sql[j])) ++j;
        if (j < sql.size() && sql[j] == '(') {
          std::size_t k = j + 1;
          while (k < sql.size() && detail::is_space(sql[k])) ++k;
          if (k < sql.size() && sql[k] == ')') {
            out += literal;
            i = k + 1;
            continue;
          }
        }
      }
      out.append(word);
      i += word.size();
      continue;
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

}  // namespace choicesql
