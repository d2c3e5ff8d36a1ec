#include "dgbf/tabular.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <regex>
#include <sstream>
#include <unordered_map>

#include "dgbf/rng.hpp"

namespace dgbf::tabular {

namespace {

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Splits CSV text into records. Handles quoted fields, doubled quotes and
// CRLF line endings. Blank lines are skipped.
std::vector<std::vector<std::string>> split_records(const std::string& text,
                                                    const std::string& origin) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    if (!(record.empty() && !field_started && field.empty())) {
      end_field();
      records.push_back(std::move(record));
    }
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) {
    throw DataError(fmt::format("{}: unterminated quoted field near line {}", origin, line));
  }
  end_record();
  // UTF-8 byte order mark on the header.
  if (!records.empty() && !records.front().empty() &&
      records.front().front().rfind("\xEF\xBB\xBF", 0) == 0) {
    records.front().front().erase(0, 3);
  }
  return records;
}

bool is_integer_value(double v) {
  return std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 9.0e15;
}

ColumnKind infer_kind(const Column& column) {
  if (to_lower(trim(column.name)) == "id") return ColumnKind::kId;

  bool all_numeric = true;
  bool all_date = true;
  bool any_value = false;
  for (const auto& cell : column.cells) {
    if (is_missing(cell)) continue;
    any_value = true;
    double v = 0;
    if (!parse_number(cell, v)) all_numeric = false;
    int y = 0, m = 0, d = 0;
    if (!parse_date(cell, y, m, d)) all_date = false;
    if (!all_numeric && !all_date) break;
  }
  if (!any_value || all_numeric) {
    // A row counter: complete, integer-valued, stepping by exactly one.
    if (any_value && column.cells.size() >= 2) {
      bool counter = true;
      double prev = 0;
      for (std::size_t i = 0; i < column.cells.size() && counter; ++i) {
        double v = 0;
        if (is_missing(column.cells[i]) || !parse_number(column.cells[i], v) ||
            !is_integer_value(v) || (i > 0 && v != prev + 1.0)) {
          counter = false;
        }
        prev = v;
      }
      if (counter) return ColumnKind::kId;
    }
    return ColumnKind::kNumeric;
  }
  if (all_date) return ColumnKind::kDate;
  return ColumnKind::kCategorical;
}

}  // namespace

const char* to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::kNumeric: return "numeric";
    case ColumnKind::kCategorical: return "categorical";
    case ColumnKind::kDate: return "date";
    case ColumnKind::kId: return "id";
  }
  return "numeric";
}

ColumnKind column_kind_from_string(const std::string& name) {
  if (name == "numeric") return ColumnKind::kNumeric;
  if (name == "categorical") return ColumnKind::kCategorical;
  if (name == "date") return ColumnKind::kDate;
  if (name == "id") return ColumnKind::kId;
  throw DataError(fmt::format("unknown column kind '{}'", name));
}

const Column* ColumnTable::find(const std::string& name) const {
  for (const auto& c : columns) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

bool is_missing(const std::string& cell) {
  const std::string t = trim(cell);
  return t.empty() || t == "NA" || t == "N/A" || t == "na" || t == "NaN" || t == "nan" ||
         t == "null" || t == "NULL" || t == "?";
}

bool parse_number(const std::string& cell, double& out) {
  const std::string t = trim(cell);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

bool parse_date(const std::string& cell, int& year, int& month, int& day) {
  // ISO-like YYYY-MM-DD or YYYY/MM/DD, optionally followed by a time part.
  static const std::regex pattern(R"(^(\d{4})[-/](\d{1,2})[-/](\d{1,2})([T ].*)?$)");
  std::smatch m;
  const std::string t = trim(cell);
  if (!std::regex_match(t, m, pattern)) return false;
  year = std::stoi(m[1].str());
  month = std::stoi(m[2].str());
  day = std::stoi(m[3].str());
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

ColumnTable parse_csv(const std::string& text, const std::string& origin) {
  auto records = split_records(text, origin);
  if (records.empty()) {
    throw DataError(fmt::format("{}: missing header row", origin));
  }
  ColumnTable table;
  const auto& header = records.front();
  table.columns.resize(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    table.columns[c].name = trim(header[c]);
    if (table.columns[c].name.empty()) {
      throw DataError(fmt::format("{}: empty column name at header field {}", origin, c + 1));
    }
    for (std::size_t prev = 0; prev < c; ++prev) {
      if (table.columns[prev].name == table.columns[c].name) {
        throw DataError(
            fmt::format("{}: duplicate column name '{}'", origin, table.columns[c].name));
      }
    }
  }
  table.n_rows = records.size() - 1;
  for (auto& col : table.columns) col.cells.reserve(table.n_rows);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size()) {
      throw DataError(fmt::format("{}: data row {} has {} fields, header has {}", origin, r,
                                  records[r].size(), header.size()));
    }
    for (std::size_t c = 0; c < header.size(); ++c) {
      table.columns[c].cells.push_back(std::move(records[r][c]));
    }
  }
  for (auto& col : table.columns) col.kind = infer_kind(col);
  return table;
}

ColumnTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), path.string());
}

ColumnTable load_csv(const std::filesystem::path& path, const std::string& target_column) {
  ColumnTable table = read_csv(path);
  bool found = false;
  for (auto& col : table.columns) {
    if (col.name != target_column) continue;
    found = true;
    if (col.kind == ColumnKind::kId) col.kind = ColumnKind::kNumeric;
  }
  if (!found) {
    throw DataError(
        fmt::format("{}: target column '{}' not in header", path.string(), target_column));
  }
  return table;
}

Dataset preprocess(const ColumnTable& table, const std::string& target_column) {
  const Column* target = table.find(target_column);
  if (target == nullptr) {
    throw DataError(fmt::format("target column '{}' not found", target_column));
  }
  if (target->kind == ColumnKind::kCategorical || target->kind == ColumnKind::kDate) {
    throw DataError(fmt::format("target column '{}' is {}; regression needs a numeric target",
                                target_column, to_string(target->kind)));
  }

  Dataset out;
  out.target.resize(table.n_rows);
  bool any_target = false;
  for (Index r = 0; r < table.n_rows; ++r) {
    double v = 0.0;
    if (!is_missing(target->cells[r])) {
      if (!parse_number(target->cells[r], v)) {
        throw DataError(fmt::format("target column '{}': row {} is not numeric: '{}'",
                                    target_column, r + 2, target->cells[r]));
      }
      any_target = true;
    }
    out.target[r] = v;
  }
  if (!any_target) {
    throw DataError(fmt::format("target column '{}' is entirely missing", target_column));
  }

  FeatureSchema& schema = out.schema;
  schema.target = target_column;
  for (const auto& col : table.columns) {
    if (col.name == target_column) continue;
    SourceColumn src{col.name, col.kind, {}};
    if (col.kind == ColumnKind::kCategorical) {
      std::unordered_map<std::string, Index> seen;
      for (const auto& cell : col.cells) {
        if (is_missing(cell)) continue;
        if (seen.emplace(cell, src.categories.size()).second) src.categories.push_back(cell);
      }
    }
    schema.sources.push_back(std::move(src));
  }
  for (const auto& src : schema.sources) {
    switch (src.kind) {
      case ColumnKind::kId:
        break;
      case ColumnKind::kDate:
        schema.feature_names.push_back(src.name + "_year");
        schema.feature_names.push_back(src.name + "_month");
        schema.feature_names.push_back(src.name + "_day");
        break;
      default:
        schema.feature_names.push_back(src.name);
    }
  }

  out.features = apply_schema(schema, table).features;
  out.feature_names = schema.feature_names;
  return out;
}

EncodeResult apply_schema(const FeatureSchema& schema, const ColumnTable& table) {
  if (schema.sources.empty() && schema.n_features() > 0) {
    throw DataError("schema has no source columns; the model was trained on an encoded matrix");
  }
  EncodeResult result;
  result.features = Matrix(table.n_rows, schema.n_features());
  Index out_col = 0;
  for (const auto& src : schema.sources) {
    if (src.kind == ColumnKind::kId) continue;
    const Column* col = table.find(src.name);
    if (col == nullptr) {
      throw DataError(fmt::format("input is missing feature column '{}'", src.name));
    }
    switch (src.kind) {
      case ColumnKind::kNumeric:
        for (Index r = 0; r < table.n_rows; ++r) {
          double v = 0.0;
          const auto& cell = col->cells[r];
          if (!is_missing(cell) && !parse_number(cell, v)) {
            throw DataError(fmt::format("column '{}': row {} is not numeric: '{}'", src.name,
                                        r + 2, cell));
          }
          result.features(r, out_col) = v;
        }
        ++out_col;
        break;
      case ColumnKind::kCategorical: {
        std::unordered_map<std::string, Index> codes;
        for (Index i = 0; i < src.categories.size(); ++i) codes.emplace(src.categories[i], i);
        for (Index r = 0; r < table.n_rows; ++r) {
          const auto& cell = col->cells[r];
          double v = 0.0;
          if (!is_missing(cell)) {
            auto it = codes.find(cell);
            if (it == codes.end()) {
              ++result.unknown_categories;
            } else {
              v = static_cast<double>(it->second);
            }
          }
          result.features(r, out_col) = v;
        }
        ++out_col;
        break;
      }
      case ColumnKind::kDate:
        for (Index r = 0; r < table.n_rows; ++r) {
          int y = 0, m = 0, d = 0;
          const auto& cell = col->cells[r];
          if (!is_missing(cell) && !parse_date(cell, y, m, d)) {
            throw DataError(
                fmt::format("column '{}': row {} is not a date: '{}'", src.name, r + 2, cell));
          }
          result.features(r, out_col) = y;
          result.features(r, out_col + 1) = m;
          result.features(r, out_col + 2) = d;
        }
        out_col += 3;
        break;
      case ColumnKind::kId:
        break;
    }
  }
  return result;
}

SplitIndices split_indices(Index n_rows, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw DataError(fmt::format("train_fraction must be in (0,1), got {}", spec.train_fraction));
  }
  if (n_rows < 10) {
    throw DataError(fmt::format("train/test split needs at least 10 rows, got {}", n_rows));
  }
  IndexSet perm(n_rows);
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(mix64(spec.seed ^ 0x5eed5b1175ULL));
  for (Index i = n_rows - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.below(i + 1)]);
  }
  auto n_train = static_cast<Index>(std::ceil(spec.train_fraction * static_cast<double>(n_rows)));
  n_train = std::min(n_train, n_rows);
  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  return out;
}

Dataset select_rows(const Dataset& data, const IndexSet& rows) {
  Dataset out;
  out.features = data.features.select_rows(rows);
  out.target.reserve(rows.size());
  for (Index r : rows) out.target.push_back(data.target[r]);
  out.feature_names = data.feature_names;
  out.schema = data.schema;
  return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, const SplitSpec& spec) {
  if (data.features.rows() != data.target.size()) {
    throw DataError("dataset features and target disagree on row count");
  }
  auto idx = split_indices(data.n_rows(), spec);
  return {select_rows(data, idx.train), select_rows(data, idx.test)};
}

Dataset drop_features(const Dataset& data, Index k, std::uint64_t seed) {
  const Index p = data.n_features();
  if (k >= p) {
    throw DataError(fmt::format("cannot drop {} of {} features", k, p));
  }
  if (k == 0) return data;
  IndexSet order(p);
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(mix64(seed ^ 0xab1a7e0ULL));
  // Partial Fisher-Yates: the first k entries are the dropped columns.
  for (Index i = 0; i < k; ++i) {
    std::swap(order[i], order[i + rng.below(p - i)]);
  }
  std::vector<bool> dropped(p, false);
  for (Index i = 0; i < k; ++i) dropped[order[i]] = true;

  IndexSet keep;
  for (Index c = 0; c < p; ++c) {
    if (!dropped[c]) keep.push_back(c);
  }
  Dataset out;
  out.target = data.target;
  out.features = Matrix(data.n_rows(), keep.size());
  for (Index r = 0; r < data.n_rows(); ++r) {
    for (Index j = 0; j < keep.size(); ++j) out.features(r, j) = data.features(r, keep[j]);
  }
  for (Index c : keep) {
    if (c < data.feature_names.size()) out.feature_names.push_back(data.feature_names[c]);
  }
  // The source schema no longer describes these features.
  out.schema.target = data.schema.target;
  out.schema.feature_names = out.feature_names;
  return out;
}

}  // namespace dgbf::tabular
