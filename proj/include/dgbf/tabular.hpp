#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dgbf/matrix.hpp"

namespace dgbf::tabular {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ColumnKind { kNumeric, kCategorical, kDate, kId };

const char* to_string(ColumnKind kind);
ColumnKind column_kind_from_string(const std::string& name);

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  std::vector<std::string> cells;  // raw text as read from the file
};

// Raw table as parsed from CSV, with inferred column kinds.
struct ColumnTable {
  std::vector<Column> columns;
  Index n_rows = 0;

  [[nodiscard]] const Column* find(const std::string& name) const;
};

// How one source column becomes model features. Stored inside the model file
// so new data can be encoded exactly as the training data were.
struct SourceColumn {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  std::vector<std::string> categories;  // categorical only; code = position

  friend bool operator==(const SourceColumn&, const SourceColumn&) = default;
};

struct FeatureSchema {
  std::string target;
  std::vector<SourceColumn> sources;  // id columns are kept with kind kId
  std::vector<std::string> feature_names;

  [[nodiscard]] Index n_features() const noexcept { return feature_names.size(); }
  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

struct Dataset {
  Matrix features;
  std::vector<double> target;
  std::vector<std::string> feature_names;
  FeatureSchema schema;

  [[nodiscard]] Index n_rows() const noexcept { return features.rows(); }
  [[nodiscard]] Index n_features() const noexcept { return features.cols(); }
};

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

// Cell parsing helpers shared with schema application.
bool is_missing(const std::string& cell);
bool parse_number(const std::string& cell, double& out);
bool parse_date(const std::string& cell, int& year, int& month, int& day);

// Parses RFC-4180 CSV text. `origin` is used in diagnostics.
ColumnTable parse_csv(const std::string& text, const std::string& origin = "<memory>");
ColumnTable read_csv(const std::filesystem::path& path);
// As read_csv, but requires `target_column` in the header. The target is never
// classified as an id column.
ColumnTable load_csv(const std::filesystem::path& path, const std::string& target_column);

Dataset preprocess(const ColumnTable& table, const std::string& target_column);

struct EncodeResult {
  Matrix features;
  Index unknown_categories = 0;  // cells mapped to code 0
};
// Encodes a raw table with a stored schema. The target column may be absent.
EncodeResult apply_schema(const FeatureSchema& schema, const ColumnTable& table);

// Row indices of each part. Disjoint, covering 0..n-1.
struct SplitIndices {
  IndexSet train;
  IndexSet test;
};
SplitIndices split_indices(Index n_rows, const SplitSpec& spec);
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, const SplitSpec& spec);

Dataset select_rows(const Dataset& data, const IndexSet& rows);
Dataset drop_features(const Dataset& data, Index k, std::uint64_t seed);

}  // namespace dgbf::tabular
