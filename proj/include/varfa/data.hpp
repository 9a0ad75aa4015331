#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace varfa {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct ResponseRecord {
  std::string student_id;
  std::string question_id;
  int correct = 0;
  std::set<std::string> tag_ids;
  std::size_t order_index = 0;
};

/// Column names for CSV ingestion. An empty `tags` disables tag parsing.
struct CsvSchema {
  std::string student = "user_id";
  std::string question = "problem_id";
  std::string correct = "correct";
  std::string tags;
  char field_delimiter = ',';
  char tag_delimiter = ';';
};

std::vector<ResponseRecord> ingest_csv(std::istream& in, const CsvSchema& schema);
std::vector<ResponseRecord> ingest_csv_file(const std::string& path, const CsvSchema& schema);

/// Bijection between opaque string ids and dense indices.
class IdIndex {
 public:
  IdIndex() = default;
  explicit IdIndex(std::vector<std::string> ids);

  std::size_t size() const { return ids_.size(); }
  const std::string& id(std::size_t index) const { return ids_.at(index); }
  std::optional<std::size_t> find(const std::string& id) const;
  const std::vector<std::string>& ids() const { return ids_; }

  bool operator==(const IdIndex& other) const { return ids_ == other.ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

/// Binary response matrix with its observation mask. Unobserved entries hold 0.
struct ResponseDataset {
  Eigen::MatrixXd values;  // N x Q
  Mask mask;               // N x Q, true = observed
  IdIndex students;
  IdIndex questions;
  IdIndex tags;
  std::vector<std::vector<int>> tag_map;  // question column -> tag columns (empty when untagged)

  Eigen::Index num_students() const { return values.rows(); }
  Eigen::Index num_questions() const { return values.cols(); }
  Eigen::Index num_observed() const { return mask.count(); }
  bool has_tags() const { return tags.size() > 0; }
};

/// Checks the value/mask invariants; throws DataError on violation.
void validate(const ResponseDataset& dataset);

/// First-attempt dedup followed by threshold filtering iterated to a fixed point.
/// Rows and columns are ordered by id.
ResponseDataset preprocess(const std::vector<ResponseRecord>& records, int min_student_answers,
                           int min_question_answers);

/// Observed entries as records (row-major order), tags attached from the tag map.
std::vector<ResponseRecord> to_records(const ResponseDataset& dataset);

struct SplitMask {
  Mask train;
  Mask test;
};

/// Samples exactly round(fraction * |observed|) entries into train, the rest into test.
SplitMask split(const ResponseDataset& dataset, double train_fraction, std::uint64_t seed);

/// Splits only the entries selected by `subset` (e.g. carving validation out of train).
SplitMask split_subset(const Mask& subset, double train_fraction, std::uint64_t seed);

enum class InputEncoding { zero_one, signed_pm1 };

/// Encoder input for one student: train-observed values, zero elsewhere.
Eigen::VectorXd zero_impute(const ResponseDataset& dataset, const SplitMask& split,
                            Eigen::Index row, InputEncoding encoding = InputEncoding::zero_one);

/// Row-compressed list of the (question, value) pairs selected by a mask, per student.
struct ObservedEntries {
  std::vector<Eigen::Index> row_start;  // size N + 1
  std::vector<Eigen::Index> column;
  std::vector<double> value;
  Eigen::Index num_questions = 0;

  ObservedEntries() = default;
  ObservedEntries(const Eigen::MatrixXd& values, const Mask& mask);

  Eigen::Index num_students() const { return static_cast<Eigen::Index>(row_start.size()) - 1; }
  Eigen::Index count(Eigen::Index row) const { return row_start[row + 1] - row_start[row]; }
  Eigen::Index total() const { return static_cast<Eigen::Index>(column.size()); }

  /// Zero-imputed inputs for the given rows, one column per student (Q x B).
  Eigen::MatrixXd impute(const std::vector<Eigen::Index>& rows, InputEncoding encoding) const;
};

// Dataset cache: magic "VARFADS\0", u32 version, payload, crc32 trailer.
inline constexpr std::uint32_t kDatasetCacheVersion = 1;

void save_dataset(const ResponseDataset& dataset, const std::string& path);
ResponseDataset load_dataset(const std::string& path);

/// Quotes a CSV field when it holds a delimiter, quote or line break.
std::string csv_field(const std::string& field);

/// Stable hash of the student and question index maps.
std::uint64_t fingerprint(const ResponseDataset& dataset);

}  // namespace varfa
