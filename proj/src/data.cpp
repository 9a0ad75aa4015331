#include "varfa/data.hpp"

#include "varfa/error.hpp"
#include "varfa/rng.hpp"
#include "varfa/serialize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace varfa {

namespace {

// RFC 4180 style record splitting; quoted fields may contain delimiters and "" escapes.
// Returns false at end of input.
bool read_csv_row(std::istream& in, char delim, std::vector<std::string>& fields) {
  fields.clear();
  std::string line;
  if (!std::getline(in, line)) return false;
  std::string field;
  bool quoted = false;
  for (std::size_t k = 0;; ++k) {
    if (k == line.size()) {
      if (quoted) {
        // Quoted field spans a newline.
        std::string next;
        if (!std::getline(in, next)) break;
        field.push_back('\n');
        line += '\n' + next;
        k = line.size() - next.size() - 1;
        continue;
      }
      break;
    }
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          field.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r' || k + 1 != line.size()) {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return true;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::optional<int> parse_binary(const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  if (v == 0.0) return 0;
  if (v == 1.0) return 1;
  return std::nullopt;
}

}  // namespace

std::vector<ResponseRecord> ingest_csv(std::istream& in, const CsvSchema& schema) {
  std::vector<std::string> header;
  if (!read_csv_row(in, schema.field_delimiter, header)) throw DataError("empty CSV input: missing header row");
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);

  auto column = [&](const std::string& name) -> std::size_t {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (trim(header[k]) == name) return k;
    throw DataError("schema error: missing column '" + name + "'");
  };
  const std::size_t student_col = column(schema.student);
  const std::size_t question_col = column(schema.question);
  const std::size_t correct_col = column(schema.correct);
  const std::optional<std::size_t> tag_col =
      schema.tags.empty() ? std::nullopt : std::optional<std::size_t>(column(schema.tags));

  std::vector<ResponseRecord> records;
  std::vector<std::string> fields;
  std::size_t row = 0;
  while (read_csv_row(in, schema.field_delimiter, fields)) {
    ++row;
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;  // blank line
    if (fields.size() != header.size())
      throw DataError("malformed row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    const auto correct = parse_binary(fields[correct_col]);
    if (!correct)
      throw DataError("malformed row " + std::to_string(row) + ": correctness '" + fields[correct_col] +
                      "' is not 0 or 1");
    ResponseRecord rec;
    rec.student_id = trim(fields[student_col]);
    rec.question_id = trim(fields[question_col]);
    rec.correct = *correct;
    rec.order_index = records.size();
    if (tag_col) {
      const std::string& tags = fields[*tag_col];
      std::size_t start = 0;
      while (start <= tags.size()) {
        auto end = tags.find(schema.tag_delimiter, start);
        if (end == std::string::npos) end = tags.size();
        std::string tag = trim(tags.substr(start, end - start));
        if (!tag.empty()) rec.tag_ids.insert(std::move(tag));
        start = end + 1;
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<ResponseRecord> ingest_csv_file(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return ingest_csv(in, schema);
}

IdIndex::IdIndex(std::vector<std::string> ids) : ids_(std::move(ids)) {
  lookup_.reserve(ids_.size());
  for (std::size_t k = 0; k < ids_.size(); ++k)
    if (!lookup_.emplace(ids_[k], k).second) throw DataError("duplicate id '" + ids_[k] + "'");
}

std::optional<std::size_t> IdIndex::find(const std::string& id) const {
  const auto it = lookup_.find(id);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

void validate(const ResponseDataset& d) {
  if (d.mask.rows() != d.values.rows() || d.mask.cols() != d.values.cols())
    throw DataError("values and mask shapes differ");
  if (static_cast<Eigen::Index>(d.students.size()) != d.values.rows() ||
      static_cast<Eigen::Index>(d.questions.size()) != d.values.cols())
    throw DataError("index maps do not match matrix shape");
  for (Eigen::Index j = 0; j < d.values.cols(); ++j)
    for (Eigen::Index i = 0; i < d.values.rows(); ++i) {
      const double v = d.values(i, j);
      if (d.mask(i, j) ? (v != 0.0 && v != 1.0) : v != 0.0)
        throw DataError("value/mask invariant violated at (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
  if (d.has_tags() && static_cast<Eigen::Index>(d.tag_map.size()) != d.values.cols())
    throw DataError("tag map size does not match question count");
}

ResponseDataset preprocess(const std::vector<ResponseRecord>& records, int min_student_answers,
                           int min_question_answers) {
  if (min_student_answers < 1 || min_question_answers < 1) throw ConfigError("answer thresholds must be >= 1");

  // First attempt per (student, question).
  std::map<std::pair<std::string, std::string>, const ResponseRecord*> first;
  std::map<std::string, std::set<std::string>> question_tags;
  for (const auto& rec : records) {
    auto [it, inserted] = first.try_emplace({rec.student_id, rec.question_id}, &rec);
    if (!inserted && rec.order_index < it->second->order_index) it->second = &rec;
    if (!rec.tag_ids.empty()) question_tags[rec.question_id].insert(rec.tag_ids.begin(), rec.tag_ids.end());
  }

  std::vector<const ResponseRecord*> kept;
  kept.reserve(first.size());
  for (const auto& [key, rec] : first) kept.push_back(rec);

  // Threshold filtering until no row or column drops out.
  for (;;) {
    std::map<std::string, int> per_student, per_question;
    for (const auto* rec : kept) {
      ++per_student[rec->student_id];
      ++per_question[rec->question_id];
    }
    const auto before = kept.size();
    std::erase_if(kept, [&](const ResponseRecord* rec) {
      return per_student[rec->student_id] < min_student_answers ||
             per_question[rec->question_id] < min_question_answers;
    });
    if (kept.size() == before) break;
  }
  if (kept.empty()) throw DataError("empty dataset after threshold filtering");

  std::set<std::string> student_ids, question_ids, tag_ids;
  for (const auto* rec : kept) {
    student_ids.insert(rec->student_id);
    question_ids.insert(rec->question_id);
  }
  for (const auto& q : question_ids)
    if (auto it = question_tags.find(q); it != question_tags.end()) tag_ids.insert(it->second.begin(), it->second.end());

  ResponseDataset d;
  d.students = IdIndex({student_ids.begin(), student_ids.end()});
  d.questions = IdIndex({question_ids.begin(), question_ids.end()});
  d.tags = IdIndex({tag_ids.begin(), tag_ids.end()});
  d.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(student_ids.size()),
                                   static_cast<Eigen::Index>(question_ids.size()));
  d.mask = Mask::Constant(d.values.rows(), d.values.cols(), false);
  for (const auto* rec : kept) {
    const auto i = static_cast<Eigen::Index>(*d.students.find(rec->student_id));
    const auto j = static_cast<Eigen::Index>(*d.questions.find(rec->question_id));
    d.values(i, j) = rec->correct;
    d.mask(i, j) = true;
  }
  if (d.has_tags()) {
    d.tag_map.resize(question_ids.size());
    for (std::size_t j = 0; j < question_ids.size(); ++j)
      if (auto it = question_tags.find(d.questions.id(j)); it != question_tags.end())
        for (const auto& t : it->second) d.tag_map[j].push_back(static_cast<int>(*d.tags.find(t)));
  }
  return d;
}

std::vector<ResponseRecord> to_records(const ResponseDataset& d) {
  std::vector<ResponseRecord> out;
  for (Eigen::Index i = 0; i < d.num_students(); ++i)
    for (Eigen::Index j = 0; j < d.num_questions(); ++j) {
      if (!d.mask(i, j)) continue;
      ResponseRecord rec;
      rec.student_id = d.students.id(i);
      rec.question_id = d.questions.id(j);
      rec.correct = d.values(i, j) != 0.0 ? 1 : 0;
      rec.order_index = out.size();
      if (d.has_tags())
        for (int t : d.tag_map[j]) rec.tag_ids.insert(d.tags.id(t));
      out.push_back(std::move(rec));
    }
  return out;
}

SplitMask split_subset(const Mask& subset, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0,1), got " + std::to_string(train_fraction));
  std::vector<Eigen::Index> observed;  // row-major linear positions
  for (Eigen::Index i = 0; i < subset.rows(); ++i)
    for (Eigen::Index j = 0; j < subset.cols(); ++j)
      if (subset(i, j)) observed.push_back(i * subset.cols() + j);
  if (observed.size() < 2) throw DataError("split needs at least 2 observed entries");

  // Partial Fisher-Yates: the first n_train slots become a uniform sample without replacement.
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(observed.size())));
  CounterRng rng(seed, {0x5b117});
  for (std::size_t k = 0; k < n_train && k + 1 < observed.size(); ++k)
    std::swap(observed[k], observed[k + rng.below(observed.size() - k)]);

  SplitMask s{Mask::Constant(subset.rows(), subset.cols(), false), subset};
  for (std::size_t k = 0; k < n_train; ++k) {
    const auto i = observed[k] / subset.cols();
    const auto j = observed[k] % subset.cols();
    s.train(i, j) = true;
    s.test(i, j) = false;
  }
  return s;
}

SplitMask split(const ResponseDataset& dataset, double train_fraction, std::uint64_t seed) {
  return split_subset(dataset.mask, train_fraction, seed);
}

Eigen::VectorXd zero_impute(const ResponseDataset& dataset, const SplitMask& split, Eigen::Index row,
                            InputEncoding encoding) {
  if (row < 0 || row >= dataset.num_students()) throw DataError("student row out of range");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dataset.num_questions());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (!split.train(row, j)) continue;
    const double y = dataset.values(row, j);
    x[j] = encoding == InputEncoding::zero_one ? y : 2.0 * y - 1.0;
  }
  return x;
}

ObservedEntries::ObservedEntries(const Eigen::MatrixXd& values, const Mask& mask) : num_questions(values.cols()) {
  row_start.reserve(static_cast<std::size_t>(values.rows()) + 1);
  row_start.push_back(0);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j)
      if (mask(i, j)) {
        column.push_back(j);
        value.push_back(values(i, j));
      }
    row_start.push_back(static_cast<Eigen::Index>(column.size()));
  }
}

Eigen::MatrixXd ObservedEntries::impute(const std::vector<Eigen::Index>& rows, InputEncoding encoding) const {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(num_questions, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t b = 0; b < rows.size(); ++b)
    for (Eigen::Index e = row_start[rows[b]]; e < row_start[rows[b] + 1]; ++e)
      x(column[e], static_cast<Eigen::Index>(b)) = encoding == InputEncoding::zero_one ? value[e] : 2.0 * value[e] - 1.0;
  return x;
}

namespace {
constexpr std::string_view kDatasetMagic{"VARFADS\0", 8};

void write_ids(ByteWriter& w, const IdIndex& index) {
  w.u64(index.size());
  for (const auto& id : index.ids()) w.str(id);
}

IdIndex read_ids(ByteReader& r) {
  const auto n = r.u64();
  std::vector<std::string> ids;
  for (std::uint64_t k = 0; k < n; ++k) ids.push_back(r.str());
  return IdIndex(std::move(ids));
}
}  // namespace

void save_dataset(const ResponseDataset& d, const std::string& path) {
  validate(d);
  ByteWriter w;
  w.raw(kDatasetMagic);
  w.u32(kDatasetCacheVersion);
  w.u64(static_cast<std::uint64_t>(d.num_students()));
  w.u64(static_cast<std::uint64_t>(d.num_questions()));
  for (Eigen::Index i = 0; i < d.num_students(); ++i)
    for (Eigen::Index j = 0; j < d.num_questions(); ++j)
      w.u8(static_cast<std::uint8_t>((d.mask(i, j) ? 2 : 0) | (d.values(i, j) != 0.0 ? 1 : 0)));
  write_ids(w, d.students);
  write_ids(w, d.questions);
  write_ids(w, d.tags);
  w.u64(d.tag_map.size());
  for (const auto& tags : d.tag_map) {
    w.u64(tags.size());
    for (int t : tags) w.u32(static_cast<std::uint32_t>(t));
  }
  w.seal();
  w.write_file(path);
}

ResponseDataset load_dataset(const std::string& path) {
  auto r = ByteReader::from_file(path);
  r.verify_seal();
  r.expect_magic(kDatasetMagic);
  if (const auto version = r.u32(); version != kDatasetCacheVersion)
    throw IoError("dataset cache version " + std::to_string(version) + " is not supported");
  const auto n = static_cast<Eigen::Index>(r.u64());
  const auto q = static_cast<Eigen::Index>(r.u64());
  ResponseDataset d;
  d.values = Eigen::MatrixXd::Zero(n, q);
  d.mask = Mask::Constant(n, q, false);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < q; ++j) {
      const auto cell = r.u8();
      d.mask(i, j) = (cell & 2) != 0;
      d.values(i, j) = (cell & 1) != 0 ? 1.0 : 0.0;
    }
  d.students = read_ids(r);
  d.questions = read_ids(r);
  d.tags = read_ids(r);
  d.tag_map.resize(r.u64());
  for (auto& tags : d.tag_map) {
    tags.resize(r.u64());
    for (auto& t : tags) t = static_cast<int>(r.u32());
  }
  if (!r.done()) throw IoError("trailing bytes in dataset cache");
  validate(d);
  return d;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

std::uint64_t fingerprint(const ResponseDataset& d) {
  ByteWriter w;
  write_ids(w, d.students);
  write_ids(w, d.questions);
  const auto& b = w.bytes();
  // Two independent crc passes widen the hash to 64 bits.
  const std::uint64_t lo = crc32(b);
  std::vector<std::uint8_t> reversed(b.rbegin(), b.rend());
  const std::uint64_t hi = crc32(reversed);
  return (hi << 32) | lo;
}

}  // namespace varfa
