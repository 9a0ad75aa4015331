#include "varfa/config.hpp"

#include "varfa/error.hpp"

#include <fstream>

namespace varfa {

using nlohmann::json;

std::string to_string(Mode mode) { return mode == Mode::mle ? "mle" : "varfa"; }

Mode parse_mode(const std::string& text) {
  if (text == "mle") return Mode::mle;
  if (text == "varfa") return Mode::varfa;
  throw ConfigError("unknown mode '" + text + "' (expected mle or varfa)");
}

MleConfig ExperimentConfig::mle_config() const { return {hyper, lr, epochs, batch_students, seed}; }

ViConfig ExperimentConfig::vi_config() const {
  return {hyper, lr, epochs, batch_students, mc_samples, hidden_width, seed, kl_weighting, encoding};
}

namespace {

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

char read_char(const json& obj, const char* key, char fallback) {
  if (!obj.contains(key)) return fallback;
  const auto s = obj.at(key).get<std::string>();
  if (s.size() != 1) throw ConfigError(std::string("config key '") + key + "' must be a single character");
  return s[0];
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  ExperimentConfig c;
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());

  const json data = j.value("data", json::object());
  const int sources = data.contains("csv") + data.contains("synth") + data.contains("cache");
  if (sources != 1) throw ConfigError("config must name exactly one data source (data.csv, data.synth or data.cache)");
  bool synthetic = false;
  if (data.contains("csv")) {
    CsvSource src;
    const json& csv = data.at("csv");
    read(csv, "path", src.path);
    if (src.path.empty()) throw ConfigError("data.csv.path is required");
    read(csv, "student_column", src.schema.student);
    read(csv, "question_column", src.schema.question);
    read(csv, "correct_column", src.schema.correct);
    read(csv, "tag_column", src.schema.tags);
    src.schema.field_delimiter = read_char(csv, "delimiter", src.schema.field_delimiter);
    src.schema.tag_delimiter = read_char(csv, "tag_delimiter", src.schema.tag_delimiter);
    read(csv, "min_student_answers", src.min_student_answers);
    read(csv, "min_question_answers", src.min_question_answers);
    c.source = src;
  } else if (data.contains("synth")) {
    SynthSpec spec;
    const json& s = data.at("synth");
    read(s, "n", spec.N);
    read(s, "q", spec.Q);
    read(s, "k", spec.K);
    read(s, "pi", spec.pi);
    read(s, "seed", spec.seed);
    read(s, "per_coordinate_means", spec.per_coordinate_means);
    c.source = spec;
    synthetic = true;
  } else {
    CacheSource src;
    read(data.at("cache"), "path", src.path);
    if (src.path.empty()) throw ConfigError("data.cache.path is required");
    c.source = src;
  }

  c.train_fraction = synthetic ? 0.5 : 0.8;
  c.hyper.K = synthetic ? 5 : 8;
  const json split = j.value("split", json::object());
  read(split, "train_fraction", c.train_fraction);
  read(split, "seed", c.split_seed);

  const json model = j.value("model", json::object());
  read(model, "k", c.hyper.K);
  read(model, "lambda_l1_m", c.hyper.lambda_l1_M);
  read(model, "lambda_l2_mu", c.hyper.lambda_l2_mu);
  read(model, "lambda_l2_c", c.hyper.lambda_l2_C);

  const json train = j.value("train", json::object());
  read(train, "lr", c.lr);
  read(train, "epochs", c.epochs);
  read(train, "batch_students", c.batch_students);
  read(train, "seed", c.seed);
  read(train, "mc_samples", c.mc_samples);
  read(train, "hidden_width", c.hidden_width);
  if (train.contains("kl_weighting")) {
    const auto s = train.at("kl_weighting").get<std::string>();
    if (s == "per_entry") c.kl_weighting = KlWeighting::per_entry;
    else if (s == "per_student") c.kl_weighting = KlWeighting::per_student;
    else throw ConfigError("kl_weighting must be per_entry or per_student");
  }
  if (train.contains("input_encoding")) {
    const auto s = train.at("input_encoding").get<std::string>();
    if (s == "zero_one") c.encoding = InputEncoding::zero_one;
    else if (s == "signed") c.encoding = InputEncoding::signed_pm1;
    else throw ConfigError("input_encoding must be zero_one or signed");
  }
  read(j, "output_dir", c.output_dir);

  if (c.hyper.K < 1) throw ConfigError("model.k must be >= 1");
  if (c.epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (!(c.lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (c.batch_students < 1) throw ConfigError("train.batch_students must be >= 1");
  if (c.hyper.lambda_l1_M < 0 || c.hyper.lambda_l2_mu < 0 || c.hyper.lambda_l2_C < 0)
    throw ConfigError("regularization weights must be nonnegative");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw ConfigError("split.train_fraction must lie in (0,1)");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return parse_config(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  json data;
  if (const auto* csv = std::get_if<CsvSource>(&c.source)) {
    data["csv"] = {{"path", csv->path},
                   {"student_column", csv->schema.student},
                   {"question_column", csv->schema.question},
                   {"correct_column", csv->schema.correct},
                   {"tag_column", csv->schema.tags},
                   {"delimiter", std::string(1, csv->schema.field_delimiter)},
                   {"tag_delimiter", std::string(1, csv->schema.tag_delimiter)},
                   {"min_student_answers", csv->min_student_answers},
                   {"min_question_answers", csv->min_question_answers}};
  } else if (const auto* s = std::get_if<SynthSpec>(&c.source)) {
    data["synth"] = {{"n", s->N}, {"q", s->Q}, {"k", s->K}, {"pi", s->pi}, {"seed", s->seed},
                     {"per_coordinate_means", s->per_coordinate_means}};
  } else {
    data["cache"] = {{"path", std::get<CacheSource>(c.source).path}};
  }
  return {{"mode", to_string(c.mode)},
          {"data", data},
          {"split", {{"train_fraction", c.train_fraction}, {"seed", c.split_seed}}},
          {"model",
           {{"k", c.hyper.K},
            {"lambda_l1_m", c.hyper.lambda_l1_M},
            {"lambda_l2_mu", c.hyper.lambda_l2_mu},
            {"lambda_l2_c", c.hyper.lambda_l2_C}}},
          {"train",
           {{"lr", c.lr},
            {"epochs", c.epochs},
            {"batch_students", c.batch_students},
            {"seed", c.seed},
            {"mc_samples", c.mc_samples},
            {"hidden_width", c.hidden_width},
            {"kl_weighting", c.kl_weighting == KlWeighting::per_entry ? "per_entry" : "per_student"},
            {"input_encoding", c.encoding == InputEncoding::zero_one ? "zero_one" : "signed"}}},
          {"output_dir", c.output_dir}};
}

ResponseDataset load_source(const DataSource& source) {
  if (const auto* csv = std::get_if<CsvSource>(&source))
    return preprocess(ingest_csv_file(csv->path, csv->schema), csv->min_student_answers, csv->min_question_answers);
  if (const auto* spec = std::get_if<SynthSpec>(&source)) return to_dataset(generate(*spec));
  return load_dataset(std::get<CacheSource>(source).path);
}

}  // namespace varfa
