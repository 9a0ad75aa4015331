#pragma once

#include "varfa/data.hpp"
#include "varfa/mle.hpp"
#include "varfa/synth.hpp"
#include "varfa/vi.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

namespace varfa {

enum class Mode { mle, varfa };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct CsvSource {
  std::string path;
  CsvSchema schema;
  int min_student_answers = 30;
  int min_question_answers = 30;
};

struct CacheSource {
  std::string path;
};

using DataSource = std::variant<CsvSource, SynthSpec, CacheSource>;

/// Everything a run depends on. All randomness flows from the explicit seeds.
struct ExperimentConfig {
  Mode mode = Mode::varfa;
  DataSource source = SynthSpec{};
  double train_fraction = 0.5;
  std::uint64_t split_seed = 0;
  ModelHyper hyper;
  double lr = 0.05;
  int epochs = 100;
  int batch_students = 32;
  std::uint64_t seed = 0;
  int mc_samples = 1;
  int hidden_width = 64;
  KlWeighting kl_weighting = KlWeighting::per_entry;
  InputEncoding encoding = InputEncoding::zero_one;
  std::string output_dir = "out";

  MleConfig mle_config() const;
  ViConfig vi_config() const;
};

/// Parses the JSON config. Exactly one of data.csv / data.synth / data.cache must be given;
/// K and the train fraction default to 5 and 0.5 for synthetic data, 8 and 0.8 otherwise.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& config);

ResponseDataset load_source(const DataSource& source);

}  // namespace varfa
