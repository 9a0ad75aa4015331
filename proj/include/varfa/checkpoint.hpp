#pragma once

#include "varfa/config.hpp"
#include "varfa/data.hpp"
#include "varfa/model.hpp"
#include "varfa/vi.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace varfa {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingMeta {
  std::uint64_t seed = 0;
  int epochs = 0;
  double wall_seconds = 0.0;
  double train_fraction = 0.0;
  std::uint64_t split_seed = 0;
};

/// Trained state of either trainer. In varfa mode `factors.C` is empty and the
/// encoder is populated; in mle mode the encoder is empty.
struct Checkpoint {
  Mode mode = Mode::mle;
  ModelHyper hyper;
  FactorSetd factors;
  EncoderParamsd encoder;
  InputEncoding encoding = InputEncoding::zero_one;
  KlWeighting kl_weighting = KlWeighting::per_entry;
  std::uint64_t dataset_fingerprint = 0;
  TrainingMeta meta;

  ViModel vi_model() const;
};

/// Layout: "VARFACKP" magic, u32 version, little-endian payload, crc32 trailer.
std::vector<std::uint8_t> serialize(const Checkpoint& checkpoint);
Checkpoint deserialize(std::vector<std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Factors used for point prediction: the stored C for mle, posterior means for varfa.
FactorSetd prediction_factors(const Checkpoint& checkpoint, const ResponseDataset& dataset, const SplitMask& split);

bool fingerprint_matches(const Checkpoint& checkpoint, const ResponseDataset& dataset);

}  // namespace varfa
