#include "varfa/checkpoint.hpp"

#include "varfa/error.hpp"
#include "varfa/serialize.hpp"

namespace varfa {

namespace {
constexpr std::string_view kMagic{"VARFACKP", 8};
}

ViModel Checkpoint::vi_model() const {
  if (mode != Mode::varfa) throw ConfigError("checkpoint was trained in mle mode and has no encoder");
  return {encoder, factors.M, factors.mu, encoding};
}

std::vector<std::uint8_t> serialize(const Checkpoint& ck) {
  ByteWriter w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  w.u8(ck.mode == Mode::mle ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(ck.hyper.K));
  w.f64(ck.hyper.lambda_l1_M);
  w.f64(ck.hyper.lambda_l2_mu);
  w.f64(ck.hyper.lambda_l2_C);
  w.matrix(ck.factors.C);
  w.matrix(ck.factors.M);
  w.vector(ck.factors.mu);
  w.u8(ck.encoding == InputEncoding::zero_one ? 0 : 1);
  w.u8(ck.kl_weighting == KlWeighting::per_entry ? 0 : 1);
  w.matrix(ck.encoder.W1);
  w.vector(ck.encoder.b1);
  w.matrix(ck.encoder.W2);
  w.vector(ck.encoder.b2);
  w.matrix(ck.encoder.W3);
  w.vector(ck.encoder.b3);
  w.u64(ck.dataset_fingerprint);
  w.u64(ck.meta.seed);
  w.u32(static_cast<std::uint32_t>(ck.meta.epochs));
  w.f64(ck.meta.wall_seconds);
  w.f64(ck.meta.train_fraction);
  w.u64(ck.meta.split_seed);
  w.seal();
  return w.bytes();
}

Checkpoint deserialize(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  r.verify_seal();
  r.expect_magic(kMagic);
  if (const auto version = r.u32(); version != kCheckpointVersion)
    throw IoError("checkpoint version " + std::to_string(version) + " does not match supported version " +
                  std::to_string(kCheckpointVersion));
  Checkpoint ck;
  ck.mode = r.u8() == 0 ? Mode::mle : Mode::varfa;
  ck.hyper.K = static_cast<int>(r.u32());
  ck.hyper.lambda_l1_M = r.f64();
  ck.hyper.lambda_l2_mu = r.f64();
  ck.hyper.lambda_l2_C = r.f64();
  ck.factors.C = r.matrix();
  ck.factors.M = r.matrix();
  ck.factors.mu = r.vector();
  ck.encoding = r.u8() == 0 ? InputEncoding::zero_one : InputEncoding::signed_pm1;
  ck.kl_weighting = r.u8() == 0 ? KlWeighting::per_entry : KlWeighting::per_student;
  ck.encoder.W1 = r.matrix();
  ck.encoder.b1 = r.vector();
  ck.encoder.W2 = r.matrix();
  ck.encoder.b2 = r.vector();
  ck.encoder.W3 = r.matrix();
  ck.encoder.b3 = r.vector();
  ck.dataset_fingerprint = r.u64();
  ck.meta.seed = r.u64();
  ck.meta.epochs = static_cast<int>(r.u32());
  ck.meta.wall_seconds = r.f64();
  ck.meta.train_fraction = r.f64();
  ck.meta.split_seed = r.u64();
  if (!r.done()) throw IoError("trailing bytes in checkpoint");
  if (ck.factors.M.rows() != ck.hyper.K || ck.factors.mu.size() != ck.factors.M.cols())
    throw IoError("checkpoint factor shapes are inconsistent");
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) { write_bytes(path, serialize(ck)); }

Checkpoint load_checkpoint(const std::string& path) {
  return deserialize(std::move(ByteReader::from_file(path)).take_all());
}

FactorSetd prediction_factors(const Checkpoint& ck, const ResponseDataset& d, const SplitMask& split) {
  if (ck.factors.M.cols() != d.num_questions()) throw DataError("checkpoint question count does not match dataset");
  if (ck.mode == Mode::mle) {
    if (ck.factors.C.cols() != d.num_students()) throw DataError("checkpoint student count does not match dataset");
    return ck.factors;
  }
  return posterior_mean_factors(ck.vi_model(), d, split);
}

bool fingerprint_matches(const Checkpoint& ck, const ResponseDataset& d) {
  return ck.dataset_fingerprint == fingerprint(d);
}

}  // namespace varfa
