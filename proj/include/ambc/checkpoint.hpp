#pragma once

// Checkpoint layout (little-endian):
//   "CRLD" | u32 version | u32 B, L, filters, Ma, Mb, P | u32 kernel, recon, analysis
//   | u64 count | f64 parameters (for_each_parameter order)
//   | u64 count | f64 BN running statistics (mean, var per BN layer)
//   | u32 CRC32 of everything before it

#include <filesystem>

#include "ambc/binary_io.hpp"
#include "ambc/crld.hpp"

namespace ambc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Scalar>
void save_checkpoint(const CrldModel<Scalar>& model, const std::filesystem::path& path) {
  io::BinaryWriter w;
  w.magic("CRLD");
  w.u32(kCheckpointVersion);
  const CrldHyper& h = model.hyper();
  for (Index v : {h.blocks, h.layers, h.filters, h.ma, h.mb, h.p, h.kernel}) w.u32(static_cast<std::uint32_t>(v));
  w.u32(static_cast<std::uint32_t>(h.recon));
  w.u32(h.analysis ? 1u : 0u);
  std::uint64_t count = 0;
  model.for_each_parameter([&](const std::string&, const VectorX<Scalar>& v, bool) { count += v.size(); });
  w.u64(count);
  model.for_each_parameter([&](const std::string&, const VectorX<Scalar>& v, bool) { w.f64_range(v); });
  count = 0;
  model.for_each_running_stat([&](const VectorX<Scalar>& v) { count += v.size(); });
  w.u64(count);
  model.for_each_running_stat([&](const VectorX<Scalar>& v) { w.f64_range(v); });
  w.commit(path);
}

/// Restores a model saved by save_checkpoint. The returned model's mode is unset.
template <typename Scalar = double>
CrldModel<Scalar> load_checkpoint(const std::filesystem::path& path) {
  io::BinaryReader r(path, "checkpoint");
  r.expect_magic("CRLD");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint " + path.string() + ": unsupported format version " + std::to_string(version) +
                      " (supported: " + std::to_string(kCheckpointVersion) + ")");
  r.verify_checksum();
  CrldHyper h;
  h.blocks = r.u32();
  h.layers = r.u32();
  h.filters = r.u32();
  h.ma = r.u32();
  h.mb = r.u32();
  h.p = r.u32();
  h.kernel = r.u32();
  const std::uint32_t recon = r.u32();
  if (recon > 1) throw FormatError("checkpoint " + path.string() + ": unknown reconstruction kind");
  h.recon = static_cast<ReconKind>(recon);
  h.analysis = r.u32() != 0;
  try {
    validate(h);
  } catch (const ParameterError& e) {
    throw FormatError("checkpoint " + path.string() + ": invalid hyperparameters: " + e.what());
  }
  Rng unused(0);
  CrldModel<Scalar> model = CrldModel<Scalar>::build(h, unused);

  std::uint64_t expected = 0;
  model.for_each_parameter([&](const std::string&, const VectorX<Scalar>& v, bool) { expected += v.size(); });
  if (r.u64() != expected) throw FormatError("checkpoint " + path.string() + ": parameter count mismatch");
  model.for_each_parameter([&](const std::string&, VectorX<Scalar>& v, bool) {
    for (Index i = 0; i < v.size(); ++i) v[i] = static_cast<Scalar>(r.f64());
  });
  expected = 0;
  model.for_each_running_stat([&](const VectorX<Scalar>& v) { expected += v.size(); });
  if (r.u64() != expected) throw FormatError("checkpoint " + path.string() + ": running-statistic count mismatch");
  model.for_each_running_stat([&](VectorX<Scalar>& v) {
    for (Index i = 0; i < v.size(); ++i) v[i] = static_cast<Scalar>(r.f64());
  });
  r.finish();
  return model;
}

}  // namespace ambc
