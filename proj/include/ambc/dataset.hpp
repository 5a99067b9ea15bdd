#pragma once

// Supervised examples (Y^(k), X^(k)): stacked noisy pilots and the noiseless
// channel matrix they were generated from.
//
// File layout (little-endian): "AMBD" | u32 version | meta | K examples of
// (Ma*Mb*P f64 observations, Ma*Mb f64 label) | u32 CRC32.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ambc/channel_sim.hpp"
#include "ambc/tensor.hpp"

namespace ambc {

inline constexpr std::uint32_t kDatasetVersion = 1;

/// Per-example SNR drawn uniformly from [min_db, max_db] when enabled.
struct MixedSnr {
  bool enabled = false;
  double min_db = -10.0;
  double max_db = 12.0;

  friend bool operator==(const MixedSnr&, const MixedSnr&) = default;
};

struct Dataset {
  SystemConfig config;
  Link link = Link::direct;
  std::uint64_t seed = 0;
  MixedSnr mixed;
  Index ma = 0;
  Index mb = 0;
  Index p = 0;
  std::vector<double> inputs;  // K x (Ma Mb P), each example Ma x Mb x P row-major
  std::vector<double> labels;  // K x (Ma Mb)

  Index size() const { return input_width() == 0 ? 0 : static_cast<Index>(inputs.size()) / input_width(); }
  Index input_width() const { return ma * mb * p; }
  Index label_width() const { return ma * mb; }
};

/// K i.i.d. examples; example k uses its own generator seeded from (seed, k),
/// so the result does not depend on generation order.
Dataset generate_dataset(const SystemConfig& cfg, Link link, Index k, std::uint64_t seed, MixedSnr mixed = {});

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Gathers the selected examples into N x Ma x Mb x P inputs and N x Ma x Mb x 1 labels.
template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> gather_batch(const Dataset& ds, const std::vector<Index>& indices,
                                                       std::size_t begin, std::size_t end) {
  const Index n = static_cast<Index>(end - begin);
  Tensor<Scalar> y({n, ds.ma, ds.mb, ds.p});
  Tensor<Scalar> x({n, ds.ma, ds.mb, 1});
  const Index wi = ds.input_width(), wl = ds.label_width();
  for (Index b = 0; b < n; ++b) {
    const Index k = indices[begin + static_cast<std::size_t>(b)];
    const double* src_y = ds.inputs.data() + k * wi;
    const double* src_x = ds.labels.data() + k * wl;
    for (Index i = 0; i < wi; ++i) y[b * wi + i] = static_cast<Scalar>(src_y[i]);
    for (Index i = 0; i < wl; ++i) x[b * wl + i] = static_cast<Scalar>(src_x[i]);
  }
  return {std::move(y), std::move(x)};
}

}  // namespace ambc
