#pragma once

// NMSE sweeps over SNR or pilot count, and operation-count accounting.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ambc/config.hpp"
#include "ambc/estimators.hpp"

namespace ambc {

struct NmseRow {
  Link link = Link::direct;
  Method method = Method::ls;
  double snr_db = 0.0;
  Index p = 0;
  double nmse = 0.0;
  double ci_half_width = 0.0;
  Index trials = 0;
  double wall_time_s = 0.0;
};

struct NmseReport {
  std::vector<NmseRow> rows;

  static constexpr const char* kCsvHeader = "link,method,snr_db,p,nmse,ci_half_width,trials,wall_time_s";
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
  /// Row for (link, method, snr, p), or nullptr.
  const NmseRow* find(Link link, Method method, double snr_db, Index p) const;
};

struct SweepOptions {
  /// Train and save missing CRLD checkpoints instead of failing.
  bool train_missing = false;
  /// Suppresses wall-clock timings so identical seeds give identical bytes.
  bool strict = false;
  std::function<void(const std::string&)> log;
};

/// Checkpoint file expected for one CRLD operating point.
std::filesystem::path crld_checkpoint_path(const std::filesystem::path& dir, Link link, double snr_db, Index p);

/// Operating point for one sweep axis value.
SystemConfig sweep_point(const SystemConfig& base, SweepAxis axis, double value);

/// Trains a float CRLD at `point` per `cfg` and writes the checkpoint
/// (plus "<checkpoint>.history.csv"). Returns the validation history.
TrainHistory train_operating_point(const AppConfig& cfg, const SystemConfig& point, Link link,
                                   const std::filesystem::path& checkpoint,
                                   const std::function<void(const std::string&)>& log = {});

/// One row per (link, axis value, method) in plan order; each (link, value)
/// point uses its own seed and a test set shared by all methods.
NmseReport run_sweep(const AppConfig& cfg, const SweepOptions& opts = {});

struct LayerCost {
  Index layer;  // 1-based within a block
  Index in_depth;
  Index side;
  Index out_depth;
  Index mults_per_pixel;  // n_{l-1} s_l^2 n_l
};

struct ComplexityReport {
  Index m = 0;
  Index p = 0;
  Index blocks = 0;
  std::vector<LayerCost> layers;
  Index ls_ops = 0;          // M P
  Index mmse_ops = 0;        // P^3 + M P^2
  Index crld_online = 0;     // B M sum_l n_{l-1} s_l^2 n_l
  Index training_examples = 0;
  Index training_iterations = 0;
  double crld_offline = 0.0;  // N_t I B M sum_l ...
  double ls_seconds = -1.0;
  double mmse_seconds = -1.0;
  double crld_seconds = -1.0;

  std::string to_text() const;
};

/// Counts are exact instantiations of the symbolic orders; timings (per
/// estimate) are measured on the host only when `measure` is set.
ComplexityReport complexity_report(const AppConfig& cfg, bool measure = true);

}  // namespace ambc
