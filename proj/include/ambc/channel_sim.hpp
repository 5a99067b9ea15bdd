#pragma once

// Correlated real-valued Rayleigh channels and pilot-phase observations for a
// single-tag ambient backscatter link. Pilots are s(n) = 1 throughout phases
// A (tag absorbing, observes h) and B (tag reflecting, observes w).

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ambc/rng.hpp"
#include "ambc/types.hpp"

namespace ambc {

enum class CorrelationModel { identity, exponential };

struct CorrelationSpec {
  CorrelationModel model = CorrelationModel::exponential;
  double rho = 0.0;
  Index dim = 64;

  friend bool operator==(const CorrelationSpec&, const CorrelationSpec&) = default;
};

enum class Link { direct, composite };

const char* to_string(Link link);
Link link_from_string(const std::string& name);
const char* to_string(CorrelationModel model);
CorrelationModel correlation_model_from_string(const std::string& name);

struct SystemConfig {
  Index m = 64;
  Index ma = 8;
  Index mb = 8;
  double snr_db = -6.0;  // +inf selects the noiseless channel
  double zeta_db = -5.0;
  double f = 1.0;
  CorrelationSpec corr_h{CorrelationModel::exponential, 0.9, 64};
  CorrelationSpec corr_g{CorrelationModel::exponential, 0.9, 64};
  Index na = 2;
  Index nb = 2;
  std::uint64_t seed = 1;
  // Recorded only; data transmission is not simulated.
  Index nc = 0;
  Index frames = 1;

  /// Pilot count of the phase that observes `link`.
  Index pilots(Link link) const { return link == Link::direct ? na : nb; }

  friend bool operator==(const SystemConfig&, const SystemConfig&) = default;
};

/// Throws ParameterError on Ma*Mb != M, zero pilot counts, or bad correlation specs.
void validate(const SystemConfig& cfg);

/// R[i][j] = rho^|i-j| (exponential) or the identity.
MatrixXd build_correlation_matrix(const CorrelationSpec& spec);

/// L z with L the lower Cholesky factor of `r` and z ~ N(0, I).
VectorXd sample_gaussian_vector(const MatrixXd& r, Rng& rng);

/// Reusable sampler that factors the covariance once.
class GaussianSampler {
 public:
  explicit GaussianSampler(const MatrixXd& covariance);
  VectorXd operator()(Rng& rng) const;
  const MatrixXd& factor() const { return lower_; }

 private:
  MatrixXd lower_;
};

struct NoiseAndAlpha {
  double sigma_u_sq;
  double alpha;
};

NoiseAndAlpha derive_noise_and_alpha(const SystemConfig& cfg);

struct ChannelRealization {
  VectorXd h;
  VectorXd g;
  VectorXd w;
  double alpha = 0.0;
  double f = 1.0;
};

/// Pilot observations stacked as Ma x Mb x P, row-major with P fastest.
struct ObservationTensor {
  Index ma = 0;
  Index mb = 0;
  Index p = 0;
  Link link = Link::direct;
  std::vector<double> data;   // index (r * mb + c) * p + k
  std::vector<double> truth;  // index r * mb + c; empty in deployment mode

  double& at(Index r, Index c, Index k) { return data[static_cast<std::size_t>((r * mb + c) * p + k)]; }
  double at(Index r, Index c, Index k) const { return data[static_cast<std::size_t>((r * mb + c) * p + k)]; }
  bool has_truth() const { return !truth.empty(); }
};

/// Packs P M-vectors (one per pilot) into the stacked layout.
ObservationTensor stack_observations(const std::vector<VectorXd>& samples, Index ma, Index mb, Link link);
/// Inverse of stack_observations.
std::vector<VectorXd> unstack_observations(const ObservationTensor& obs);

/// Correlation matrices and derived scalars of one operating point.
class ChannelModel {
 public:
  explicit ChannelModel(const SystemConfig& cfg);

  const SystemConfig& config() const { return cfg_; }
  const MatrixXd& r_h() const { return r_h_; }
  const MatrixXd& r_g() const { return r_g_; }
  /// R_h + alpha^2 f^2 R_g.
  MatrixXd r_w() const;
  /// Correlation of the channel observed on `link`.
  MatrixXd correlation(Link link) const { return link == Link::direct ? r_h_ : r_w(); }
  double sigma_u_sq() const { return derived_.sigma_u_sq; }
  double alpha() const { return derived_.alpha; }

  ChannelRealization draw(Rng& rng) const;
  /// P noisy unit-pilot observations of `x` with noise variance `sigma_u_sq`.
  ObservationTensor observe(const VectorXd& x, Index pilots, Link link, double sigma_u_sq, Rng& rng) const;
  std::pair<ObservationTensor, ObservationTensor> pilot_frame(const ChannelRealization& real, Rng& rng) const;

 private:
  SystemConfig cfg_;
  MatrixXd r_h_;
  MatrixXd r_g_;
  NoiseAndAlpha derived_;
  GaussianSampler h_sampler_;
  GaussianSampler g_sampler_;
};

ChannelRealization draw_realization(const SystemConfig& cfg, Rng& rng);

/// Phase A observes h over Na pilots, phase B observes w over Nb pilots.
std::pair<ObservationTensor, ObservationTensor> generate_pilot_frame(const SystemConfig& cfg,
                                                                     const ChannelRealization& real, Rng& rng);

}  // namespace ambc
