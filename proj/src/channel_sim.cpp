#include "ambc/channel_sim.hpp"

#include <cmath>

#include "ambc/errors.hpp"

namespace ambc {

const char* to_string(Link link) { return link == Link::direct ? "direct" : "composite"; }

Link link_from_string(const std::string& name) {
  if (name == "direct" || name == "h") return Link::direct;
  if (name == "composite" || name == "w") return Link::composite;
  throw ParameterError("unknown link '" + name + "' (expected direct or composite)");
}

const char* to_string(CorrelationModel model) {
  return model == CorrelationModel::identity ? "identity" : "exponential";
}

CorrelationModel correlation_model_from_string(const std::string& name) {
  if (name == "identity") return CorrelationModel::identity;
  if (name == "exponential") return CorrelationModel::exponential;
  throw ParameterError("unknown correlation model '" + name + "' (expected identity or exponential)");
}

namespace {

void validate(const CorrelationSpec& spec) {
  if (spec.dim <= 0) throw ParameterError("correlation dimension must be positive");
  if (!(spec.rho >= 0.0 && spec.rho < 1.0)) throw ParameterError("rho must lie in [0, 1)");
}

}  // namespace

void validate(const SystemConfig& cfg) {
  if (cfg.m <= 0 || cfg.ma <= 0 || cfg.mb <= 0) throw ParameterError("antenna dimensions must be positive");
  if (cfg.ma * cfg.mb != cfg.m) throw ParameterError("ma * mb must equal m");
  if (cfg.na < 1 || cfg.nb < 1) throw ParameterError("pilot counts na and nb must be at least 1");
  if (std::isnan(cfg.snr_db) || cfg.snr_db == -INFINITY) throw ParameterError("snr_db must be a number or +inf");
  if (!std::isfinite(cfg.zeta_db) && cfg.zeta_db != -INFINITY) throw ParameterError("zeta_db must be finite or -inf");
  if (!std::isfinite(cfg.f)) throw ParameterError("f must be finite");
  validate(cfg.corr_h);
  validate(cfg.corr_g);
  if (cfg.corr_h.dim != cfg.m || cfg.corr_g.dim != cfg.m) throw ParameterError("correlation dimension must equal m");
}

MatrixXd build_correlation_matrix(const CorrelationSpec& spec) {
  validate(spec);
  const Index n = spec.dim;
  if (spec.model == CorrelationModel::identity) return MatrixXd::Identity(n, n);
  MatrixXd r(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) r(i, j) = i == j ? 1.0 : std::pow(spec.rho, static_cast<double>(std::abs(i - j)));
  return r;
}

GaussianSampler::GaussianSampler(const MatrixXd& covariance) {
  if (covariance.rows() != covariance.cols() || covariance.rows() == 0)
    throw ParameterError("covariance must be square and non-empty");
  Eigen::LLT<MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) throw NumericError("Cholesky factorization failed: covariance not positive definite");
  lower_ = llt.matrixL();
}

VectorXd GaussianSampler::operator()(Rng& rng) const {
  VectorXd z(lower_.rows());
  for (Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return lower_.triangularView<Eigen::Lower>() * z;
}

VectorXd sample_gaussian_vector(const MatrixXd& r, Rng& rng) { return GaussianSampler(r)(rng); }

NoiseAndAlpha derive_noise_and_alpha(const SystemConfig& cfg) {
  // Unit diagonals give trace(R) = M, but the expressions stay general.
  const double tr_h = build_correlation_matrix(cfg.corr_h).trace();
  const double tr_g = build_correlation_matrix(cfg.corr_g).trace();
  if (!(tr_h > 0.0) || !(tr_g > 0.0)) throw ParameterError("correlation traces must be positive");
  NoiseAndAlpha out{};
  out.sigma_u_sq = tr_h / (static_cast<double>(cfg.m) * std::pow(10.0, cfg.snr_db / 10.0));
  if (cfg.zeta_db == -INFINITY) {
    out.alpha = 0.0;
  } else {
    if (cfg.f == 0.0) throw ParameterError("f = 0 cannot realize a finite zeta");
    out.alpha = std::sqrt(std::pow(10.0, cfg.zeta_db / 10.0) * tr_h / (cfg.f * cfg.f * tr_g));
  }
  return out;
}

ObservationTensor stack_observations(const std::vector<VectorXd>& samples, Index ma, Index mb, Link link) {
  if (samples.empty()) throw ParameterError("at least one observation is required");
  ObservationTensor obs;
  obs.ma = ma;
  obs.mb = mb;
  obs.p = static_cast<Index>(samples.size());
  obs.link = link;
  obs.data.resize(static_cast<std::size_t>(ma * mb * obs.p));
  for (Index k = 0; k < obs.p; ++k) {
    const VectorXd& y = samples[static_cast<std::size_t>(k)];
    if (y.size() != ma * mb) throw ShapeError("observation length must equal ma * mb");
    for (Index m = 0; m < ma * mb; ++m) obs.data[static_cast<std::size_t>(m * obs.p + k)] = y[m];
  }
  return obs;
}

std::vector<VectorXd> unstack_observations(const ObservationTensor& obs) {
  std::vector<VectorXd> out(static_cast<std::size_t>(obs.p), VectorXd(obs.ma * obs.mb));
  for (Index k = 0; k < obs.p; ++k)
    for (Index m = 0; m < obs.ma * obs.mb; ++m)
      out[static_cast<std::size_t>(k)][m] = obs.data[static_cast<std::size_t>(m * obs.p + k)];
  return out;
}

ChannelModel::ChannelModel(const SystemConfig& cfg)
    : cfg_((validate(cfg), cfg)),
      r_h_(build_correlation_matrix(cfg.corr_h)),
      r_g_(build_correlation_matrix(cfg.corr_g)),
      derived_(derive_noise_and_alpha(cfg)),
      h_sampler_(r_h_),
      g_sampler_(r_g_) {}

MatrixXd ChannelModel::r_w() const {
  const double s = derived_.alpha * cfg_.f;
  return r_h_ + s * s * r_g_;
}

ChannelRealization ChannelModel::draw(Rng& rng) const {
  ChannelRealization real;
  real.h = h_sampler_(rng);
  real.g = g_sampler_(rng);
  real.alpha = derived_.alpha;
  real.f = cfg_.f;
  real.w = real.h + (real.alpha * real.f) * real.g;
  return real;
}

std::pair<ObservationTensor, ObservationTensor> ChannelModel::pilot_frame(const ChannelRealization& real,
                                                                          Rng& rng) const {
  if (real.h.size() != cfg_.m || real.w.size() != cfg_.m) throw ShapeError("realization length must equal m");
  ObservationTensor a = observe(real.h, cfg_.na, Link::direct, derived_.sigma_u_sq, rng);
  ObservationTensor b = observe(real.w, cfg_.nb, Link::composite, derived_.sigma_u_sq, rng);
  return {std::move(a), std::move(b)};
}

ObservationTensor ChannelModel::observe(const VectorXd& x, Index pilots, Link link, double sigma_u_sq,
                                        Rng& rng) const {
  if (pilots < 1) throw ParameterError("pilot count must be at least 1");
  const double sigma = std::sqrt(sigma_u_sq);
  ObservationTensor obs;
  obs.ma = cfg_.ma;
  obs.mb = cfg_.mb;
  obs.p = pilots;
  obs.link = link;
  obs.data.resize(static_cast<std::size_t>(x.size() * pilots));
  // Pilot-major draw order: the full noise vector u(n) for pilot n, then n + 1.
  for (Index n = 0; n < pilots; ++n)
    for (Index i = 0; i < x.size(); ++i)
      obs.data[static_cast<std::size_t>(i * pilots + n)] = x[i] + (sigma > 0.0 ? sigma * rng.normal() : 0.0);
  obs.truth.assign(x.data(), x.data() + x.size());
  return obs;
}

ChannelRealization draw_realization(const SystemConfig& cfg, Rng& rng) { return ChannelModel(cfg).draw(rng); }

std::pair<ObservationTensor, ObservationTensor> generate_pilot_frame(const SystemConfig& cfg,
                                                                     const ChannelRealization& real, Rng& rng) {
  return ChannelModel(cfg).pilot_frame(real, rng);
}

}  // namespace ambc
