#include <gtest/gtest.h>

#include <cmath>

#include "ambc/channel_sim.hpp"
#include "ambc/errors.hpp"

using namespace ambc;

namespace {

SystemConfig small_config(Index ma, Index mb) {
  SystemConfig cfg;
  cfg.m = ma * mb;
  cfg.ma = ma;
  cfg.mb = mb;
  cfg.corr_h.dim = cfg.corr_g.dim = cfg.m;
  return cfg;
}

MatrixXd sample_covariance(const MatrixXd& r, Index draws, std::uint64_t seed) {
  const GaussianSampler sampler(r);
  Rng rng(seed);
  MatrixXd acc = MatrixXd::Zero(r.rows(), r.cols());
  for (Index i = 0; i < draws; ++i) {
    const VectorXd x = sampler(rng);
    acc.noalias() += x * x.transpose();
  }
  return acc / static_cast<double>(draws);
}

}  // namespace

TEST(Correlation, IdentityModelIgnoresRho) {
  EXPECT_EQ(build_correlation_matrix({CorrelationModel::identity, 0.7, 4}), MatrixXd::Identity(4, 4));
}

TEST(Correlation, ExponentialWithZeroRhoIsIdentity) {
  EXPECT_EQ(build_correlation_matrix({CorrelationModel::exponential, 0.0, 4}), MatrixXd::Identity(4, 4));
}

TEST(Correlation, ExponentialHalf) {
  MatrixXd want(3, 3);
  want << 1, 0.5, 0.25, 0.5, 1, 0.5, 0.25, 0.5, 1;
  EXPECT_EQ(build_correlation_matrix({CorrelationModel::exponential, 0.5, 3}), want);
}

TEST(Correlation, SymmetricPositiveDefiniteUnitDiagonal) {
  for (double rho : {0.0, 0.3, 0.9, 0.99}) {
    const MatrixXd r = build_correlation_matrix({CorrelationModel::exponential, rho, 16});
    EXPECT_EQ(r, r.transpose());
    EXPECT_TRUE((r.diagonal().array() == 1.0).all());
    EXPECT_EQ(Eigen::LLT<MatrixXd>(r).info(), Eigen::Success) << "rho " << rho;
  }
}

TEST(Correlation, RejectsBadParameters) {
  EXPECT_THROW(build_correlation_matrix({CorrelationModel::exponential, 1.0, 4}), ParameterError);
  EXPECT_THROW(build_correlation_matrix({CorrelationModel::exponential, -0.1, 4}), ParameterError);
  EXPECT_THROW(build_correlation_matrix({CorrelationModel::identity, 0.0, 0}), ParameterError);
}

TEST(GaussianSampling, IdentityCovarianceConverges) {
  const MatrixXd s = sample_covariance(MatrixXd::Identity(4, 4), 100000, 3);
  EXPECT_LT((s - MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 0.05);
}

TEST(GaussianSampling, CorrelatedPairConverges) {
  const MatrixXd r = build_correlation_matrix({CorrelationModel::exponential, 0.9, 2});
  const MatrixXd s = sample_covariance(r, 100000, 4);
  EXPECT_NEAR(s(0, 1) / std::sqrt(s(0, 0) * s(1, 1)), 0.9, 0.02);
}

TEST(GaussianSampling, ReproducibleUnderSeed) {
  Rng a(42), b(42);
  const MatrixXd r = MatrixXd::Identity(1, 1);
  EXPECT_EQ(sample_gaussian_vector(r, a)[0], sample_gaussian_vector(r, b)[0]);
}

TEST(GaussianSampling, NonPositiveDefiniteIsNumericError) {
  MatrixXd r(2, 2);
  r << 1, 2, 2, 1;
  Rng rng(1);
  EXPECT_THROW(sample_gaussian_vector(r, rng), NumericError);
}

TEST(NoiseAndAlpha, ZeroDbGivesUnitNoise) {
  SystemConfig cfg;
  cfg.snr_db = 0.0;
  EXPECT_DOUBLE_EQ(derive_noise_and_alpha(cfg).sigma_u_sq, 1.0);
}

TEST(NoiseAndAlpha, SymmetricCaseGivesUnitAlpha) {
  SystemConfig cfg;
  cfg.zeta_db = 0.0;
  cfg.f = 1.0;
  EXPECT_DOUBLE_EQ(derive_noise_and_alpha(cfg).alpha, 1.0);
}

TEST(NoiseAndAlpha, MinusSixDb) {
  SystemConfig cfg;
  cfg.snr_db = -6.0;
  EXPECT_NEAR(derive_noise_and_alpha(cfg).sigma_u_sq, std::pow(10.0, 0.6), 1e-12);
  EXPECT_NEAR(derive_noise_and_alpha(cfg).sigma_u_sq, 3.981, 1e-3);
}

TEST(NoiseAndAlpha, ZeroFWithFiniteZetaRejected) {
  SystemConfig cfg;
  cfg.f = 0.0;
  EXPECT_THROW(derive_noise_and_alpha(cfg), ParameterError);
  cfg.zeta_db = -INFINITY;
  EXPECT_EQ(derive_noise_and_alpha(cfg).alpha, 0.0);
}

TEST(SystemConfigValidation, Invariants) {
  SystemConfig cfg;
  EXPECT_NO_THROW(validate(cfg));
  cfg.ma = 4;
  EXPECT_THROW(validate(cfg), ParameterError);
  cfg = SystemConfig{};
  cfg.na = 0;
  EXPECT_THROW(validate(cfg), ParameterError);
}

TEST(Realization, ConstructionIdentityExact) {
  const ChannelModel model(SystemConfig{});
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const ChannelRealization r = model.draw(rng);
    EXPECT_EQ(r.w, (r.h + (r.alpha * r.f) * r.g).eval());
    EXPECT_TRUE(r.w.allFinite());
  }
}

TEST(PilotFrame, NoiselessPhaseAEqualsH) {
  SystemConfig cfg;
  cfg.snr_db = INFINITY;
  Rng rng(7);
  const ChannelRealization real = draw_realization(cfg, rng);
  const auto [a, b] = generate_pilot_frame(cfg, real, rng);
  for (Index k = 0; k < a.p; ++k)
    for (Index r = 0; r < cfg.ma; ++r)
      for (Index c = 0; c < cfg.mb; ++c) EXPECT_EQ(a.at(r, c, k), real.h[r * cfg.mb + c]);
  for (Index i = 0; i < cfg.m; ++i) EXPECT_EQ(b.truth[static_cast<std::size_t>(i)], real.w[i]);
}

TEST(PilotFrame, NoReflectionMakesPhasesEqual) {
  SystemConfig cfg;
  cfg.snr_db = INFINITY;
  cfg.zeta_db = -INFINITY;
  Rng rng(8);
  const ChannelRealization real = draw_realization(cfg, rng);
  EXPECT_EQ(real.alpha, 0.0);
  const auto [a, b] = generate_pilot_frame(cfg, real, rng);
  EXPECT_EQ(a.data, b.data);
}

TEST(PilotFrame, ShapeForDefaultGeometry) {
  SystemConfig cfg;
  Rng rng(9);
  const auto [a, b] = generate_pilot_frame(cfg, draw_realization(cfg, rng), rng);
  EXPECT_EQ(a.ma, 8);
  EXPECT_EQ(a.mb, 8);
  EXPECT_EQ(a.p, 2);
  EXPECT_EQ(a.data.size(), 128u);
  EXPECT_EQ(a.link, Link::direct);
  EXPECT_EQ(b.link, Link::composite);
}

TEST(ChannelStatistics, PowerZetaAndSnrMatchConfiguration) {
  SystemConfig cfg = small_config(2, 4);
  cfg.snr_db = 3.0;
  cfg.zeta_db = -5.0;
  const ChannelModel model(cfg);
  Rng rng(10);
  double h_pow = 0.0, r_pow = 0.0, u_pow = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const ChannelRealization real = model.draw(rng);
    h_pow += real.h.squaredNorm();
    r_pow += (real.w - real.h).squaredNorm();
    const auto [a, b] = model.pilot_frame(real, rng);
    for (Index m = 0; m < cfg.m; ++m) {
      const double u = a.data[static_cast<std::size_t>(m * a.p)] - real.h[m];
      u_pow += u * u;
    }
  }
  EXPECT_NEAR(h_pow / n / static_cast<double>(cfg.m), 1.0, 0.02);
  EXPECT_NEAR((r_pow / h_pow) / std::pow(10.0, -0.5), 1.0, 0.05);
  EXPECT_NEAR((h_pow / u_pow) / std::pow(10.0, 0.3), 1.0, 0.05);
}

TEST(Stacking, RoundTripIsExact) {
  Rng rng(11);
  std::vector<VectorXd> samples;
  for (int k = 0; k < 3; ++k) {
    VectorXd v(12);
    for (Index i = 0; i < 12; ++i) v[i] = rng.normal();
    samples.push_back(v);
  }
  const ObservationTensor obs = stack_observations(samples, 3, 4, Link::direct);
  EXPECT_EQ(obs.at(1, 2, 2), samples[2][1 * 4 + 2]);
  const auto back = unstack_observations(obs);
  ASSERT_EQ(back.size(), samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) EXPECT_EQ(back[k], samples[k]);
}

TEST(CompositeLink, DerivedCorrelation) {
  const ChannelModel model(SystemConfig{});
  const double s = model.alpha() * model.config().f;
  EXPECT_EQ(model.correlation(Link::composite), (model.r_h() + s * s * model.r_g()).eval());
  EXPECT_EQ(model.correlation(Link::direct), model.r_h());
}
