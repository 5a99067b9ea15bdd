#include "ambc/estimators.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "ambc/errors.hpp"

namespace ambc {

VectorXd pilot_mean(const ObservationTensor& y) {
  if (y.p < 1) throw ParameterError("at least one pilot observation is required");
  const Index m = y.ma * y.mb;
  VectorXd mean = VectorXd::Zero(m);
  for (Index i = 0; i < m; ++i) {
    double s = 0.0;
    for (Index k = 0; k < y.p; ++k) s += y.data[static_cast<std::size_t>(i * y.p + k)];
    mean[i] = s / static_cast<double>(y.p);
  }
  return mean;
}

VectorXd ls_estimate(const ObservationTensor& y) { return pilot_mean(y); }

MmseVectorEstimator::MmseVectorEstimator(const MatrixXd& r_x, double sigma_u_sq, Index p) {
  if (r_x.rows() != r_x.cols() || r_x.rows() == 0) throw ShapeError("MMSE: correlation matrix must be square");
  if (p < 1) throw ParameterError("MMSE: pilot count must be positive");
  if (!(sigma_u_sq >= 0.0)) throw ParameterError("MMSE: noise variance must be non-negative");
  const MatrixXd system = r_x + (sigma_u_sq / static_cast<double>(p)) * MatrixXd::Identity(r_x.rows(), r_x.cols());
  Eigen::LLT<MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) throw NumericError("MMSE: R + (s2/P) I is not positive definite");
  // R symmetric: R (R + sI)^{-1} = ((R + sI)^{-1} R)^T.
  gain_ = llt.solve(r_x).transpose();
}

VectorXd mmse_estimate_vector(const VectorXd& y_bar, const MatrixXd& r_x, double sigma_u_sq, Index p) {
  if (y_bar.size() != r_x.rows()) throw ShapeError("MMSE: observation length does not match the correlation matrix");
  return MmseVectorEstimator(r_x, sigma_u_sq, p)(y_bar);
}

MatrixXd MmseContext::selection() const {
  MatrixXd s(mb, p * mb);
  for (Index k = 0; k < p; ++k) s.block(0, k * mb, mb, mb).setIdentity();
  return s;
}

void MmseContext::validate() const {
  if (ma < 1 || mb < 1 || p < 1) throw ParameterError("MMSE context: geometry must be positive");
  if (r_x.rows() != mb || r_x.cols() != mb) throw ShapeError("MMSE context: R_X must be Mb x Mb");
  if (!(sigma_u_sq > 0.0)) throw ParameterError("MMSE context: noise variance must be positive");
}

MatrixXd to_y_tilde(const ObservationTensor& y) {
  MatrixXd out(y.ma, y.p * y.mb);
  for (Index r = 0; r < y.ma; ++r)
    for (Index c = 0; c < y.mb; ++c)
      for (Index k = 0; k < y.p; ++k) out(r, k * y.mb + c) = y.at(r, c, k);
  return out;
}

MatrixXd mmse_estimate_matrix(const MatrixXd& y_tilde, const MmseContext& ctx) {
  ctx.validate();
  if (y_tilde.rows() != ctx.ma || y_tilde.cols() != ctx.p * ctx.mb) throw ShapeError("MMSE: Y_tilde must be Ma x (P Mb)");
  Eigen::LLT<MatrixXd> r_llt(ctx.r_x);
  if (r_llt.info() != Eigen::Success) throw NumericError("MMSE: R_X is not positive definite");
  const MatrixXd r_inv = r_llt.solve(MatrixXd::Identity(ctx.mb, ctx.mb));
  const MatrixXd s = ctx.selection();
  const double a = ctx.alpha();
  const MatrixXd inner = a * s * s.transpose() + r_inv;
  Eigen::LLT<MatrixXd> inner_llt(inner);
  if (inner_llt.info() != Eigen::Success) throw NumericError("MMSE: a S S^T + R_X^{-1} is not positive definite");
  const Index n = ctx.p * ctx.mb;
  const MatrixXd shrink = MatrixXd::Identity(n, n) - a * s.transpose() * inner_llt.solve(s);
  return y_tilde * shrink * (a * s.transpose() * ctx.r_x);
}

VectorXd brute_force_conditional_mean(const std::vector<VectorXd>& samples, const MatrixXd& cov_x, double sigma_u_sq) {
  if (samples.empty()) throw ParameterError("conditional mean: no observations");
  const Index n = cov_x.rows();
  const Index p = static_cast<Index>(samples.size());
  MatrixXd cov_xy(n, p * n);
  MatrixXd cov_yy(p * n, p * n);
  VectorXd stacked(p * n);
  for (Index i = 0; i < p; ++i) {
    if (samples[static_cast<std::size_t>(i)].size() != n) throw ShapeError("conditional mean: sample length mismatch");
    stacked.segment(i * n, n) = samples[static_cast<std::size_t>(i)];
    cov_xy.block(0, i * n, n, n) = cov_x;
    for (Index j = 0; j < p; ++j) {
      cov_yy.block(i * n, j * n, n, n) = cov_x;
      if (i == j) cov_yy.block(i * n, j * n, n, n).diagonal().array() += sigma_u_sq;
    }
  }
  Eigen::FullPivLU<MatrixXd> lu(cov_yy);
  if (!lu.isInvertible()) throw NumericError("conditional mean: joint observation covariance is singular");
  return cov_xy * lu.solve(stacked);
}

void NmseAccumulator::add(const VectorXd& truth, const VectorXd& estimate) {
  if (truth.size() != estimate.size()) throw ShapeError("NMSE: truth and estimate lengths differ");
  add((truth - estimate).squaredNorm(), truth.squaredNorm());
}

void NmseAccumulator::add(double squared_error, double squared_norm) {
  errors_.push_back(squared_error);
  powers_.push_back(squared_norm);
}

NmseEstimate NmseAccumulator::result() const {
  const Index n = count();
  if (n == 0) throw ParameterError("NMSE: empty batch");
  double err = 0.0, pow = 0.0;
  for (Index i = 0; i < n; ++i) {
    err += errors_[static_cast<std::size_t>(i)];
    pow += powers_[static_cast<std::size_t>(i)];
  }
  if (!(pow > 0.0)) throw MetricError("NMSE undefined: the truth batch has zero energy");
  NmseEstimate out;
  out.nmse = err / pow;
  out.trials = n;
  const Index b = std::min(batches_, n);
  if (b < 2) return out;
  std::vector<double> ratios;
  Index start = 0;
  for (Index j = 0; j < b; ++j) {
    const Index stop = (n * (j + 1)) / b;
    double e = 0.0, q = 0.0;
    for (Index i = start; i < stop; ++i) {
      e += errors_[static_cast<std::size_t>(i)];
      q += powers_[static_cast<std::size_t>(i)];
    }
    if (q > 0.0) ratios.push_back(e / q);
    start = stop;
  }
  if (ratios.size() < 2) return out;
  double mean = 0.0;
  for (double r : ratios) mean += r;
  mean /= static_cast<double>(ratios.size());
  double var = 0.0;
  for (double r : ratios) var += (r - mean) * (r - mean);
  var /= static_cast<double>(ratios.size() - 1);
  const boost::math::students_t dist(static_cast<double>(ratios.size() - 1));
  const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
  out.ci_half_width = t * std::sqrt(var / static_cast<double>(ratios.size()));
  return out;
}

NmseEstimate nmse(const std::vector<VectorXd>& truth, const std::vector<VectorXd>& estimates, Index batches) {
  if (truth.size() != estimates.size()) throw ShapeError("NMSE: batch sizes differ");
  NmseAccumulator acc(batches);
  for (std::size_t i = 0; i < truth.size(); ++i) acc.add(truth[i], estimates[i]);
  return acc.result();
}

}  // namespace ambc
