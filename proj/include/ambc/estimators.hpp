#pragma once

// Classical channel estimators for y(n) = x + u(n), n = 0..P-1, u ~ N(0, s2 I).

#include <vector>

#include "ambc/channel_sim.hpp"
#include "ambc/types.hpp"

namespace ambc {

/// Sample mean of the P pilot observations (row-major M-vector).
VectorXd ls_estimate(const ObservationTensor& y);

/// Mean of the P slices of `y`, flattened row-major.
VectorXd pilot_mean(const ObservationTensor& y);

/// R (R + (s2/P) I)^{-1} y_bar.
VectorXd mmse_estimate_vector(const VectorXd& y_bar, const MatrixXd& r_x, double sigma_u_sq, Index p);

/// Vector-form MMSE with the gain matrix factored once.
class MmseVectorEstimator {
 public:
  MmseVectorEstimator(const MatrixXd& r_x, double sigma_u_sq, Index p);
  VectorXd operator()(const VectorXd& y_bar) const { return gain_ * y_bar; }
  VectorXd operator()(const ObservationTensor& y) const { return gain_ * pilot_mean(y); }
  const MatrixXd& gain() const { return gain_; }

 private:
  MatrixXd gain_;
};

/// Parameters of the matrix-form estimator on Y_tilde = [Y(0), ..., Y(P-1)].
/// r_x is E(X^T X) (Mb x Mb), so for rows drawn i.i.d. from N(0, C) it is Ma * C.
struct MmseContext {
  MatrixXd r_x;
  double sigma_u_sq = 1.0;
  Index ma = 1;
  Index mb = 1;
  Index p = 1;

  /// S = [I_Mb, ..., I_Mb], Mb x (P Mb).
  MatrixXd selection() const;
  /// 1 / (Ma s2).
  double alpha() const { return 1.0 / (static_cast<double>(ma) * sigma_u_sq); }
  void validate() const;
};

/// Ma x (P Mb) matrix whose column p*Mb + j holds Y(p)[:, j].
MatrixXd to_y_tilde(const ObservationTensor& y);

/// Y_tilde (I - a S^T (a S S^T + R_X^{-1})^{-1} S) a S^T R_X, with a = 1 / (Ma s2).
MatrixXd mmse_estimate_matrix(const MatrixXd& y_tilde, const MmseContext& ctx);

/// E[x | y_0..y_{P-1}] by dense conditioning of the stacked joint Gaussian
/// [x; y_0; ...; y_{P-1}] with covariance blocks R and R + s2 I.
VectorXd brute_force_conditional_mean(const std::vector<VectorXd>& samples, const MatrixXd& cov_x, double sigma_u_sq);

struct NmseEstimate {
  double nmse = 0.0;
  double ci_half_width = 0.0;
  Index trials = 0;
};

/// Streaming NMSE: sum ||x - xhat||^2 / sum ||x||^2, with a 95% confidence
/// half-width from batch means over contiguous batches.
class NmseAccumulator {
 public:
  explicit NmseAccumulator(Index batches = 20) : batches_(batches) {}
  void add(const VectorXd& truth, const VectorXd& estimate);
  void add(double squared_error, double squared_norm);
  Index count() const { return static_cast<Index>(errors_.size()); }
  NmseEstimate result() const;

 private:
  Index batches_;
  std::vector<double> errors_;
  std::vector<double> powers_;
};

NmseEstimate nmse(const std::vector<VectorXd>& truth, const std::vector<VectorXd>& estimates, Index batches = 20);

}  // namespace ambc
