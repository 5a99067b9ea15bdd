#pragma once

// Linear-theory checks: the effective linear map of an analysis-mode CRLD,
// the MMSE weight target it should approach, and the distance between them.

#include <cmath>
#include <string>

#include "ambc/crld.hpp"
#include "ambc/dataset.hpp"
#include "ambc/estimators.hpp"

namespace ambc {

enum class MapRegime {
  /// X_hat = Y_tilde A with one (P Mb) x Mb matrix shared by all rows.
  right_multiply,
  /// Rows are coupled (e.g. 3x3 kernels); only the full vectorized map exists.
  full,
};

const char* to_string(MapRegime regime);

struct LinearMap {
  Index ma = 0;
  Index mb = 0;
  Index p = 0;
  MapRegime regime = MapRegime::full;
  MatrixXd right;  // (P Mb) x Mb, valid for right_multiply
  /// (Ma Mb) x (Ma Mb P): vec(X_hat) = full * vec(Y), both row-major with P fastest in Y.
  MatrixXd full;

  /// Expands a right factor into the full map.
  static LinearMap from_right(const MatrixXd& a, Index ma, Index mb, Index p);

  MatrixXd apply(const MatrixXd& y_tilde) const;
  VectorXd apply_stacked(const VectorXd& y) const { return full * y; }
};

/// Probes the network with every canonical basis input, assembles the full map,
/// and confirms superposition on random inputs. Throws StateError when the
/// network is not linear (e.g. not in analysis mode).
template <typename Scalar>
LinearMap extract_effective_map(const CrldModel<Scalar>& model, std::uint64_t seed = 11, double tolerance = 1e-8);

/// A* = (I - W*) W*_{B+1}, W* = a S^T (a S S^T + R_X^{-1})^{-1} S, W*_{B+1} = a S^T R_X.
LinearMap mmse_weight_target(const MmseContext& ctx);

/// Full map of the vector-form MMSE estimator R (R + s2/P I)^{-1} y_bar for an
/// arbitrary M x M prior; for row-i.i.d. priors it coincides with A*.
LinearMap vector_mmse_map(const MatrixXd& r, double sigma_u_sq, Index ma, Index mb, Index p);

struct MapDistance {
  double frobenius_rel = 0.0;
  double nmse_learned = 0.0;
  double nmse_target = 0.0;
  double nmse_gap = 0.0;  // nmse_learned - nmse_target on common samples
};

/// Rows of X drawn i.i.d. from N(0, column_cov); the same samples feed both maps.
/// Throws MetricError for a zero-norm target.
MapDistance map_distance(const LinearMap& learned, const LinearMap& target, const MatrixXd& column_cov,
                         double sigma_u_sq, Index trials, std::uint64_t seed);

/// NMSE of a linear map on samples from the row-i.i.d. prior.
NmseEstimate linear_map_nmse(const LinearMap& map, const MatrixXd& column_cov, double sigma_u_sq, Index trials,
                             std::uint64_t seed);

/// NMSE of a linear map on the examples of a dataset.
NmseEstimate linear_map_nmse(const LinearMap& map, const Dataset& ds);

std::string format_map_report(const LinearMap& learned, const LinearMap& target, const MapDistance& distance);

template <typename Scalar>
LinearMap extract_effective_map(const CrldModel<Scalar>& model, std::uint64_t seed, double tolerance) {
  const CrldHyper& h = model.hyper();
  const Index n_in = h.ma * h.mb * h.p;
  const Index n_out = h.ma * h.mb;
  Tensor<Scalar> basis({n_in, h.ma, h.mb, h.p});
  for (Index i = 0; i < n_in; ++i) basis[i * n_in + i] = Scalar(1);
  const Tensor<Scalar> probe = model.predict(basis);
  LinearMap map;
  map.ma = h.ma;
  map.mb = h.mb;
  map.p = h.p;
  map.full = probe.as_rows(n_out).template cast<double>().transpose();

  Rng rng(seed);
  Tensor<Scalar> y({10, h.ma, h.mb, h.p});
  for (Index i = 0; i < y.size(); ++i) y[i] = static_cast<Scalar>(rng.normal());
  const Tensor<Scalar> out = model.predict(y);
  for (Index s = 0; s < 10; ++s) {
    const VectorXd yin = y.values().segment(s * n_in, n_in).template cast<double>();
    const VectorXd expect = out.values().segment(s * n_out, n_out).template cast<double>();
    const VectorXd got = map.full * yin;
    const double err = (got - expect).norm() / std::max(1.0, expect.norm());
    if (!(err <= tolerance))
      throw StateError("extract_effective_map: superposition fails (relative error " + std::to_string(err) +
                       "); the model must be in analysis mode");
  }

  // Right-multiply regime: no coupling between distinct rows and the same
  // row map everywhere.
  const double scale = std::max(map.full.cwiseAbs().maxCoeff(), 1e-300);
  const double zero_tol = 1e-12 * scale * (std::is_same_v<Scalar, float> ? 1e5 : 1.0);
  MatrixXd a = MatrixXd::Zero(h.p * h.mb, h.mb);
  for (Index j = 0; j < h.mb; ++j)
    for (Index jp = 0; jp < h.mb; ++jp)
      for (Index k = 0; k < h.p; ++k) a(k * h.mb + jp, j) = map.full(j, jp * h.p + k);
  bool separable = true;
  for (Index r = 0; r < h.ma && separable; ++r)
    for (Index j = 0; j < h.mb && separable; ++j)
      for (Index rp = 0; rp < h.ma && separable; ++rp)
        for (Index jp = 0; jp < h.mb && separable; ++jp)
          for (Index k = 0; k < h.p; ++k) {
            const double v = map.full(r * h.mb + j, (rp * h.mb + jp) * h.p + k);
            const double want = rp == r ? a(k * h.mb + jp, j) : 0.0;
            if (std::abs(v - want) > zero_tol) {
              separable = false;
              break;
            }
          }
  map.regime = separable ? MapRegime::right_multiply : MapRegime::full;
  if (separable) map.right = std::move(a);
  return map;
}

}  // namespace ambc
