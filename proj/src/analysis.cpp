#include "ambc/analysis.hpp"

#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>

#include "ambc/channel_sim.hpp"

namespace ambc {

const char* to_string(MapRegime regime) { return regime == MapRegime::right_multiply ? "right_multiply" : "full"; }

LinearMap LinearMap::from_right(const MatrixXd& a, Index ma, Index mb, Index p) {
  if (a.rows() != p * mb || a.cols() != mb) throw ShapeError("linear map: right factor must be (P Mb) x Mb");
  LinearMap map;
  map.ma = ma;
  map.mb = mb;
  map.p = p;
  map.regime = MapRegime::right_multiply;
  map.right = a;
  map.full = MatrixXd::Zero(ma * mb, ma * mb * p);
  for (Index r = 0; r < ma; ++r)
    for (Index j = 0; j < mb; ++j)
      for (Index jp = 0; jp < mb; ++jp)
        for (Index k = 0; k < p; ++k) map.full(r * mb + j, (r * mb + jp) * p + k) = a(k * mb + jp, j);
  return map;
}

MatrixXd LinearMap::apply(const MatrixXd& y_tilde) const {
  if (y_tilde.rows() != ma || y_tilde.cols() != p * mb) throw ShapeError("linear map: Y_tilde must be Ma x (P Mb)");
  if (regime == MapRegime::right_multiply) return y_tilde * right;
  VectorXd y(ma * mb * p);
  for (Index r = 0; r < ma; ++r)
    for (Index j = 0; j < mb; ++j)
      for (Index k = 0; k < p; ++k) y[(r * mb + j) * p + k] = y_tilde(r, k * mb + j);
  const VectorXd x = full * y;
  return Eigen::Map<const RowMatrixXd>(x.data(), ma, mb);
}

LinearMap mmse_weight_target(const MmseContext& ctx) {
  ctx.validate();
  Eigen::LLT<MatrixXd> r_llt(ctx.r_x);
  if (r_llt.info() != Eigen::Success) throw NumericError("MMSE target: R_X is not positive definite");
  const MatrixXd r_inv = r_llt.solve(MatrixXd::Identity(ctx.mb, ctx.mb));
  const MatrixXd s = ctx.selection();
  const double a = ctx.alpha();
  Eigen::LLT<MatrixXd> inner(a * s * s.transpose() + r_inv);
  if (inner.info() != Eigen::Success) throw NumericError("MMSE target: a S S^T + R_X^{-1} is not positive definite");
  const MatrixXd w_star = a * s.transpose() * inner.solve(s);
  const MatrixXd w_recon = a * s.transpose() * ctx.r_x;
  const Index n = ctx.p * ctx.mb;
  return LinearMap::from_right((MatrixXd::Identity(n, n) - w_star) * w_recon, ctx.ma, ctx.mb, ctx.p);
}

namespace {

struct PriorSampler {
  PriorSampler(const MatrixXd& column_cov, Index ma, Index p, double sigma_u_sq)
      : rows(column_cov), ma(ma), p(p), sigma(std::sqrt(sigma_u_sq)) {}

  /// Returns vec(X) row-major and fills vec(Y) with P fastest.
  VectorXd draw(Rng& rng, VectorXd& y) const {
    const Index mb = rows.factor().rows();
    VectorXd x(ma * mb);
    for (Index r = 0; r < ma; ++r) x.segment(r * mb, mb) = rows(rng);
    y.resize(ma * mb * p);
    for (Index k = 0; k < p; ++k)
      for (Index i = 0; i < ma * mb; ++i) y[i * p + k] = x[i] + sigma * rng.normal();
    return x;
  }

  GaussianSampler rows;
  Index ma;
  Index p;
  double sigma;
};

}  // namespace

NmseEstimate linear_map_nmse(const LinearMap& map, const MatrixXd& column_cov, double sigma_u_sq, Index trials,
                             std::uint64_t seed) {
  if (trials < 1) throw ParameterError("linear_map_nmse: trials must be positive");
  const PriorSampler sampler(column_cov, map.ma, map.p, sigma_u_sq);
  Rng rng(seed);
  NmseAccumulator acc;
  VectorXd y;
  for (Index t = 0; t < trials; ++t) {
    const VectorXd x = sampler.draw(rng, y);
    acc.add(x, map.apply_stacked(y));
  }
  return acc.result();
}

LinearMap vector_mmse_map(const MatrixXd& r, double sigma_u_sq, Index ma, Index mb, Index p) {
  if (r.rows() != ma * mb || r.cols() != ma * mb) throw ShapeError("vector_mmse_map: prior must be (Ma Mb) square");
  const MmseVectorEstimator est(r, sigma_u_sq, p);
  LinearMap map;
  map.ma = ma;
  map.mb = mb;
  map.p = p;
  map.full = Eigen::kroneckerProduct(est.gain(), RowVectorXd::Constant(p, 1.0 / static_cast<double>(p)));
  return map;
}

NmseEstimate linear_map_nmse(const LinearMap& map, const Dataset& ds) {
  if (ds.ma != map.ma || ds.mb != map.mb || ds.p != map.p)
    throw ShapeError("linear_map_nmse: dataset geometry does not match the map");
  NmseAccumulator acc;
  const Index wi = ds.input_width(), wl = ds.label_width();
  for (Index k = 0; k < ds.size(); ++k) {
    const Eigen::Map<const VectorXd> y(ds.inputs.data() + k * wi, wi);
    const Eigen::Map<const VectorXd> x(ds.labels.data() + k * wl, wl);
    acc.add(x, map.full * y);
  }
  return acc.result();
}

MapDistance map_distance(const LinearMap& learned, const LinearMap& target, const MatrixXd& column_cov,
                         double sigma_u_sq, Index trials, std::uint64_t seed) {
  if (learned.full.rows() != target.full.rows() || learned.full.cols() != target.full.cols())
    throw ShapeError("map_distance: maps have different dimensions");
  const double norm = target.full.norm();
  if (!(norm > 0.0)) throw MetricError("map_distance: target map has zero norm");
  MapDistance d;
  d.frobenius_rel = (learned.full - target.full).norm() / norm;
  d.nmse_learned = linear_map_nmse(learned, column_cov, sigma_u_sq, trials, seed).nmse;
  d.nmse_target = linear_map_nmse(target, column_cov, sigma_u_sq, trials, seed).nmse;
  d.nmse_gap = d.nmse_learned - d.nmse_target;
  return d;
}

std::string format_map_report(const LinearMap& learned, const LinearMap& target, const MapDistance& d) {
  std::ostringstream os;
  os.precision(6);
  os << "geometry: Ma=" << learned.ma << " Mb=" << learned.mb << " P=" << learned.p << '\n';
  os << "learned map regime: " << to_string(learned.regime) << '\n';
  os << "relative Frobenius distance to MMSE target: " << d.frobenius_rel << '\n';
  os << "NMSE learned: " << d.nmse_learned << '\n';
  os << "NMSE target:  " << d.nmse_target << '\n';
  os << "NMSE gap:     " << d.nmse_gap << '\n';
  if (learned.regime == MapRegime::right_multiply && target.regime == MapRegime::right_multiply) {
    Eigen::IOFormat fmt(6, 0, " ", "\n", "  ", "");
    os << "learned right factor:\n" << learned.right.format(fmt) << '\n';
    os << "target right factor:\n" << target.right.format(fmt) << '\n';
  }
  return os.str();
}

}  // namespace ambc
