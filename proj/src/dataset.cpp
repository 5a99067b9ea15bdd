#include "ambc/dataset.hpp"

#include <cmath>

#include "ambc/binary_io.hpp"
#include "ambc/errors.hpp"

namespace ambc {

Dataset generate_dataset(const SystemConfig& cfg, Link link, Index k, std::uint64_t seed, MixedSnr mixed) {
  if (k < 1) throw ParameterError("dataset size K must be at least 1");
  if (mixed.enabled && !(mixed.min_db <= mixed.max_db)) throw ParameterError("mixed SNR range is empty");
  const ChannelModel model(cfg);
  Dataset ds;
  ds.config = cfg;
  ds.link = link;
  ds.seed = seed;
  ds.mixed = mixed;
  ds.ma = cfg.ma;
  ds.mb = cfg.mb;
  ds.p = cfg.pilots(link);
  ds.inputs.resize(static_cast<std::size_t>(k * ds.input_width()));
  ds.labels.resize(static_cast<std::size_t>(k * ds.label_width()));
  const double trace_h = model.r_h().trace();
  for (Index i = 0; i < k; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    double sigma_u_sq = model.sigma_u_sq();
    if (mixed.enabled) {
      const double snr_db = rng.uniform(mixed.min_db, mixed.max_db);
      sigma_u_sq = trace_h / (static_cast<double>(cfg.m) * std::pow(10.0, snr_db / 10.0));
    }
    const ChannelRealization real = model.draw(rng);
    const VectorXd& x = link == Link::direct ? real.h : real.w;
    const ObservationTensor obs = model.observe(x, ds.p, link, sigma_u_sq, rng);
    std::copy(obs.data.begin(), obs.data.end(), ds.inputs.begin() + i * ds.input_width());
    std::copy(obs.truth.begin(), obs.truth.end(), ds.labels.begin() + i * ds.label_width());
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  io::BinaryWriter w;
  w.magic("AMBD");
  w.u32(kDatasetVersion);
  const SystemConfig& c = ds.config;
  for (Index v : {c.m, c.ma, c.mb, c.na, c.nb, c.nc, c.frames}) w.u32(static_cast<std::uint32_t>(v));
  w.f64(c.snr_db);
  w.f64(c.zeta_db);
  w.f64(c.f);
  for (const CorrelationSpec* spec : {&c.corr_h, &c.corr_g}) {
    w.u32(static_cast<std::uint32_t>(spec->model));
    w.f64(spec->rho);
  }
  w.u64(c.seed);
  w.u32(static_cast<std::uint32_t>(ds.link));
  w.u64(ds.seed);
  w.u32(ds.mixed.enabled ? 1u : 0u);
  w.f64(ds.mixed.min_db);
  w.f64(ds.mixed.max_db);
  w.u32(static_cast<std::uint32_t>(ds.p));
  w.u64(static_cast<std::uint64_t>(ds.size()));
  const Index wi = ds.input_width(), wl = ds.label_width();
  for (Index k = 0; k < ds.size(); ++k) {
    for (Index i = 0; i < wi; ++i) w.f64(ds.inputs[static_cast<std::size_t>(k * wi + i)]);
    for (Index i = 0; i < wl; ++i) w.f64(ds.labels[static_cast<std::size_t>(k * wl + i)]);
  }
  w.commit(path);
}

Dataset load_dataset(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("dataset not found: " + path.string());
  io::BinaryReader r(path, "dataset");
  r.expect_magic("AMBD");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion)
    throw FormatError("dataset " + path.string() + ": unsupported format version " + std::to_string(version) +
                      " (supported: " + std::to_string(kDatasetVersion) + ")");
  r.verify_checksum();
  Dataset ds;
  SystemConfig& c = ds.config;
  c.m = r.u32();
  c.ma = r.u32();
  c.mb = r.u32();
  c.na = r.u32();
  c.nb = r.u32();
  c.nc = r.u32();
  c.frames = r.u32();
  c.snr_db = r.f64();
  c.zeta_db = r.f64();
  c.f = r.f64();
  for (CorrelationSpec* spec : {&c.corr_h, &c.corr_g}) {
    const std::uint32_t model = r.u32();
    if (model > 1) throw FormatError("dataset " + path.string() + ": unknown correlation model");
    spec->model = static_cast<CorrelationModel>(model);
    spec->rho = r.f64();
    spec->dim = c.m;
  }
  c.seed = r.u64();
  const std::uint32_t link = r.u32();
  if (link > 1) throw FormatError("dataset " + path.string() + ": unknown link tag");
  ds.link = static_cast<Link>(link);
  ds.seed = r.u64();
  ds.mixed.enabled = r.u32() != 0;
  ds.mixed.min_db = r.f64();
  ds.mixed.max_db = r.f64();
  ds.p = r.u32();
  ds.ma = c.ma;
  ds.mb = c.mb;
  const std::uint64_t k = r.u64();
  const Index wi = ds.input_width(), wl = ds.label_width();
  if (wi <= 0 || r.remaining() != k * static_cast<std::uint64_t>(wi + wl) * 8)
    throw FormatError("dataset " + path.string() + ": payload size does not match the header");
  ds.inputs.resize(static_cast<std::size_t>(k * wi));
  ds.labels.resize(static_cast<std::size_t>(k * wl));
  for (std::uint64_t e = 0; e < k; ++e) {
    for (Index i = 0; i < wi; ++i) ds.inputs[static_cast<std::size_t>(e * wi + i)] = r.f64();
    for (Index i = 0; i < wl; ++i) ds.labels[static_cast<std::size_t>(e * wl + i)] = r.f64();
  }
  r.finish();
  return ds;
}

}  // namespace ambc
