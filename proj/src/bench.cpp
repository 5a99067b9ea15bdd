#include "ambc/bench.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "ambc/checkpoint.hpp"
#include "ambc/crld.hpp"
#include "ambc/errors.hpp"
#include "ambc/train.hpp"

namespace ambc {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

std::string NmseReport::to_csv() const {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.link)) + ',' + to_string(r.method) + ',' + num(r.snr_db) + ',' +
           std::to_string(r.p) + ',' + num(r.nmse) + ',' + num(r.ci_half_width) + ',' + std::to_string(r.trials) +
           ',' + num(r.wall_time_s) + '\n';
  }
  return out;
}

void NmseReport::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << to_csv();
}

const NmseRow* NmseReport::find(Link link, Method method, double snr_db, Index p) const {
  for (const auto& r : rows)
    if (r.link == link && r.method == method && r.snr_db == snr_db && r.p == p) return &r;
  return nullptr;
}

std::filesystem::path crld_checkpoint_path(const std::filesystem::path& dir, Link link, double snr_db, Index p) {
  char name[128];
  std::snprintf(name, sizeof name, "crld_%s_snr%+g_p%ld.ckpt", to_string(link), snr_db, static_cast<long>(p));
  return dir / name;
}

SystemConfig sweep_point(const SystemConfig& base, SweepAxis axis, double value) {
  SystemConfig pt = base;
  if (axis == SweepAxis::snr) {
    pt.snr_db = value;
  } else {
    pt.na = pt.nb = static_cast<Index>(value);
  }
  return pt;
}

TrainHistory train_operating_point(const AppConfig& cfg, const SystemConfig& point, Link link,
                                   const std::filesystem::path& checkpoint,
                                   const std::function<void(const std::string&)>& log) {
  // Training data come from a stream disjoint from any evaluation seed.
  const std::uint64_t data_seed = mix_seed(point.seed, 0x7EA1ULL + static_cast<std::uint64_t>(link));
  const Dataset ds = generate_dataset(point, link, cfg.train_examples, data_seed, cfg.mixed);
  CrldHyper hyper = cfg.hyper;
  hyper.ma = point.ma;
  hyper.mb = point.mb;
  hyper.p = point.pilots(link);
  Rng init(mix_seed(cfg.train.seed, 0x1417ULL));
  auto model = CrldModel<float>::build(hyper, init);
  TrainLogger logger;
  if (log)
    logger = [&](const EpochRecord& r) {
      log("  epoch " + std::to_string(r.epoch) + " train " + num(r.train_loss_mean) + " val " + num(r.val_loss_mean) +
          (r.is_best ? " *" : ""));
    };
  auto result = train(std::move(model), ds, cfg.train, logger);
  save_checkpoint(result.model, checkpoint);
  result.history.write_csv(checkpoint.string() + ".history.csv");
  return result.history;
}

NmseReport run_sweep(const AppConfig& cfg, const SweepOptions& opts) {
  cfg.plan.validate();
  validate(cfg.system);
  struct Point {
    Link link;
    double value;
  };
  std::vector<Point> points;
  for (Link link : cfg.plan.links)
    for (double v : cfg.plan.values) points.push_back({link, v});

  const bool want_crld =
      std::find(cfg.plan.methods.begin(), cfg.plan.methods.end(), Method::crld) != cfg.plan.methods.end();
  if (want_crld && !opts.train_missing) {
    for (const auto& pt : points) {
      const SystemConfig sc = sweep_point(cfg.system, cfg.plan.axis, pt.value);
      const auto path = crld_checkpoint_path(cfg.checkpoint_dir, pt.link, sc.snr_db, sc.pilots(pt.link));
      if (!std::filesystem::exists(path))
        throw MissingArtifactError("missing CRLD checkpoint " + path.string() +
                                   " (train it with `ambc train` or rerun the sweep with --train)");
    }
  }

  std::vector<std::vector<NmseRow>> results(points.size());
  std::mutex log_mutex;
  auto say = [&](const std::string& msg) {
    if (!opts.log) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    opts.log(msg);
  };

  auto run_point = [&](std::size_t i) {
    const Point& pt = points[i];
    const SystemConfig sc = sweep_point(cfg.system, cfg.plan.axis, pt.value);
    const Index p = sc.pilots(pt.link);
    const ChannelModel channel(sc);
    const Dataset test = generate_dataset(sc, pt.link, cfg.plan.trials, mix_seed(cfg.system.seed, 0x5EE9ULL + i));
    const Index w = test.label_width(), wi = test.input_width();
    auto truth = [&](Index k) { return Eigen::Map<const VectorXd>(test.labels.data() + k * w, w); };
    auto mean_obs = [&](Index k) {
      VectorXd mean(w);
      const double* y = test.inputs.data() + k * wi;
      for (Index m = 0; m < w; ++m) {
        double s = 0.0;
        for (Index q = 0; q < p; ++q) s += y[m * p + q];
        mean[m] = s / static_cast<double>(p);
      }
      return mean;
    };
    for (Method method : cfg.plan.methods) {
      NmseRow row;
      row.link = pt.link;
      row.method = method;
      row.snr_db = sc.snr_db;
      row.p = p;
      NmseAccumulator acc;
      double elapsed = 0.0;
      if (method == Method::ls) {
        const auto t0 = Clock::now();
        for (Index k = 0; k < test.size(); ++k) acc.add(truth(k), mean_obs(k));
        elapsed = seconds_since(t0);
      } else if (method == Method::mmse) {
        const MmseVectorEstimator mmse(channel.correlation(pt.link), channel.sigma_u_sq(), p);
        const auto t0 = Clock::now();
        for (Index k = 0; k < test.size(); ++k) acc.add(truth(k), mmse(mean_obs(k)));
        elapsed = seconds_since(t0);
      } else {
        const auto path = crld_checkpoint_path(cfg.checkpoint_dir, pt.link, sc.snr_db, p);
        if (!std::filesystem::exists(path)) {
          say("training CRLD for " + std::string(to_string(pt.link)) + " at snr " + num(sc.snr_db) + " dB, P=" +
              std::to_string(p) + " -> " + path.string());
          train_operating_point(cfg, sc, pt.link, path, opts.log ? std::function<void(const std::string&)>(say)
                                                                 : std::function<void(const std::string&)>());
        }
        auto model = load_checkpoint<float>(path);
        if (model.hyper().ma != sc.ma || model.hyper().mb != sc.mb || model.hyper().p != p)
          throw ShapeError("checkpoint " + path.string() + " geometry does not match the operating point");
        model.set_mode(Mode::eval);
        std::vector<Index> idx(static_cast<std::size_t>(test.size()));
        std::iota(idx.begin(), idx.end(), Index(0));
        const auto t0 = Clock::now();
        constexpr std::size_t chunk = 512;
        for (std::size_t b = 0; b < idx.size(); b += chunk) {
          const std::size_t e = std::min(idx.size(), b + chunk);
          auto [y, x] = gather_batch<float>(test, idx, b, e);
          const Tensor<float> out = model.predict(y);
          for (Index n = 0; n < static_cast<Index>(e - b); ++n) {
            const VectorXd est = out.values().segment(n * w, w).cast<double>();
            acc.add(truth(static_cast<Index>(b) + n), est);
          }
        }
        elapsed = seconds_since(t0);
      }
      const NmseEstimate est = acc.result();
      row.nmse = est.nmse;
      row.ci_half_width = est.ci_half_width;
      row.trials = est.trials;
      row.wall_time_s = opts.strict ? 0.0 : elapsed;
      results[i].push_back(row);
    }
    say("point " + std::string(to_string(pt.link)) + " " + to_string(cfg.plan.axis) + "=" + num(pt.value) + " done");
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max<Index>(cfg.threads, 1)),
                                                    points.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < points.size(); ++i) run_point(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < points.size(); i = next++) {
          try {
            run_point(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }
  NmseReport report;
  for (auto& rows : results)
    for (auto& r : rows) report.rows.push_back(r);
  return report;
}

ComplexityReport complexity_report(const AppConfig& cfg, bool measure) {
  const SystemConfig& s = cfg.system;
  CrldHyper h = cfg.hyper;
  h.ma = s.ma;
  h.mb = s.mb;
  h.p = s.na;
  validate(h);
  ComplexityReport r;
  r.m = s.m;
  r.p = h.p;
  r.blocks = h.blocks;
  Index per_pixel = 0;
  for (Index l = 1; l <= h.layers; ++l) {
    const Index in = l == 1 ? h.p : h.filters;
    const Index out = l == h.layers ? h.p : h.filters;
    const Index mults = in * h.kernel * h.kernel * out;
    r.layers.push_back({l, in, h.kernel, out, mults});
    per_pixel += mults;
  }
  r.ls_ops = s.m * h.p;
  r.mmse_ops = h.p * h.p * h.p + s.m * h.p * h.p;
  r.crld_online = h.blocks * s.m * per_pixel;
  r.training_examples =
      cfg.train_examples - static_cast<Index>(std::llround(cfg.train.val_fraction * static_cast<double>(cfg.train_examples)));
  r.training_iterations = cfg.train.max_epochs;
  r.crld_offline = static_cast<double>(r.training_examples) * static_cast<double>(r.training_iterations) *
                   static_cast<double>(r.crld_online);
  if (!measure) return r;

  SystemConfig point = s;
  point.nb = point.na;
  const Index trials = 200;
  const Dataset ds = generate_dataset(point, Link::direct, trials, mix_seed(s.seed, 0xC0DEULL));
  const ChannelModel channel(point);
  const Index w = ds.label_width(), wi = ds.input_width();
  auto mean_obs = [&](Index k) {
    VectorXd mean(w);
    const double* y = ds.inputs.data() + k * wi;
    for (Index m = 0; m < w; ++m) {
      double acc = 0.0;
      for (Index q = 0; q < h.p; ++q) acc += y[m * h.p + q];
      mean[m] = acc / static_cast<double>(h.p);
    }
    return mean;
  };
  double sink = 0.0;
  auto t0 = Clock::now();
  for (Index k = 0; k < trials; ++k) sink += mean_obs(k)[0];
  r.ls_seconds = seconds_since(t0) / trials;

  t0 = Clock::now();
  const MmseVectorEstimator mmse(channel.r_h(), channel.sigma_u_sq(), h.p);
  for (Index k = 0; k < trials; ++k) sink += mmse(mean_obs(k))[0];
  r.mmse_seconds = seconds_since(t0) / trials;

  Rng rng(1);
  auto model = CrldModel<float>::build(h, rng);
  model.set_mode(Mode::eval);
  const Index crld_trials = 20;
  t0 = Clock::now();
  for (Index k = 0; k < crld_trials; ++k) {
    std::vector<Index> one{k};
    auto [y, x] = gather_batch<float>(ds, one, 0, 1);
    sink += model.predict(y)[0];
  }
  r.crld_seconds = seconds_since(t0) / crld_trials;
  if (sink == 12345.6789) std::puts("");  // keep the timed work observable
  return r;
}

std::string ComplexityReport::to_text() const {
  std::ostringstream os;
  os << "Online estimation cost per channel estimate (multiply-adds)\n";
  os << "  M=" << m << " P=" << p << " B=" << blocks << " L=" << layers.size() << '\n';
  os << "  LS    O(MP)              = " << ls_ops << '\n';
  os << "  MMSE  O(P^3 + M P^2)     = " << mmse_ops << '\n';
  os << "  CRLD  O(B M sum n_{l-1} s_l^2 n_l) = " << crld_online << '\n';
  os << "  per-layer terms n_{l-1} * s_l^2 * n_l:\n";
  for (const auto& l : layers)
    os << "    l=" << l.layer << ": " << l.in_depth << " * " << l.side << "^2 * " << l.out_depth << " = "
       << l.mults_per_pixel << '\n';
  os << "Offline training  O(N_t I B M sum ...) with N_t=" << training_examples << ", I=" << training_iterations
     << ": " << num(crld_offline) << '\n';
  if (ls_seconds >= 0.0) {
    os << "Measured seconds per estimate on this host (single sample, CPU):\n";
    os << "  LS   " << num(ls_seconds) << "\n  MMSE " << num(mmse_seconds) << "\n  CRLD " << num(crld_seconds) << '\n';
  }
  return os.str();
}

}  // namespace ambc
