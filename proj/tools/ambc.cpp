// ambc: dataset generation, CRLD training, evaluation, sweeps, linear-map
// analysis, and complexity accounting.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <unsupported/Eigen/KroneckerProduct>

#include "ambc/analysis.hpp"
#include "ambc/bench.hpp"
#include "ambc/checkpoint.hpp"
#include "ambc/config.hpp"
#include "ambc/errors.hpp"

namespace fs = std::filesystem;
using namespace ambc;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kMissing = 3, kNumeric = 4 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<Index> trials;
  std::string out;
  std::string checkpoint_dir;
  std::string link = "direct";
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key=value configuration file");
  cmd->add_option("--seed", c.seed, "system seed (overrides config)");
  cmd->add_option("--threads", c.threads, "worker threads (overrides config)");
}

AppConfig load(const Common& c) {
  AppConfig cfg = c.config.empty() ? AppConfig{} : parse_config(c.config);
  if (c.seed) cfg.system.seed = *c.seed;
  if (c.trials) cfg.plan.trials = *c.trials;
  if (!c.out.empty()) cfg.plan.out = c.out;
  if (!c.checkpoint_dir.empty()) cfg.checkpoint_dir = c.checkpoint_dir;
  if (c.threads) cfg.threads = *c.threads;
  validate(cfg.system);
  return cfg;
}

void log_line(const std::string& s) { std::cerr << s << '\n'; }

fs::path default_checkpoint(const AppConfig& cfg, Link link) {
  return crld_checkpoint_path(cfg.checkpoint_dir, link, cfg.system.snr_db, cfg.system.pilots(link));
}

CrldHyper hyper_for(const AppConfig& cfg, const Dataset& ds) {
  CrldHyper h = cfg.hyper;
  h.ma = ds.ma;
  h.mb = ds.mb;
  h.p = ds.p;
  return h;
}

int cmd_gen_data(const Common& c, Index examples, const std::string& out) {
  const AppConfig cfg = load(c);
  const Index k = examples > 0 ? examples : cfg.train_examples;
  const Dataset ds = generate_dataset(cfg.system, link_from_string(c.link), k, cfg.system.seed, cfg.mixed);
  save_dataset(ds, out);
  std::cout << "wrote " << ds.size() << " examples (" << ds.ma << "x" << ds.mb << "x" << ds.p << ") to " << out
            << '\n';
  return kOk;
}

int cmd_train(const Common& c, const std::string& data, std::string checkpoint, std::string history,
              bool analysis) {
  AppConfig cfg = load(c);
  const Link link = link_from_string(c.link);
  if (checkpoint.empty()) checkpoint = default_checkpoint(cfg, link).string();
  if (history.empty()) history = checkpoint + ".history.csv";
  Dataset ds;
  if (!data.empty()) {
    ds = load_dataset(data);
  } else {
    log_line("generating " + std::to_string(cfg.train_examples) + " training examples");
    ds = generate_dataset(cfg.system, link, cfg.train_examples, mix_seed(cfg.system.seed, 0x7EA1ULL + int(link)),
                          cfg.mixed);
  }
  CrldHyper h = hyper_for(cfg, ds);
  h.analysis = analysis;
  Rng init(mix_seed(cfg.train.seed, 0x1417ULL));
  auto model = CrldModel<float>::build(h, init);
  std::cerr << "CRLD B=" << h.blocks << " L=" << h.layers << " filters=" << h.filters << " kernel=" << h.kernel
            << " params=" << model.parameter_count() << '\n';
  auto result = train(std::move(model), ds, cfg.train, [](const EpochRecord& r) {
    std::fprintf(stderr, "epoch %3ld  train %.6g  val %.6g  lr %.3g%s\n", static_cast<long>(r.epoch),
                 r.train_loss_mean, r.val_loss_mean, r.learning_rate, r.is_best ? "  *" : "");
  });
  if (fs::path(checkpoint).has_parent_path()) fs::create_directories(fs::path(checkpoint).parent_path());
  save_checkpoint(result.model, checkpoint);
  result.history.write_csv(history);
  for (const auto& e : result.history.events) log_line(e);
  std::cout << "best epoch " << result.history.best_epoch << ", validation loss per example "
            << result.history.best_val_loss_mean() << "\ncheckpoint " << checkpoint << "\nhistory " << history
            << '\n';
  return kOk;
}

int cmd_eval(const Common& c, std::string checkpoint) {
  const AppConfig cfg = load(c);
  const Link link = link_from_string(c.link);
  if (checkpoint.empty()) checkpoint = default_checkpoint(cfg, link).string();
  if (!fs::exists(checkpoint)) throw MissingArtifactError("missing CRLD checkpoint " + checkpoint);
  auto model = load_checkpoint<float>(checkpoint);
  model.set_mode(Mode::eval);
  const std::uint64_t seed = mix_seed(cfg.system.seed, 0xE7A1ULL);
  const NmseEstimate crld = evaluate(model, cfg.system, link, cfg.plan.trials, seed);

  const Dataset ds = generate_dataset(cfg.system, link, cfg.plan.trials, seed);
  const ChannelModel channel(cfg.system);
  const auto mmse =
      linear_map_nmse(vector_mmse_map(channel.correlation(link), channel.sigma_u_sq(), ds.ma, ds.mb, ds.p), ds);
  LinearMap ls_map;
  ls_map.ma = ds.ma;
  ls_map.mb = ds.mb;
  ls_map.p = ds.p;
  ls_map.full = Eigen::kroneckerProduct(MatrixXd::Identity(ds.ma * ds.mb, ds.ma * ds.mb),
                                        RowVectorXd::Constant(ds.p, 1.0 / static_cast<double>(ds.p)));
  const auto ls = linear_map_nmse(ls_map, ds);
  std::printf("link %s  snr %g dB  P=%ld  trials %ld\n", to_string(link), cfg.system.snr_db,
              static_cast<long>(ds.p), static_cast<long>(crld.trials));
  std::printf("  crld  %.6f +- %.6f\n  mmse  %.6f +- %.6f\n  ls    %.6f +- %.6f\n", crld.nmse, crld.ci_half_width,
              mmse.nmse, mmse.ci_half_width, ls.nmse, ls.ci_half_width);
  return kOk;
}

int cmd_sweep(const Common& c, bool train_missing, bool strict) {
  const AppConfig cfg = load(c);
  SweepOptions opts;
  opts.train_missing = train_missing;
  opts.strict = strict;
  opts.log = log_line;
  const NmseReport report = run_sweep(cfg, opts);
  report.write_csv(cfg.plan.out);
  std::cerr << "wrote " << report.rows.size() << " rows to " << cfg.plan.out << '\n';
  return kOk;
}

int cmd_analyze(const Common& c, std::string checkpoint) {
  const AppConfig cfg = load(c);
  const Link link = link_from_string(c.link);
  if (checkpoint.empty()) checkpoint = default_checkpoint(cfg, link).string();
  if (!fs::exists(checkpoint)) throw MissingArtifactError("missing CRLD checkpoint " + checkpoint);
  auto model = load_checkpoint<double>(checkpoint);
  model.set_mode(Mode::eval);
  if (!model.analysis())
    std::cerr << "note: checkpoint was not trained in analysis mode; probing it with BN and ReLU bypassed\n";
  model.set_analysis(true);
  const LinearMap learned = extract_effective_map(model, mix_seed(cfg.system.seed, 0xA7A1ULL));
  const ChannelModel channel(cfg.system);
  const CrldHyper& h = model.hyper();
  const LinearMap target = vector_mmse_map(channel.correlation(link), channel.sigma_u_sq(), h.ma, h.mb, h.p);
  const Dataset ds = generate_dataset(cfg.system, link, cfg.plan.trials, mix_seed(cfg.system.seed, 0xA7A2ULL));
  MapDistance d;
  const double norm = target.full.norm();
  if (!(norm > 0.0)) throw MetricError("analyze: target map has zero norm");
  d.frobenius_rel = (learned.full - target.full).norm() / norm;
  d.nmse_learned = linear_map_nmse(learned, ds).nmse;
  d.nmse_target = linear_map_nmse(target, ds).nmse;
  d.nmse_gap = d.nmse_learned - d.nmse_target;
  std::cout << format_map_report(learned, target, d);
  return kOk;
}

int cmd_complexity(const Common& c, bool measure) {
  const AppConfig cfg = load(c);
  std::cout << complexity_report(cfg, measure).to_text();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Channel-estimation workbench for ambient backscatter links"};
  app.require_subcommand(1);
  app.footer("Configuration keys (key=value, one per line):\n" + config_help() +
             "\nExit codes: 0 success, 2 config error, 3 missing artifact, 4 numeric failure.");

  Common c;
  Index examples = 0;
  std::string data, checkpoint, history, data_out;
  bool analysis = false, train_missing = false, strict = false, no_timing = false;

  auto* gen = app.add_subcommand("gen-data", "simulate a training dataset");
  add_common(gen, c);
  gen->add_option("--link", c.link, "direct or composite")->capture_default_str();
  gen->add_option("--examples", examples, "number of examples (default: train_examples)");
  gen->add_option("--out", data_out, "dataset file")->required();

  auto* tr = app.add_subcommand("train", "train a CRLD for one operating point");
  add_common(tr, c);
  tr->add_option("--link", c.link, "direct or composite")->capture_default_str();
  tr->add_option("--data", data, "dataset file (default: simulate train_examples)");
  tr->add_option("--checkpoint", checkpoint, "output checkpoint (default: under --checkpoint-dir)");
  tr->add_option("--checkpoint-dir", c.checkpoint_dir, "checkpoint directory");
  tr->add_option("--history", history, "training history CSV (default: <checkpoint>.history.csv)");
  tr->add_flag("--analysis", analysis, "linear analysis mode (BN bypassed, identity activation, no biases)");

  auto* ev = app.add_subcommand("eval", "NMSE of a checkpoint next to LS and MMSE");
  add_common(ev, c);
  ev->add_option("--link", c.link, "direct or composite")->capture_default_str();
  ev->add_option("--checkpoint", checkpoint, "checkpoint (default: under --checkpoint-dir)");
  ev->add_option("--checkpoint-dir", c.checkpoint_dir, "checkpoint directory");
  ev->add_option("--trials", c.trials, "Monte Carlo trials");

  auto* sw = app.add_subcommand("sweep", "NMSE sweep over SNR or pilot count, written as CSV");
  add_common(sw, c);
  sw->add_option("--trials", c.trials, "Monte Carlo trials per point");
  sw->add_option("--out", c.out, "CSV output path");
  sw->add_option("--checkpoint-dir", c.checkpoint_dir, "CRLD checkpoint directory");
  sw->add_flag("--train", train_missing, "train missing CRLD checkpoints");
  sw->add_flag("--strict", strict, "deterministic output (wall times written as 0)");

  auto* an = app.add_subcommand("analyze", "compare a checkpoint's effective linear map with the MMSE map");
  add_common(an, c);
  an->add_option("--link", c.link, "direct or composite")->capture_default_str();
  an->add_option("--checkpoint", checkpoint, "checkpoint (default: under --checkpoint-dir)");
  an->add_option("--checkpoint-dir", c.checkpoint_dir, "checkpoint directory");
  an->add_option("--trials", c.trials, "Monte Carlo trials for the NMSE gap");

  auto* cx = app.add_subcommand("complexity", "operation counts and measured time per estimate");
  add_common(cx, c);
  cx->add_flag("--no-timing", no_timing, "skip wall-time measurement");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) return cmd_gen_data(c, examples, data_out);
    if (*tr) return cmd_train(c, data, checkpoint, history, analysis);
    if (*ev) return cmd_eval(c, checkpoint);
    if (*sw) return cmd_sweep(c, train_missing, strict);
    if (*an) return cmd_analyze(c, checkpoint);
    if (*cx) return cmd_complexity(c, !no_timing);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMissing;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
