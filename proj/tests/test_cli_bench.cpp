#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <sys/wait.h>

#include "ambc/bench.hpp"
#include "ambc/config.hpp"
#include "ambc/errors.hpp"
#include "test_support.hpp"

using namespace ambc;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(AMBC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p);
  f << s;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string parse_error_message(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, EmptyGivesDefaults) {
  const AppConfig c = parse_config_text("");
  EXPECT_EQ(c, AppConfig{});
  EXPECT_NO_THROW(validate(c.system));
  EXPECT_NO_THROW(c.plan.validate());
  EXPECT_EQ(parse_config_text("# only a comment\n\n   \n"), AppConfig{});
}

TEST(Config, BadNumberNamesKeyAndLine) {
  const std::string msg = parse_error_message("m=64\nsnr_db=abc\n");
  EXPECT_NE(msg.find("snr_db"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  try {
    parse_config_text("snr_db=abc");
  } catch (const ParseError& e) {
    EXPECT_EQ(e.key(), "snr_db");
    EXPECT_EQ(e.line(), 1);
  }
}

TEST(Config, UnknownKeyRejectedWithLine) {
  const std::string msg = parse_error_message("seed=3\n\nbogus = 1\n");
  EXPECT_NE(msg.find("bogus"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Config, MalformedDuplicateAndOutOfRange) {
  EXPECT_NE(parse_error_message("just words\n").find("line 1"), std::string::npos);
  EXPECT_NE(parse_error_message("na=2\nna=3\n").find("duplicate"), std::string::npos);
  EXPECT_NE(parse_error_message("rho=1.5\n").find("rho"), std::string::npos);
  EXPECT_NE(parse_error_message("trials=10\n").find("trials"), std::string::npos);
  EXPECT_NE(parse_error_message("ma=4\n").find("ma"), std::string::npos);
  EXPECT_NE(parse_error_message("kernel=2\n").find("kernel"), std::string::npos);
}

TEST(Config, DumpRoundTrip) {
  AppConfig c = parse_config_text(
      "m=16\nma=4\nmb=4\nsnr_db=-3.25\nzeta_db=-inf\nf=0.7\ncorr_model=identity\nrho=0.3\nna=3\nnb=5\n"
      "seed=123456789\nsweep=pilots\naxis_values=2,4,8\nmethods=ls,crld\nlinks=composite\ntrials=500\n"
      "out=x/y.csv\noptimizer=sgd_momentum\nlr=0.01\nlr_decay=0.9\nmomentum=0.5\nstrict=false\n"
      "mixed_snr=true\nmixed_snr_min=-2\nmixed_snr_max=4\nblocks=2\nlayers=4\nfilters=16\nkernel=1\n"
      "recon=dense\ncheckpoint_dir=ck\nthreads=3\ntrain_examples=999\nbatch_size=7\nmax_epochs=9\n"
      "patience=2\nval_fraction=0.25\ntrain_seed=42\n");
  EXPECT_EQ(c.system.m, 16);
  EXPECT_EQ(c.hyper.p, 3);
  EXPECT_EQ(c.system.corr_h.dim, 16);
  EXPECT_EQ(parse_config_text(dump_config(c)), c);
  EXPECT_EQ(parse_config_text(dump_config(AppConfig{})), AppConfig{});
  c.system.snr_db = INFINITY;
  EXPECT_EQ(parse_config_text(dump_config(c)), c);
}

TEST(Config, ParseFromFileAndHelp) {
  ambc::testing::TempDir dir;
  write_text(dir / "c.cfg", "snr_db = 4\n");
  EXPECT_EQ(parse_config(dir / "c.cfg").system.snr_db, 4.0);
  EXPECT_THROW(parse_config(dir / "missing.cfg"), Error);
  const std::string help = config_help();
  for (const char* key : {"snr_db", "zeta_db", "corr_model", "trials", "lr", "blocks", "recon"})
    EXPECT_NE(help.find(key), std::string::npos) << key;
}

TEST(Sweep, LsSmokeTestIsFastAndValid) {
  AppConfig cfg;
  cfg.plan.methods = {Method::ls};
  cfg.plan.trials = 100;
  const auto t0 = std::chrono::steady_clock::now();
  const NmseReport r = run_sweep(cfg);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 1.0);
  const std::string csv = r.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "link,method,snr_db,p,nmse,ci_half_width,trials,wall_time_s");
  EXPECT_EQ(r.rows.size(), cfg.plan.values.size() * cfg.plan.links.size());
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(r.rows.size() + 1));
  for (const auto& row : r.rows) {
    EXPECT_GE(row.nmse, 0.0);
    EXPECT_GE(row.ci_half_width, 0.0);
    EXPECT_EQ(row.trials, 100);
  }
}

TEST(Sweep, SnrColumnsAreMonotone) {
  AppConfig cfg;
  cfg.plan.trials = 10000;
  cfg.threads = 2;
  const NmseReport r = run_sweep(cfg);
  for (Link link : cfg.plan.links)
    for (Method method : cfg.plan.methods)
      for (std::size_t i = 1; i < cfg.plan.values.size(); ++i) {
        const auto* lo = r.find(link, method, cfg.plan.values[i - 1], 2);
        const auto* hi = r.find(link, method, cfg.plan.values[i], 2);
        ASSERT_TRUE(lo && hi);
        EXPECT_LE(hi->nmse, lo->nmse + 3 * (hi->ci_half_width + lo->ci_half_width))
            << to_string(link) << " " << to_string(method) << " " << cfg.plan.values[i];
      }
}

TEST(Sweep, PilotSweepLsMatchesAnalyticRisk) {
  AppConfig cfg;
  cfg.system.corr_h.model = cfg.system.corr_g.model = CorrelationModel::identity;
  cfg.plan.axis = SweepAxis::pilots;
  cfg.plan.values = {2, 4, 8, 16};
  cfg.plan.methods = {Method::ls};
  cfg.plan.links = {Link::direct};
  const NmseReport r = run_sweep(cfg);
  const double s2 = std::pow(10.0, 0.6);
  ASSERT_EQ(r.rows.size(), 4u);
  for (const auto& row : r.rows) EXPECT_NEAR(row.nmse / (s2 / static_cast<double>(row.p)), 1.0, 0.05) << row.p;
}

TEST(Sweep, StrictModeIsByteIdenticalAcrossRunsAndThreads) {
  AppConfig cfg;
  cfg.plan.trials = 300;
  SweepOptions strict;
  strict.strict = true;
  const std::string a = run_sweep(cfg, strict).to_csv();
  cfg.threads = 4;
  const std::string b = run_sweep(cfg, strict).to_csv();
  EXPECT_EQ(a, b);
  cfg.system.seed = 2;
  EXPECT_NE(run_sweep(cfg, strict).to_csv(), a);
}

TEST(Sweep, EveryCombinationOnce) {
  AppConfig cfg;
  cfg.plan.trials = 100;
  cfg.plan.values = {-4, 0, 4};
  const NmseReport r = run_sweep(cfg);
  std::set<std::tuple<int, int, double>> seen;
  for (const auto& row : r.rows)
    EXPECT_TRUE(seen.insert({static_cast<int>(row.link), static_cast<int>(row.method), row.snr_db}).second);
  EXPECT_EQ(seen.size(), 2u * 2u * 3u);
  // Plan order: link, then axis value, then method.
  EXPECT_EQ(r.rows[0].link, Link::direct);
  EXPECT_EQ(r.rows[0].method, Method::ls);
  EXPECT_EQ(r.rows[1].method, Method::mmse);
  EXPECT_EQ(r.rows[2].snr_db, 0.0);
  EXPECT_EQ(r.rows.back().link, Link::composite);
}

TEST(Sweep, MissingCheckpointNamesExpectedPath) {
  ambc::testing::TempDir dir;
  AppConfig cfg;
  cfg.plan.methods = {Method::crld};
  cfg.plan.values = {-6};
  cfg.plan.links = {Link::direct};
  cfg.checkpoint_dir = dir.path().string();
  try {
    run_sweep(cfg);
    FAIL() << "expected MissingArtifactError";
  } catch (const MissingArtifactError& e) {
    const std::string want = crld_checkpoint_path(dir.path(), Link::direct, -6, 2).string();
    EXPECT_NE(std::string(e.what()).find(want), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("--train"), std::string::npos);
  }
}

TEST(Sweep, TrainFlagProducesCheckpointAndRow) {
  ambc::testing::TempDir dir;
  AppConfig cfg;
  cfg.system.m = 16;
  cfg.system.ma = cfg.system.mb = 4;
  cfg.system.corr_h.dim = cfg.system.corr_g.dim = 16;
  cfg.plan.methods = {Method::ls, Method::crld};
  cfg.plan.values = {0};
  cfg.plan.links = {Link::composite};
  cfg.plan.trials = 500;
  cfg.hyper.blocks = 1;
  cfg.hyper.layers = 2;
  cfg.hyper.filters = 4;
  cfg.train_examples = 400;
  cfg.train.max_epochs = 2;
  cfg.checkpoint_dir = dir.path().string();
  SweepOptions opts;
  opts.train_missing = true;
  const NmseReport r = run_sweep(cfg, opts);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[1].method, Method::crld);
  EXPECT_TRUE(std::filesystem::exists(crld_checkpoint_path(dir.path(), Link::composite, 0, 2)));
  // A second run finds the checkpoint without --train.
  EXPECT_EQ(run_sweep(cfg).rows[1].nmse, r.rows[1].nmse);
}

TEST(Complexity, DefaultConfigurationCounts) {
  AppConfig cfg;  // B=3, L=8, 64 filters, 3x3 kernels, M=64, P=2
  const ComplexityReport r = complexity_report(cfg, false);
  const Index per_pixel = 2 * 9 * 64 + 6 * (64 * 9 * 64) + 64 * 9 * 2;
  EXPECT_EQ(r.crld_online, 3 * 64 * per_pixel);
  EXPECT_EQ(r.crld_online, 42909696);
  EXPECT_EQ(r.ls_ops, 128);
  EXPECT_EQ(r.mmse_ops, 8 + 64 * 4);
  ASSERT_EQ(r.layers.size(), 8u);
  EXPECT_EQ(r.layers.front().in_depth, 2);
  EXPECT_EQ(r.layers.back().out_depth, 2);
  EXPECT_EQ(r.training_examples, 45000);
  EXPECT_NE(r.to_text().find("42909696"), std::string::npos);
}

TEST(Complexity, MeasuredLsIsFastest) {
  AppConfig cfg;
  cfg.hyper.blocks = 1;
  cfg.hyper.layers = 3;
  cfg.hyper.filters = 16;
  const ComplexityReport r = complexity_report(cfg, true);
  EXPECT_GT(r.ls_seconds, 0.0);
  EXPECT_LT(r.ls_seconds, r.mmse_seconds);
  EXPECT_LT(r.ls_seconds, r.crld_seconds);
}

TEST(Cli, ExitCodes) {
  ambc::testing::TempDir dir;
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("complexity --no-timing"), 0);
  EXPECT_EQ(run_cli("sweep --no-such-flag"), 2);
  write_text(dir / "bad.cfg", "snr_db=abc\n");
  EXPECT_EQ(run_cli("complexity --config " + (dir / "bad.cfg").string()), 2);
  EXPECT_EQ(run_cli("sweep --checkpoint-dir " + (dir / "none").string() + " --config " + (dir / "crld.cfg").string()),
            2);  // config file missing
  write_text(dir / "crld.cfg", "methods=crld\naxis_values=-6\n");
  EXPECT_EQ(run_cli("sweep --checkpoint-dir " + (dir / "none").string() + " --config " + (dir / "crld.cfg").string()),
            3);
  write_text(dir / "diverge.cfg",
             "m=4\nma=2\nmb=2\ntrain_examples=64\nbatch_size=4\nlr=1e30\nblocks=1\nlayers=2\nfilters=2\n");
  EXPECT_EQ(run_cli("train --config " + (dir / "diverge.cfg").string() + " --checkpoint " + (dir / "d.ckpt").string()),
            4);
}

TEST(Cli, SweepWritesCsvAndStrictIsReproducible) {
  ambc::testing::TempDir dir;
  const std::string base = "sweep --strict --trials 200 --seed 5 --out ";
  ASSERT_EQ(run_cli(base + (dir / "a.csv").string()), 0);
  ASSERT_EQ(run_cli(base + (dir / "b.csv").string()), 0);
  const std::string a = read_text(dir / "a.csv");
  EXPECT_EQ(a, read_text(dir / "b.csv"));
  EXPECT_EQ(a.substr(0, a.find('\n')), NmseReport::kCsvHeader);
}

TEST(Cli, GenTrainEvalAnalyzePipeline) {
  ambc::testing::TempDir dir;
  write_text(dir / "c.cfg",
             "m=4\nma=2\nmb=2\ncorr_model=identity\ntrain_examples=400\nmax_epochs=3\nblocks=1\nlayers=2\n"
             "filters=2\nkernel=1\ntrials=200\n");
  const std::string cfg = " --config " + (dir / "c.cfg").string();
  const std::string data = (dir / "d.ambd").string(), ckpt = (dir / "m.ckpt").string();
  ASSERT_EQ(run_cli("gen-data" + cfg + " --out " + data), 0);
  ASSERT_EQ(run_cli("train" + cfg + " --analysis --data " + data + " --checkpoint " + ckpt), 0);
  EXPECT_TRUE(std::filesystem::exists(ckpt + ".history.csv"));
  EXPECT_EQ(run_cli("eval" + cfg + " --checkpoint " + ckpt), 0);
  EXPECT_EQ(run_cli("analyze" + cfg + " --checkpoint " + ckpt), 0);
  EXPECT_EQ(run_cli("eval" + cfg + " --checkpoint " + (dir / "none.ckpt").string()), 3);
  EXPECT_EQ(run_cli("train" + cfg + " --data " + (dir / "none.ambd").string()), 3);
}
