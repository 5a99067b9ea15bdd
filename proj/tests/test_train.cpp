#include <gtest/gtest.h>

#include <fstream>
#include <iterator>

#include "ambc/checkpoint.hpp"
#include "ambc/dataset.hpp"
#include "ambc/errors.hpp"
#include "ambc/train.hpp"
#include "test_support.hpp"

using namespace ambc;

namespace {

SystemConfig geometry(Index ma, Index mb, double snr_db, CorrelationModel corr = CorrelationModel::exponential) {
  SystemConfig cfg;
  cfg.m = ma * mb;
  cfg.ma = ma;
  cfg.mb = mb;
  cfg.snr_db = snr_db;
  cfg.corr_h = cfg.corr_g = CorrelationSpec{corr, 0.9, cfg.m};
  return cfg;
}

CrldHyper hyper_for(const SystemConfig& cfg, Index blocks, Index layers, Index filters) {
  CrldHyper h;
  h.blocks = blocks;
  h.layers = layers;
  h.filters = filters;
  h.ma = cfg.ma;
  h.mb = cfg.mb;
  h.p = cfg.na;
  return h;
}

std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

}  // namespace

TEST(Dataset, NoiselessSlicesEqualLabels) {
  SystemConfig cfg = geometry(2, 3, INFINITY);
  const Dataset ds = generate_dataset(cfg, Link::composite, 20, 1);
  ASSERT_EQ(ds.size(), 20);
  for (Index k = 0; k < ds.size(); ++k)
    for (Index m = 0; m < 6; ++m)
      for (Index q = 0; q < ds.p; ++q)
        EXPECT_EQ(ds.inputs[static_cast<std::size_t>(k * 12 + m * 2 + q)], ds.labels[static_cast<std::size_t>(k * 6 + m)]);
}

TEST(Dataset, FixedSeedGivesIdenticalFile) {
  ambc::testing::TempDir dir;
  const SystemConfig cfg = geometry(2, 2, 0.0);
  save_dataset(generate_dataset(cfg, Link::direct, 50, 9), dir / "a.ambd");
  save_dataset(generate_dataset(cfg, Link::direct, 50, 9), dir / "b.ambd");
  save_dataset(generate_dataset(cfg, Link::direct, 50, 10), dir / "c.ambd");
  EXPECT_EQ(read_bytes(dir / "a.ambd"), read_bytes(dir / "b.ambd"));
  EXPECT_NE(read_bytes(dir / "a.ambd"), read_bytes(dir / "c.ambd"));
  EXPECT_EQ(std::string(read_bytes(dir / "a.ambd").data(), 4), "AMBD");
}

TEST(Dataset, NoiseVarianceMatches) {
  const SystemConfig cfg = geometry(8, 8, 0.0);
  const Dataset ds = generate_dataset(cfg, Link::direct, 10000, 2);
  double acc = 0.0;
  const Index wi = ds.input_width(), wl = ds.label_width();
  for (Index k = 0; k < ds.size(); ++k)
    for (Index m = 0; m < wl; ++m)
      for (Index q = 0; q < ds.p; ++q) {
        const double u = ds.inputs[static_cast<std::size_t>(k * wi + m * ds.p + q)] -
                         ds.labels[static_cast<std::size_t>(k * wl + m)];
        acc += u * u;
      }
  const double var = acc / static_cast<double>(ds.size() * wi);
  EXPECT_NEAR(var / ChannelModel(cfg).sigma_u_sq(), 1.0, 0.03);
}

TEST(Dataset, EmptyRejected) {
  EXPECT_THROW(generate_dataset(SystemConfig{}, Link::direct, 0, 1), ParameterError);
}

TEST(Dataset, SaveLoadRoundTrip) {
  ambc::testing::TempDir dir;
  SystemConfig cfg = geometry(2, 4, -3.0);
  cfg.nb = 3;
  MixedSnr mixed{true, -4.0, 6.0};
  const Dataset ds = generate_dataset(cfg, Link::composite, 25, 77, mixed);
  save_dataset(ds, dir / "d.ambd");
  const Dataset back = load_dataset(dir / "d.ambd");
  EXPECT_EQ(back.config, ds.config);
  EXPECT_EQ(back.link, Link::composite);
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(back.mixed, mixed);
  EXPECT_EQ(back.p, 3);
  EXPECT_EQ(back.inputs, ds.inputs);
  EXPECT_EQ(back.labels, ds.labels);
}

TEST(Dataset, BadFilesRejected) {
  ambc::testing::TempDir dir;
  save_dataset(generate_dataset(geometry(2, 2, 0.0), Link::direct, 5, 1), dir / "d.ambd");
  auto b = read_bytes(dir / "d.ambd");
  auto write = [&](const std::string& name, const std::vector<char>& bytes) {
    std::ofstream f(dir / name, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    return dir / name;
  };
  auto bad_magic = b;
  bad_magic[1] = 'X';
  EXPECT_THROW(load_dataset(write("m.ambd", bad_magic)), FormatError);
  auto bad_version = b;
  bad_version[4] = 9;
  EXPECT_THROW(load_dataset(write("v.ambd", bad_version)), FormatError);
  EXPECT_THROW(load_dataset(write("t.ambd", std::vector<char>(b.begin(), b.end() - 9))), FormatError);
  EXPECT_THROW(load_dataset(dir / "missing.ambd"), MissingArtifactError);
}

TEST(Dataset, GatherBatchLayout) {
  const Dataset ds = generate_dataset(geometry(2, 2, 0.0), Link::direct, 4, 3);
  const std::vector<Index> idx{3, 1};
  auto [y, x] = gather_batch<double>(ds, idx, 0, 2);
  EXPECT_EQ(y.shape(), (std::vector<Index>{2, 2, 2, 2}));
  EXPECT_EQ(x.shape(), (std::vector<Index>{2, 2, 2, 1}));
  EXPECT_EQ(y(0, 1, 0, 1), ds.inputs[3 * 8 + (1 * 2 + 0) * 2 + 1]);
  EXPECT_EQ(x(1, 1, 1, 0), ds.labels[1 * 4 + 3]);
}

TEST(Train, NoiselessPassThroughIsLearned) {
  const SystemConfig cfg = geometry(4, 4, INFINITY);
  const Dataset ds = generate_dataset(cfg, Link::direct, 400, 4);
  Rng rng(5);
  auto model = CrldModel<double>::build(hyper_for(cfg, 1, 2, 2), rng);
  zero_residual_branches(model);
  TrainOptions opts;
  opts.batch_size = 32;
  opts.max_epochs = 40;
  opts.patience = 40;
  opts.optimizer.learning_rate = 5e-2;
  opts.lr_decay = 0.9;
  const auto result = train(model, ds, opts);
  const auto& hist = result.history;
  // Identity blocks: the untrained error is the reconstruction layer's alone.
  const double w0 = model.recon_conv().filters.sum();
  EXPECT_GT(hist.epochs.front().val_loss_mean, 0.0);
  EXPECT_NEAR(hist.epochs.front().val_loss_mean / 16.0, (w0 - 1.0) * (w0 - 1.0), 0.5 * (w0 - 1.0) * (w0 - 1.0));
  EXPECT_LT(hist.best_val_loss_mean(), 1e-6);
}

TEST(Train, TinyDatasetTerminatesWithWellFormedHistory) {
  const SystemConfig cfg = geometry(2, 2, 0.0);
  const Dataset ds = generate_dataset(cfg, Link::direct, 2, 6);
  Rng rng(6);
  TrainOptions opts;
  opts.patience = 1;
  opts.max_epochs = 20;
  const auto result = train(CrldModel<double>::build(hyper_for(cfg, 1, 2, 2), rng), ds, opts);
  const auto& h = result.history;
  ASSERT_GE(h.epochs.size(), 2u);
  EXPECT_LE(h.stop_epoch, 20);
  EXPECT_EQ(h.epochs.back().epoch, h.stop_epoch);
  for (std::size_t i = 0; i < h.epochs.size(); ++i) EXPECT_EQ(h.epochs[i].epoch, static_cast<Index>(i));
  EXPECT_EQ(result.model.mode(), Mode::eval);
}

TEST(Train, DeterministicUnderSeedAndBestSnapshotReturned) {
  const SystemConfig cfg = geometry(4, 4, -2.0);
  const Dataset ds = generate_dataset(cfg, Link::direct, 300, 7);
  TrainOptions opts;
  opts.batch_size = 16;
  opts.max_epochs = 6;
  opts.patience = 2;
  opts.optimizer.learning_rate = 3e-3;
  auto run = [&] {
    Rng rng(8);
    return train(CrldModel<double>::build(hyper_for(cfg, 1, 3, 4), rng), ds, opts);
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.history.epochs.size(), b.history.epochs.size());
  EXPECT_EQ(a.history.to_csv(), b.history.to_csv());
  for (std::size_t i = 0; i < a.history.epochs.size(); ++i) {
    EXPECT_EQ(a.history.epochs[i].train_loss, b.history.epochs[i].train_loss);
    EXPECT_EQ(a.history.epochs[i].val_loss, b.history.epochs[i].val_loss);
  }
  double best = INFINITY, min_val = INFINITY;
  for (const auto& e : a.history.epochs) {
    EXPECT_LE(std::min(best, e.val_loss), best);
    best = std::min(best, e.val_loss);
    min_val = std::min(min_val, e.val_loss_mean);
  }
  EXPECT_EQ(a.history.best_val_loss_mean(), min_val);
  // The returned model reproduces the best validation loss.
  std::vector<Index> order(static_cast<std::size_t>(ds.size()));
  std::iota(order.begin(), order.end(), Index(0));
  Rng split(mix_seed(opts.seed, 0xA11));
  std::shuffle(order.begin(), order.end(), split.engine());
  const Index n_val = 30;
  std::vector<Index> val(order.end() - n_val, order.end());
  auto [y, x] = gather_batch<double>(ds, val, 0, val.size());
  const double loss = nn::mse_loss(a.model.predict(y), x).loss / static_cast<double>(n_val);
  EXPECT_NEAR(loss, min_val, 1e-9 * min_val);
  EXPECT_EQ(a.history.to_csv().substr(0, a.history.to_csv().find('\n')), "epoch,train_loss,val_loss,is_best");
}

TEST(Train, NonFiniteLossReportsEpochAndBatch) {
  const SystemConfig cfg = geometry(2, 2, 0.0);
  Dataset ds = generate_dataset(cfg, Link::direct, 40, 9);
  ds.inputs[5] = std::numeric_limits<double>::infinity();
  Rng rng(9);
  TrainOptions opts;
  opts.batch_size = 8;
  try {
    train(CrldModel<double>::build(hyper_for(cfg, 1, 2, 2), rng), ds, opts);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch"), std::string::npos) << msg;
  }
}

TEST(Train, GeometryMismatchRejected) {
  const Dataset ds = generate_dataset(geometry(2, 2, 0.0), Link::direct, 10, 1);
  Rng rng(1);
  EXPECT_THROW(train(CrldModel<double>::build(hyper_for(geometry(4, 4, 0.0), 1, 2, 2), rng), ds, TrainOptions{}),
               ShapeError);
}

TEST(Evaluate, LsMapModelMatchesAnalyticRisk) {
  SystemConfig cfg = geometry(4, 4, 0.0, CorrelationModel::identity);
  Rng rng(10);
  auto model = CrldModel<double>::build(hyper_for(cfg, 2, 3, 3), rng);
  zero_residual_branches(model);
  set_recon_channel_average(model);
  EXPECT_THROW(evaluate(model, cfg, Link::direct, 100, 1), StateError);
  model.set_mode(Mode::eval);
  const auto r = evaluate(model, cfg, Link::direct, 10000, 11);
  EXPECT_NEAR(r.nmse / 0.5, 1.0, 0.05);
  EXPECT_THROW(evaluate(model, cfg, Link::direct, 0, 1), ParameterError);
  const auto again = evaluate(model, cfg, Link::direct, 10000, 11);
  EXPECT_EQ(r.nmse, again.nmse);
  EXPECT_EQ(r.ci_half_width, again.ci_half_width);
}

// Small float CRLD trained briefly on correlated channels must beat LS by
// more than three confidence half-widths and never be worse than zero.
TEST(Evaluate, DeskScaleLearningBeatsLs) {
  for (double snr : {-6.0, -10.0}) {
    SystemConfig cfg = geometry(8, 8, snr);
    const Dataset ds = generate_dataset(cfg, Link::direct, 6000, 12);
    Rng rng(13);
    TrainOptions opts;
    opts.max_epochs = 8;
    opts.batch_size = 64;
    opts.optimizer.learning_rate = 5e-3;
    opts.lr_decay = 0.85;
    const auto result = train(CrldModel<float>::build(hyper_for(cfg, 1, 3, 8), rng), ds, opts);
    const auto crld = evaluate(result.model, cfg, Link::direct, 5000, 14);
    const double ls = ChannelModel(cfg).sigma_u_sq() / 2.0;
    EXPECT_LT(crld.nmse, 1.0) << snr;
    EXPECT_GT(ls - crld.nmse, 3 * crld.ci_half_width) << snr;
  }
}
