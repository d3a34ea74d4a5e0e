#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "clnet/trainer.hpp"
#include "clnet/ops.hpp"

using namespace clnet;

namespace {

Dataset tiny_dataset(int count, int na, std::uint64_t seed) {
  MultipathSpec spec = MultipathSpec::indoor();
  spec.nc = 4 * na;
  spec.nt = na;
  spec.na = na;
  for (auto& c : spec.clusters) {
    c.delay_mean = std::min(c.delay_mean, na / 3.0);
    c.delay_spread = 0.3;
  }
  spec.seed = seed;
  return generate_dataset(spec, count, "indoor");
}

std::vector<TensorF> snapshot_params(Model<float>& m) {
  std::vector<TensorF> out;
  m.visit_params([&](const std::string&, TensorF& p) { out.push_back(p); });
  return out;
}

bool params_bit_equal(const std::vector<TensorF>& a, const std::vector<TensorF>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!a[k].same_shape(b[k])) return false;
    for (std::size_t i = 0; i < a[k].size(); ++i) {
      if (a[k][i] != b[k][i]) return false;
    }
  }
  return true;
}

ModelInfo small_info(std::uint64_t seed = 1) {
  ModelInfo info;
  info.na = 8;
  info.c = 4;
  info.cprime = 2;
  info.seed = seed;
  return info;
}

}  // namespace

TEST_CASE("learning-rate schedule endpoints") {
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.lr_peak = 2e-3;
  const int warmup = 3;  // round(0.05 * 50)
  CHECK(lr_schedule(0, cfg) == doctest::Approx(cfg.lr_peak / warmup).epsilon(1e-12));
  CHECK(lr_schedule(warmup - 1, cfg) == doctest::Approx(cfg.lr_peak).epsilon(1e-12));
  CHECK(std::abs(lr_schedule(49, cfg) - 0.01 * cfg.lr_peak) < 1e-9);

  TrainConfig one;
  one.epochs = 1;
  CHECK(lr_schedule(0, one) == doctest::Approx(one.lr_peak));
}

TEST_CASE("training loss strictly decreases while overfitting one sample") {
  auto data = tiny_dataset(15, 8, 3);
  // Shrink to a single training sample; keep one validation sample.
  data.hdr.count = 2;
  data.hdr.n_train = 1;
  data.hdr.n_val = 1;
  data.hdr.n_test = 0;
  data.samples.resize(2);

  auto model = assemble<float>(small_info(7));
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch = 1;
  cfg.lr_peak = 0.02;
  cfg.seed = 5;
  auto log = train(*model, data, cfg);
  REQUIRE(log.rows.size() == 20);
  for (std::size_t i = 1; i < log.rows.size(); ++i) {
    CHECK(log.rows[i].train_loss < log.rows[i - 1].train_loss);
  }
}

TEST_CASE("training is a pure function of config and seed") {
  auto data = tiny_dataset(15, 8, 11);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch = 5;
  cfg.seed = 9;

  auto m1 = assemble<float>(small_info(4));
  auto log1 = train(*m1, data, cfg);
  auto m2 = assemble<float>(small_info(4));
  auto log2 = train(*m2, data, cfg);

  CHECK(params_bit_equal(snapshot_params(*m1), snapshot_params(*m2)));
  REQUIRE(log1.rows.size() == log2.rows.size());
  for (std::size_t i = 0; i < log1.rows.size(); ++i) {
    CHECK(log1.rows[i].train_loss == log2.rows[i].train_loss);
    CHECK(log1.rows[i].val_nmse_db == log2.rows[i].val_nmse_db);
    CHECK(log1.rows[i].lr == log2.rows[i].lr);
  }
}

TEST_CASE("every parameter receives gradient somewhere across ten seeds") {
  std::vector<std::string> names;
  {
    auto probe = assemble<float>(small_info(1));
    probe->visit_params([&](const std::string& n, TensorF&) { names.push_back(n); });
  }
  std::vector<bool> touched(names.size(), false);

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto model = assemble<float>(small_info(seed));
    std::mt19937_64 rng(seed * 77);
    std::uniform_real_distribution<float> d(0.0f, 1.0f);
    TensorF x({4, 2, 8, 8});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = d(rng);

    Tape<float> t;
    Binding<float> bind(t);
    auto ys = model->forward(t, bind, t.leaf(x));
    auto loss = mse_against(t, ys, x);
    t.backward(loss);

    std::size_t k = 0;
    model->visit_params([&](const std::string&, TensorF& p) {
      auto g = bind.grad_of(p);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] != 0.0f) {
          touched[k] = true;
          break;
        }
      }
      ++k;
    });
  }
  for (std::size_t k = 0; k < touched.size(); ++k) {
    INFO("parameter ", names[k]);
    CHECK(touched[k]);
  }
}

TEST_CASE("a non-finite loss aborts naming the epoch and batch") {
  auto data = tiny_dataset(15, 8, 13);
  data.samples[0].at(0, 0, 0) = std::numeric_limits<float>::quiet_NaN();
  auto model = assemble<float>(small_info(2));
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch = 10;  // one batch holds every training sample
  try {
    train(*model, data, cfg);
    FAIL("expected TrainDiverged");
  } catch (const TrainDiverged& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("batch 1") != std::string::npos);
  }
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run") {
  auto data = tiny_dataset(15, 8, 17);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch = 5;
  cfg.seed = 21;

  auto full = assemble<float>(small_info(6));
  train(*full, data, cfg);
  auto want = snapshot_params(*full);

  // Interrupted run: capture the model and optimizer state after epoch 2.
  std::vector<TensorF> mid_params;
  AdamState mid_state;
  {
    auto m = assemble<float>(small_info(6));
    TrainConfig half = cfg;
    half.epochs = 4;
    half.checkpoint_every = 2;
    CheckpointSink sink = [&](Model<float>& mm, const AdamState& st, int done) {
      if (done == 2) {
        mid_params = snapshot_params(mm);
        mid_state = st;
      }
    };
    train(*m, data, half, sink);
  }
  REQUIRE_FALSE(mid_params.empty());

  // Fresh model, parameters restored, optimizer state resumed.
  auto resumed = assemble<float>(small_info(6));
  std::size_t k = 0;
  resumed->visit_params([&](const std::string&, TensorF& p) { p = mid_params[k++]; });
  train(*resumed, data, cfg, nullptr, &mid_state);

  CHECK(params_bit_equal(snapshot_params(*resumed), want));
}

TEST_CASE("mse loss examples and validation wiring") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  TensorF a({3, 4});
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = d(rng);
  CHECK(mse_loss(a, a) == 0.0f);
  auto b = a;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] += 1.0f;
  CHECK(mse_loss(a, b) == doctest::Approx(1.0f));

  auto data = tiny_dataset(15, 8, 29);
  auto model = assemble<float>(small_info(3));
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch = 10;
  auto log = train(*model, data, cfg);
  REQUIRE(log.rows.size() == 1);
  CHECK(std::isfinite(log.rows[0].val_nmse_db));

  const auto csv = train_log_csv(log);
  CHECK(csv.rfind("epoch,train_loss,val_nmse_db,lr,seconds\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);

  TrainConfig bad = cfg;
  bad.batch = 100;  // larger than the training split
  CHECK_THROWS_AS(train(*model, data, bad), std::invalid_argument);
}
