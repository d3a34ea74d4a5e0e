#include "clnet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <numeric>
#include <random>

#include "clnet/ops.hpp"
#include "clnet/pipeline.hpp"

namespace clnet {

double lr_schedule(int epoch, const TrainConfig& cfg) {
  const int e = cfg.epochs;
  const int warmup = std::max(1, static_cast<int>(std::lround(0.05 * e)));
  if (epoch < warmup) {
    return cfg.lr_peak * static_cast<double>(epoch + 1) / warmup;
  }
  const double floor = 0.01 * cfg.lr_peak;
  const int span = e - warmup;  // cosine runs over [warmup-1, e-1]
  if (span <= 0) return cfg.lr_peak;
  const double t = static_cast<double>(epoch - warmup + 1) / span;
  return floor + (cfg.lr_peak - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (salt * 0x9e3779b97f4a7c15ULL);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Adam {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  AdamState st;

  void init_like(const std::vector<Tensor<float>*>& params) {
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const auto* p : params) {
      st.m.emplace_back(p->shape());
      st.v.emplace_back(p->shape());
    }
  }

  void step(const std::vector<Tensor<float>*>& params, const std::vector<Tensor<float>>& grads,
            double lr) {
    ++st.step;
    // Fold the bias corrections into float constants so the per-element loop
    // stays single-precision and vectorizes.
    const float inv_c1 = static_cast<float>(1.0 / (1.0 - std::pow(kBeta1, static_cast<double>(st.step))));
    const float inv_c2 = static_cast<float>(1.0 / (1.0 - std::pow(kBeta2, static_cast<double>(st.step))));
    const float b1 = static_cast<float>(kBeta1), b2 = static_cast<float>(kBeta2);
    const float lrf = static_cast<float>(lr), eps = static_cast<float>(kEps);
    for (std::size_t k = 0; k < params.size(); ++k) {
      Tensor<float>& p = *params[k];
      Tensor<float>& m = st.m[k];
      Tensor<float>& v = st.v[k];
      const Tensor<float>& g = grads[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const float gi = g[i];
        const float mi = b1 * m[i] + (1.0f - b1) * gi;
        const float vi = b2 * v[i] + (1.0f - b2) * gi * gi;
        m[i] = mi;
        v[i] = vi;
        p[i] -= lrf * (mi * inv_c1) / (std::sqrt(vi * inv_c2) + eps);
      }
    }
  }
};

}  // namespace

TrainLog train(Model<float>& model, const Dataset& data, const TrainConfig& cfg,
               const CheckpointSink& sink, const AdamState* resume) {
  const int n_train = data.hdr.n_train;
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (cfg.batch < 1 || cfg.batch > n_train) {
    throw std::invalid_argument("batch size " + std::to_string(cfg.batch) +
                                " must be in [1, training-set size " + std::to_string(n_train) + "]");
  }
  const int na = data.hdr.na;
  if (na != model.info().na) {
    throw ShapeError("dataset grid " + std::to_string(na) + " does not match model grid " +
                     std::to_string(model.info().na));
  }

  std::vector<Tensor<float>*> params;
  model.visit_params([&](const std::string&, Tensor<float>& p) { params.push_back(&p); });

  Adam adam;
  int first_epoch = 0;
  if (resume != nullptr) {
    if (resume->m.size() != params.size()) {
      throw std::invalid_argument("optimizer state does not match the model's parameter list");
    }
    adam.st = *resume;
    first_epoch = resume->epochs_done;
  } else {
    adam.init_like(params);
  }

  TrainLog log;
  log.seed = cfg.seed;

  const std::size_t elems = 2u * static_cast<std::size_t>(na) * na;
  std::vector<int> order(static_cast<std::size_t>(n_train));
  std::vector<Tensor<float>> grads;

  // The schedule spans cfg.epochs regardless of interruption, so a stopped
  // run resumed later retraces the uninterrupted one exactly.
  const int end_epoch =
      cfg.stop_after > 0 ? std::min(cfg.stop_after, cfg.epochs) : cfg.epochs;

  for (int epoch = first_epoch; epoch < end_epoch; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_schedule(epoch, cfg);

    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch) + 1));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    int batch_index = 0;
    for (int off = 0; off < n_train; off += cfg.batch, ++batch_index) {
      const int b = std::min(cfg.batch, n_train - off);
      Tensor<float> x({b, 2, na, na});
      for (int i = 0; i < b; ++i) {
        std::memcpy(x.data() + static_cast<std::size_t>(i) * elems,
                    data.train(order[static_cast<std::size_t>(off + i)]).data(),
                    elems * sizeof(float));
      }

      Tape<float> tape;
      Binding<float> bind(tape);
      auto xs = tape.leaf(x);
      auto ys = model.forward(tape, bind, xs);
      auto loss = mse_against(tape, ys, x);
      const float loss_value = tape.value(loss)[0];
      if (!std::isfinite(loss_value)) {
        throw TrainDiverged("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                            std::to_string(batch_index + 1));
      }
      loss_sum += static_cast<double>(loss_value) * b;

      tape.backward(loss);
      grads.clear();
      grads.reserve(params.size());
      for (auto* p : params) grads.push_back(bind.grad_of(*p));
      adam.step(params, grads, lr);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = loss_sum / n_train;
    rec.val_nmse_db = validation_nmse_db(model, data, cfg.batch);
    rec.lr = lr;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.rows.push_back(rec);

    adam.st.epochs_done = epoch + 1;
    const bool last = epoch + 1 == end_epoch;
    const bool cadence = cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0;
    if (sink && (last || cadence)) sink(model, adam.st, epoch + 1);
  }
  return log;
}

std::string train_log_csv(const TrainLog& log) {
  std::string out = "epoch,train_loss,val_nmse_db,lr,seconds\n";
  char buf[160];
  for (const auto& r : log.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.6f,%.9g,%.3f\n", r.epoch, r.train_loss,
                  r.val_nmse_db, r.lr, r.seconds);
    out += buf;
  }
  return out;
}

}  // namespace clnet
