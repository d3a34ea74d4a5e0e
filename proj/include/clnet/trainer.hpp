#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "clnet/blocks.hpp"
#include "clnet/channel.hpp"
#include "clnet/checkpoint.hpp"

namespace clnet {

struct TrainConfig {
  int epochs = 50;
  int batch = 64;
  double lr_peak = 1.5e-3;
  std::uint64_t seed = 1;
  int checkpoint_every = 0;  // epochs between mid-run checkpoints; 0 = none
  int stop_after = 0;        // interrupt once this many total epochs are done; 0 = run to `epochs`
};

struct EpochRecord {
  int epoch = 0;  // 1-based in logs
  double train_loss = 0.0;
  double val_nmse_db = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> rows;
  std::uint64_t seed = 0;
};

/// Training aborted on a non-finite loss; names the epoch and batch.
class TrainDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear warmup over the first 5% of epochs, then cosine decay to 1% of the
/// peak rate. `epoch` is 0-based.
double lr_schedule(int epoch, const TrainConfig& cfg);

/// Invoked after each epoch that hits the checkpoint cadence, and after the
/// final epoch.
using CheckpointSink = std::function<void(Model<float>&, const AdamState&, int epochs_done)>;

/// Minimizes the reconstruction error over the training split with shuffled
/// mini-batches and adaptive-moment updates (beta 0.9/0.999, eps 1e-8).
/// Deterministic for a fixed (config, seed): shuffles are pure functions of
/// (seed, epoch). Pass a loaded AdamState to resume from a checkpoint; the
/// continuation reproduces the uninterrupted run bit-exactly.
TrainLog train(Model<float>& model, const Dataset& data, const TrainConfig& cfg,
               const CheckpointSink& sink = nullptr, const AdamState* resume = nullptr);

std::string train_log_csv(const TrainLog& log);

}  // namespace clnet
