#pragma once

#include <memory>
#include <string>
#include <vector>

#include "clnet/blocks.hpp"

namespace clnet {

/// Adaptive-moment optimizer state, parallel to the model's parameter visit
/// order. Persisted alongside checkpoints so training resumes bit-exactly.
struct AdamState {
  std::vector<Tensor<float>> m;
  std::vector<Tensor<float>> v;
  std::int64_t step = 0;
  int epochs_done = 0;
};

/// Checkpoint file: JSON header line (version, architecture, eta, na, c,
/// cprime, seed) followed by a named parameter list (u32 name length, name
/// bytes, u8 rank, u32 extents, raw float32 data) and a trailing CRC32 over
/// the parameter section.
void save_checkpoint(const std::string& path, Model<float>& model);

/// Rebuilds the architecture named in the header and fills its parameters.
std::unique_ptr<Model<float>> load_checkpoint(const std::string& path);

/// Optimizer state sidecar (same container format, tensors named m.N / v.N).
void save_train_state(const std::string& path, const AdamState& st);
AdamState load_train_state(const std::string& path);

}  // namespace clnet
