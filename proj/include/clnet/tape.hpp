#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <stdexcept>
#include <vector>

#include "clnet/tensor.hpp"

namespace clnet {

/// Record of the primitive operations applied during one forward pass,
/// replayed strictly in reverse by backward(). A tape is single-owner:
/// recording and backward happen on one logical thread of control.
///
/// Leaves may be registered as views of externally owned tensors (model
/// parameters, batch inputs); those must outlive the tape and stay unmodified
/// until backward has been read out. Intermediate values are owned by the
/// tape itself.
template <typename S>
class Tape {
 public:
  struct Slot {
    std::int32_t id = -1;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers an externally owned tensor as a differentiable leaf.
  Slot leaf(const Tensor<S>& external) {
    values_.push_back(&external);
    return Slot{static_cast<std::int32_t>(values_.size() - 1)};
  }

  /// Stores a freshly computed value and returns its slot. Callers pair this
  /// with node() so the value's vector-Jacobian product runs on backward.
  Slot push(Tensor<S> value) {
    owned_.push_back(std::move(value));
    values_.push_back(&owned_.back());
    return Slot{static_cast<std::int32_t>(values_.size() - 1)};
  }

  /// Appends a backward step. Steps run in exact reverse order of recording;
  /// each reads grad(out) and accumulates into grad(inputs).
  void node(std::function<void(Tape&)> vjp) { nodes_.push_back(std::move(vjp)); }

  const Tensor<S>& value(Slot s) const { return *values_[static_cast<std::size_t>(s.id)]; }

  /// Gradient buffer for a slot; valid once backward() has run.
  Tensor<S>& grad(Slot s) {
    if (grads_.empty()) throw std::logic_error("tape: grad() before backward()");
    return grads_[static_cast<std::size_t>(s.id)];
  }

  /// Reverse sweep from a scalar loss. Every slot gets a zero-initialized
  /// gradient first, so leaves the graph never touched read as zero.
  void backward(Slot loss, S seed = S(1)) {
    if (!grads_.empty()) throw std::logic_error("tape: backward() already ran");
    const Tensor<S>& l = value(loss);
    if (l.size() != 1) {
      throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(l.shape()));
    }
    grads_.reserve(values_.size());
    for (const Tensor<S>* v : values_) grads_.emplace_back(v->shape());
    grads_[static_cast<std::size_t>(loss.id)][0] = seed;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)(*this);
  }

  std::size_t num_slots() const { return values_.size(); }

 private:
  std::vector<const Tensor<S>*> values_;
  std::deque<Tensor<S>> owned_;  // deque: stable addresses for values_
  std::vector<Tensor<S>> grads_;
  std::vector<std::function<void(Tape&)>> nodes_;
};

template <typename S>
using TapeSlot = typename Tape<S>::Slot;

}  // namespace clnet
