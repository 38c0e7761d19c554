#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "emoda/errors.hpp"
#include "emoda/tensor.hpp"

namespace emoda::ad {

// Records executed ops in order; replaying the records in reverse is the
// backward pass. Tensors produced by ops are "owned" intermediates: their
// gradients are reset at the start of every backward call, while leaf
// tensors (parameters, inputs) accumulate across calls until explicitly
// zeroed by the caller.
template <class T>
class Tape {
  public:
    using BackwardFn = std::function<void()>;

    void record(BackwardFn fn) {
        if (recording_) records_.push_back(std::move(fn));
    }

    void own(const Tensor<T>& t) {
        if (recording_) owned_.push_back(t);
    }

    bool recording() const { return recording_; }
    void set_recording(bool on) { recording_ = on; }

    std::size_t record_count() const { return records_.size(); }

    void backward(const Tensor<T>& loss) {
        if (!loss.defined() || loss.size() != 1) {
            throw ContractError("backward requires a scalar loss tensor");
        }
        for (auto& t : owned_) t.zero_grad();
        Tensor<T> seed = loss;
        seed.grad()[0] += T(1);
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
    }

    void clear() {
        records_.clear();
        owned_.clear();
    }

  private:
    std::vector<BackwardFn> records_;
    std::vector<Tensor<T>> owned_;
    bool recording_ = true;
};

// Forward-only scope: ops executed while this is alive compute values but
// record nothing.
template <class T>
class NoGradScope {
  public:
    explicit NoGradScope(Tape<T>& tape) : tape_(tape), prev_(tape.recording()) {
        tape_.set_recording(false);
    }
    ~NoGradScope() { tape_.set_recording(prev_); }

  private:
    Tape<T>& tape_;
    bool prev_;
};

} // namespace emoda::ad
