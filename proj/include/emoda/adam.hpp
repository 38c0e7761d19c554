#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "emoda/errors.hpp"
#include "emoda/tensor.hpp"

namespace emoda::ad {

template <class T>
struct AdamState {
    std::vector<T> m;
    std::vector<T> v;
    long long t = 0;
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One Adam update with bias correction for a single parameter buffer.
template <class T>
void adam_step(std::vector<T>& param, const std::vector<T>& grad, AdamState<T>& state, T lr,
               const AdamHyper& hp = {}) {
    if (state.m.empty()) state.m.assign(param.size(), T(0));
    if (state.v.empty()) state.v.assign(param.size(), T(0));
    if (grad.size() != param.size() || state.m.size() != param.size() ||
        state.v.size() != param.size()) {
        throw ShapeError("adam_step: param/grad/state length mismatch (" +
                         std::to_string(param.size()) + "/" + std::to_string(grad.size()) +
                         "/" + std::to_string(state.m.size()) + ")");
    }
    state.t += 1;
    const T b1 = static_cast<T>(hp.beta1), b2 = static_cast<T>(hp.beta2);
    const T bc1 = static_cast<T>(1.0 - std::pow(hp.beta1, static_cast<double>(state.t)));
    const T bc2 = static_cast<T>(1.0 - std::pow(hp.beta2, static_cast<double>(state.t)));
    const T eps = static_cast<T>(hp.eps);
    for (std::size_t i = 0; i < param.size(); ++i) {
        T g = grad[i];
        state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
        state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
        T mhat = state.m[i] / bc1;
        T vhat = state.v[i] / bc2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

// Applies adam_step to a list of parameter tensors, keeping one moment
// state per tensor.
template <class T>
class AdamOptimizer {
  public:
    AdamOptimizer(std::vector<Tensor<T>> params, T lr, AdamHyper hp = {})
        : params_(std::move(params)), states_(params_.size()), lr_(lr), hp_(hp) {
        for (auto& p : params_) p.set_requires_grad(true);
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    void step() {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            adam_step(params_[i].values(), params_[i].grad(), states_[i], lr_, hp_);
        }
    }

    const std::vector<Tensor<T>>& params() const { return params_; }
    long long steps_taken() const { return states_.empty() ? 0 : states_[0].t; }

  private:
    std::vector<Tensor<T>> params_;
    std::vector<AdamState<T>> states_;
    T lr_;
    AdamHyper hp_;
};

} // namespace emoda::ad
