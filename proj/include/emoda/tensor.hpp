#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "emoda/errors.hpp"
#include "emoda/rng.hpp"

namespace emoda::ad {

inline std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

inline std::vector<std::size_t> checked_shape(const std::vector<long long>& dims) {
    if (dims.empty()) throw ShapeError("tensor shape must have at least one dimension");
    std::vector<std::size_t> out;
    out.reserve(dims.size());
    for (long long d : dims) {
        if (d < 1) {
            throw ShapeError("invalid tensor dimension " + std::to_string(d) +
                             " (all dimensions must be >= 1)");
        }
        out.push_back(static_cast<std::size_t>(d));
    }
    return out;
}

// Shared-handle n-d array. Holds the flat value buffer plus an optional
// gradient buffer of identical length; ops on a Tape link these nodes into
// a backward graph.
template <class T>
class Tensor {
  public:
    struct Node {
        std::vector<std::size_t> shape;
        std::vector<T> value;
        std::vector<T> grad; // empty until gradient is needed
        bool requires_grad = false;
    };

    Tensor() = default;

    static Tensor zeros(const std::vector<long long>& dims, bool requires_grad = false) {
        return filled(dims, T(0), requires_grad);
    }

    static Tensor constant(const std::vector<long long>& dims, T c, bool requires_grad = false) {
        return filled(dims, c, requires_grad);
    }

    // U(-limit, +limit) with limit = sqrt(6 / (fan_in + fan_out)).
    static Tensor xavier_uniform(const std::vector<long long>& dims, std::uint64_t seed,
                                 bool requires_grad = false) {
        auto shape = checked_shape(dims);
        std::size_t fan_in = shape[0];
        std::size_t fan_out = shape.size() > 1 ? shape[1] : shape[0];
        double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Tensor t = make(std::move(shape), requires_grad);
        Rng rng(seed);
        for (T& x : t.node_->value) x = static_cast<T>(rng.uniform(-limit, limit));
        return t;
    }

    static Tensor from_values(const std::vector<long long>& dims, std::vector<T> values,
                              bool requires_grad = false) {
        auto shape = checked_shape(dims);
        std::size_t n = element_count(shape);
        if (values.size() != n) {
            throw ShapeError("value buffer length " + std::to_string(values.size()) +
                             " does not match shape " + shape_to_string(shape));
        }
        Tensor t;
        t.node_ = std::make_shared<Node>();
        t.node_->shape = std::move(shape);
        t.node_->value = std::move(values);
        t.node_->requires_grad = requires_grad;
        return t;
    }

    static Tensor scalar(T v, bool requires_grad = false) {
        return from_values({1}, {v}, requires_grad);
    }

    bool defined() const { return node_ != nullptr; }

    const std::vector<std::size_t>& shape() const { return node_->shape; }
    std::size_t size() const { return node_->value.size(); }
    std::size_t ndim() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape[i]; }

    // 2-d helpers
    std::size_t rows() const { return node_->shape[0]; }
    std::size_t cols() const { return node_->shape.size() > 1 ? node_->shape[1] : 1; }

    std::vector<T>& values() { return node_->value; }
    const std::vector<T>& values() const { return node_->value; }
    T* data() { return node_->value.data(); }
    const T* data() const { return node_->value.data(); }

    T item() const {
        if (size() != 1) {
            throw ContractError("item() requires a one-element tensor, got shape " +
                                shape_to_string(shape()));
        }
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg) {
        node_->requires_grad = rg;
        if (rg) ensure_grad();
    }

    bool has_grad() const { return !node_->grad.empty(); }
    std::vector<T>& grad() {
        ensure_grad();
        return node_->grad;
    }
    const std::vector<T>& grad() const { return node_->grad; }

    void ensure_grad() {
        if (node_->grad.empty()) node_->grad.assign(node_->value.size(), T(0));
    }

    void zero_grad() {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }

    Node* node() const { return node_.get(); }

    // deep copy of values (grad not copied)
    Tensor clone() const {
        Tensor t;
        t.node_ = std::make_shared<Node>();
        t.node_->shape = node_->shape;
        t.node_->value = node_->value;
        t.node_->requires_grad = node_->requires_grad;
        return t;
    }

    bool same_shape(const Tensor& other) const { return node_->shape == other.node_->shape; }

    static std::size_t element_count(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                               std::multiplies<std::size_t>());
    }

  private:
    static Tensor filled(const std::vector<long long>& dims, T c, bool requires_grad) {
        auto shape = checked_shape(dims);
        Tensor t = make(std::move(shape), requires_grad);
        std::fill(t.node_->value.begin(), t.node_->value.end(), c);
        return t;
    }

    static Tensor make(std::vector<std::size_t> shape, bool requires_grad) {
        Tensor t;
        t.node_ = std::make_shared<Node>();
        t.node_->value.assign(element_count(shape), T(0));
        t.node_->shape = std::move(shape);
        t.node_->requires_grad = requires_grad;
        return t;
    }

    std::shared_ptr<Node> node_;
};

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

template <class T>
struct NamedParam {
    std::string name;
    Tensor<T> tensor;
};

} // namespace emoda::ad
