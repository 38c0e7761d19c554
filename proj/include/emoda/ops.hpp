#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "emoda/errors.hpp"
#include "emoda/tape.hpp"
#include "emoda/tensor.hpp"

namespace emoda::ad {

namespace detail {

template <class T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using EMap = Eigen::Map<EMat<T>>;
template <class T>
using ECMap = Eigen::Map<const EMat<T>>;

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
    }
}

template <class T>
Tensor<T> output_like(Tape<T>& tape, std::vector<long long> dims, bool requires_grad) {
    Tensor<T> out = Tensor<T>::zeros(dims, false);
    if (requires_grad) out.set_requires_grad(true);
    tape.own(out);
    return out;
}

} // namespace detail

// ---- matrix multiply -----------------------------------------------------

template <class T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2) {
        throw ShapeError("matmul expects 2-d operands, got " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) {
        throw ShapeError("matmul inner dimensions disagree: " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
    }
    bool rg = a.requires_grad() || b.requires_grad();
    Tensor<T> out = detail::output_like(tape, {(long long)m, (long long)n}, rg);

    detail::ECMap<T> A(a.data(), m, k), B(b.data(), k, n);
    detail::EMap<T> O(out.data(), m, n);
    O.noalias() = A * B;

    if (rg && tape.recording()) {
        Tensor<T> ac = a, bc = b, oc = out;
        tape.record([ac, bc, oc, m, k, n]() mutable {
            detail::ECMap<T> G(oc.grad().data(), m, n);
            detail::ECMap<T> A(ac.data(), m, k), B(bc.data(), k, n);
            if (ac.requires_grad()) {
                ac.ensure_grad();
                detail::EMap<T> GA(ac.grad().data(), m, k);
                GA.noalias() += G * B.transpose();
            }
            if (bc.requires_grad()) {
                bc.ensure_grad();
                detail::EMap<T> GB(bc.grad().data(), k, n);
                GB.noalias() += A.transpose() * G;
            }
        });
    }
    return out;
}

// ---- elementwise binary --------------------------------------------------

template <class T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "add");
    bool rg = a.requires_grad() || b.requires_grad();
    Tensor<T> out = detail::output_like<T>(tape, {(long long)a.size()}, rg);
    out.node()->shape = a.shape();
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
    if (rg && tape.recording()) {
        Tensor<T> ac = a, bc = b, oc = out;
        tape.record([ac, bc, oc, n]() mutable {
            const T* g = oc.grad().data();
            if (ac.requires_grad()) {
                T* ga = ac.grad().data();
                for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
            }
            if (bc.requires_grad()) {
                T* gb = bc.grad().data();
                for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "mul");
    bool rg = a.requires_grad() || b.requires_grad();
    Tensor<T> out = detail::output_like<T>(tape, {(long long)a.size()}, rg);
    out.node()->shape = a.shape();
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
    if (rg && tape.recording()) {
        Tensor<T> ac = a, bc = b, oc = out;
        tape.record([ac, bc, oc, n]() mutable {
            const T* g = oc.grad().data();
            if (ac.requires_grad()) {
                T* ga = ac.grad().data();
                const T* bv = bc.data();
                for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
            }
            if (bc.requires_grad()) {
                T* gb = bc.grad().data();
                const T* av = ac.data();
                for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T c) {
    bool rg = a.requires_grad();
    Tensor<T> out = detail::output_like<T>(tape, {(long long)a.size()}, rg);
    out.node()->shape = a.shape();
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * c;
    if (rg && tape.recording()) {
        Tensor<T> ac = a, oc = out;
        tape.record([ac, oc, c, n]() mutable {
            const T* g = oc.grad().data();
            T* ga = ac.grad().data();
            for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * c;
        });
    }
    return out;
}

// Bias-row addition: x is [B x K], bias is [K]; the one broadcasting form
// the engine supports.
template <class T>
Tensor<T> add_bias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias) {
    if (x.ndim() != 2 || bias.ndim() != 1 || bias.dim(0) != x.dim(1)) {
        throw ShapeError("add_bias expects [BxK] plus [K], got " + shape_to_string(x.shape()) +
                         " and " + shape_to_string(bias.shape()));
    }
    const std::size_t B = x.dim(0), K = x.dim(1);
    bool rg = x.requires_grad() || bias.requires_grad();
    Tensor<T> out = detail::output_like<T>(tape, {(long long)B, (long long)K}, rg);
    for (std::size_t r = 0; r < B; ++r) {
        const T* xr = x.data() + r * K;
        T* or_ = out.data() + r * K;
        for (std::size_t c = 0; c < K; ++c) or_[c] = xr[c] + bias.data()[c];
    }
    if (rg && tape.recording()) {
        Tensor<T> xc = x, bc = bias, oc = out;
        tape.record([xc, bc, oc, B, K]() mutable {
            const T* g = oc.grad().data();
            if (xc.requires_grad()) {
                T* gx = xc.grad().data();
                for (std::size_t i = 0; i < B * K; ++i) gx[i] += g[i];
            }
            if (bc.requires_grad()) {
                T* gb = bc.grad().data();
                for (std::size_t r = 0; r < B; ++r)
                    for (std::size_t c = 0; c < K; ++c) gb[c] += g[r * K + c];
            }
        });
    }
    return out;
}

// ---- elementwise unary ---------------------------------------------------

template <class T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x) {
    bool rg = x.requires_grad();
    Tensor<T> out = detail::output_like<T>(tape, {(long long)x.size()}, rg);
    out.node()->shape = x.shape();
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        T v = x.data()[i];
        out.data()[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                                  : std::exp(v) / (T(1) + std::exp(v));
    }
    if (rg && tape.recording()) {
        Tensor<T> xc = x, oc = out;
        tape.record([xc, oc, n]() mutable {
            const T* g = oc.grad().data();
            const T* s = oc.data();
            T* gx = xc.grad().data();
            for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * s[i] * (T(1) - s[i]);
        });
    }
    return out;
}

template <class T>
Tensor<T> tanh_op(Tape<T>& tape, const Tensor<T>& x) {
    bool rg = x.requires_grad();
    Tensor<T> out = detail::output_like<T>(tape, {(long long)x.size()}, rg);
    out.node()->shape = x.shape();
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::tanh(x.data()[i]);
    if (rg && tape.recording()) {
        Tensor<T> xc = x, oc = out;
        tape.record([xc, oc, n]() mutable {
            const T* g = oc.grad().data();
            const T* t = oc.data();
            T* gx = xc.grad().data();
            for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * (T(1) - t[i] * t[i]);
        });
    }
    return out;
}

template <class T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
    bool rg = x.requires_grad();
    Tensor<T> out = detail::output_like<T>(tape, {(long long)x.size()}, rg);
    out.node()->shape = x.shape();
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        T v = x.data()[i];
        // keep NaN visible instead of flushing it to zero
        out.data()[i] = (v > T(0) || std::isnan(v)) ? v : T(0);
    }
    if (rg && tape.recording()) {
        Tensor<T> xc = x, oc = out;
        tape.record([xc, oc, n]() mutable {
            const T* g = oc.grad().data();
            const T* xv = xc.data();
            T* gx = xc.grad().data();
            for (std::size_t i = 0; i < n; ++i)
                if (xv[i] > T(0)) gx[i] += g[i];
        });
    }
    return out;
}

// ---- softmax / losses ------------------------------------------------------

// Row-stabilized softmax over the last dimension of a 1-d or 2-d tensor.
template <class T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& x) {
    std::size_t B, K;
    if (x.ndim() == 1) {
        B = 1;
        K = x.dim(0);
    } else if (x.ndim() == 2) {
        B = x.dim(0);
        K = x.dim(1);
    } else {
        throw ShapeError("softmax expects a 1-d or 2-d tensor, got " +
                         shape_to_string(x.shape()));
    }
    if (K < 2) throw ShapeError("softmax needs at least 2 classes");
    bool rg = x.requires_grad();
    Tensor<T> out = detail::output_like<T>(tape, {(long long)x.size()}, rg);
    out.node()->shape = x.shape();
    for (std::size_t r = 0; r < B; ++r) {
        const T* xr = x.data() + r * K;
        T* orow = out.data() + r * K;
        T mx = xr[0];
        for (std::size_t c = 1; c < K; ++c) mx = std::max(mx, xr[c]);
        T sum = T(0);
        for (std::size_t c = 0; c < K; ++c) {
            orow[c] = std::exp(xr[c] - mx);
            sum += orow[c];
        }
        for (std::size_t c = 0; c < K; ++c) orow[c] /= sum;
    }
    if (rg && tape.recording()) {
        Tensor<T> xc = x, oc = out;
        tape.record([xc, oc, B, K]() mutable {
            T* gx = xc.grad().data();
            for (std::size_t r = 0; r < B; ++r) {
                const T* s = oc.data() + r * K;
                const T* g = oc.grad().data() + r * K;
                T dot = T(0);
                for (std::size_t c = 0; c < K; ++c) dot += g[c] * s[c];
                for (std::size_t c = 0; c < K; ++c) gx[r * K + c] += s[c] * (g[c] - dot);
            }
        });
    }
    return out;
}

inline constexpr double kProbClamp = 1e-12;

// clamp that lets NaN through so a poisoned forward pass surfaces as a
// non-finite loss instead of a silently clamped one
inline double clamp_probability(double p, double lo, double hi) {
    if (std::isnan(p)) return p;
    return std::min(hi, std::max(lo, p));
}

// -log(probs[target]), probability clamped to [1e-12, 1] before the log.
template <class T>
Tensor<T> cross_entropy(Tape<T>& tape, const Tensor<T>& probs, std::size_t target) {
    if (probs.ndim() != 1) {
        throw ShapeError("cross_entropy expects a 1-d distribution, got " +
                         shape_to_string(probs.shape()));
    }
    if (target >= probs.dim(0)) {
        throw DataError("cross_entropy target index " + std::to_string(target) +
                        " out of range for " + std::to_string(probs.dim(0)) + " classes");
    }
    std::vector<std::size_t> targets{target};
    return cross_entropy_mean(tape, probs, targets);
}

// Mean categorical cross-entropy over rows; probs is [B x K] (or [K] with
// B == 1), targets holds one class index per row.
template <class T>
Tensor<T> cross_entropy_mean(Tape<T>& tape, const Tensor<T>& probs,
                             const std::vector<std::size_t>& targets) {
    std::size_t B, K;
    if (probs.ndim() == 1) {
        B = 1;
        K = probs.dim(0);
    } else if (probs.ndim() == 2) {
        B = probs.dim(0);
        K = probs.dim(1);
    } else {
        throw ShapeError("cross_entropy_mean expects 1-d or 2-d probs");
    }
    if (targets.size() != B) {
        throw ShapeError("cross_entropy_mean: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(B) + " rows");
    }
    for (std::size_t t : targets) {
        if (t >= K)
            throw DataError("cross_entropy target index " + std::to_string(t) +
                            " out of range for " + std::to_string(K) + " classes");
    }
    bool rg = probs.requires_grad();
    Tensor<T> out = detail::output_like<T>(tape, {1}, rg);
    double acc = 0.0;
    for (std::size_t r = 0; r < B; ++r) {
        double p = clamp_probability(static_cast<double>(probs.data()[r * K + targets[r]]),
                                     kProbClamp, 1.0);
        acc += -std::log(p);
    }
    out.data()[0] = static_cast<T>(acc / static_cast<double>(B));
    if (rg && tape.recording()) {
        Tensor<T> pc = probs, oc = out;
        std::vector<std::size_t> tg = targets;
        tape.record([pc, oc, tg, B, K]() mutable {
            T g = oc.grad()[0];
            T* gp = pc.grad().data();
            for (std::size_t r = 0; r < B; ++r) {
                double p = static_cast<double>(pc.data()[r * K + tg[r]]);
                if (p < kProbClamp || p > 1.0) continue; // clamp active: flat
                gp[r * K + tg[r]] += g * static_cast<T>(-1.0 / (p * static_cast<double>(B)));
            }
        });
    }
    return out;
}

// -[y log p + (1-y) log(1-p)] with p clamped to [1e-12, 1-1e-12].
template <class T>
Tensor<T> binary_cross_entropy(Tape<T>& tape, const Tensor<T>& p, int y) {
    if (p.size() != 1) throw ShapeError("binary_cross_entropy expects a scalar probability");
    if (y != 0 && y != 1) throw DataError("binary label must be 0 or 1");
    std::vector<T> ys{static_cast<T>(y)};
    return binary_cross_entropy_mean(tape, p, ys);
}

// Mean over a column of probabilities p [B] or [B x 1] against labels in {0,1}.
template <class T>
Tensor<T> binary_cross_entropy_mean(Tape<T>& tape, const Tensor<T>& p,
                                    const std::vector<T>& labels) {
    const std::size_t B = p.size();
    if (p.ndim() == 2 && p.dim(1) != 1) {
        throw ShapeError("binary_cross_entropy_mean expects [B] or [Bx1] probabilities");
    }
    if (labels.size() != B) {
        throw ShapeError("binary_cross_entropy_mean: label count mismatch");
    }
    bool rg = p.requires_grad();
    Tensor<T> out = detail::output_like<T>(tape, {1}, rg);
    double acc = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        double pi = clamp_probability(static_cast<double>(p.data()[i]), kProbClamp,
                                      1.0 - kProbClamp);
        double y = static_cast<double>(labels[i]);
        acc += -(y * std::log(pi) + (1.0 - y) * std::log(1.0 - pi));
    }
    out.data()[0] = static_cast<T>(acc / static_cast<double>(B));
    if (rg && tape.recording()) {
        Tensor<T> pc = p, oc = out;
        std::vector<T> ls = labels;
        tape.record([pc, oc, ls, B]() mutable {
            T g = oc.grad()[0];
            T* gp = pc.grad().data();
            for (std::size_t i = 0; i < B; ++i) {
                double pi = static_cast<double>(pc.data()[i]);
                if (pi < kProbClamp || pi > 1.0 - kProbClamp) continue;
                double y = static_cast<double>(ls[i]);
                double d = (-y / pi + (1.0 - y) / (1.0 - pi)) / static_cast<double>(B);
                gp[i] += g * static_cast<T>(d);
            }
        });
    }
    return out;
}

// ---- gradient reversal -----------------------------------------------------

// Identity forward; backward scales the upstream gradient by -lambda.
template <class T>
Tensor<T> grad_reverse(Tape<T>& tape, const Tensor<T>& x, T lambda) {
    if (lambda < T(0)) {
        throw ConfigError("grad_reverse lambda must be nonnegative, got " +
                          std::to_string(static_cast<double>(lambda)));
    }
    bool rg = x.requires_grad();
    Tensor<T> out = detail::output_like<T>(tape, {(long long)x.size()}, rg);
    out.node()->shape = x.shape();
    std::copy(x.data(), x.data() + x.size(), out.data());
    if (rg && tape.recording()) {
        Tensor<T> xc = x, oc = out;
        const std::size_t n = x.size();
        tape.record([xc, oc, lambda, n]() mutable {
            const T* g = oc.grad().data();
            T* gx = xc.grad().data();
            for (std::size_t i = 0; i < n; ++i) gx[i] += -lambda * g[i];
        });
    }
    return out;
}

// ---- structural ops --------------------------------------------------------

template <class T>
Tensor<T> concat_rows(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1)) {
        throw ShapeError("concat_rows expects 2-d tensors with equal column counts");
    }
    const std::size_t Ba = a.dim(0), Bb = b.dim(0), K = a.dim(1);
    bool rg = a.requires_grad() || b.requires_grad();
    Tensor<T> out = detail::output_like<T>(tape, {(long long)(Ba + Bb), (long long)K}, rg);
    std::copy(a.data(), a.data() + Ba * K, out.data());
    std::copy(b.data(), b.data() + Bb * K, out.data() + Ba * K);
    if (rg && tape.recording()) {
        Tensor<T> ac = a, bc = b, oc = out;
        tape.record([ac, bc, oc, Ba, Bb, K]() mutable {
            const T* g = oc.grad().data();
            if (ac.requires_grad()) {
                T* ga = ac.grad().data();
                for (std::size_t i = 0; i < Ba * K; ++i) ga[i] += g[i];
            }
            if (bc.requires_grad()) {
                T* gb = bc.grad().data();
                for (std::size_t i = 0; i < Bb * K; ++i) gb[i] += g[Ba * K + i];
            }
        });
    }
    return out;
}

// Copy of rows [r0, r1) of a 2-d tensor.
template <class T>
Tensor<T> slice_rows(Tape<T>& tape, const Tensor<T>& x, std::size_t r0, std::size_t r1) {
    if (x.ndim() != 2 || r0 >= r1 || r1 > x.dim(0)) {
        throw ShapeError("slice_rows: bad range [" + std::to_string(r0) + ", " +
                         std::to_string(r1) + ") for " + shape_to_string(x.shape()));
    }
    const std::size_t K = x.dim(1), B = r1 - r0;
    bool rg = x.requires_grad();
    Tensor<T> out = detail::output_like<T>(tape, {(long long)B, (long long)K}, rg);
    std::copy(x.data() + r0 * K, x.data() + r1 * K, out.data());
    if (rg && tape.recording()) {
        Tensor<T> xc = x, oc = out;
        tape.record([xc, oc, r0, B, K]() mutable {
            const T* g = oc.grad().data();
            T* gx = xc.grad().data() + r0 * K;
            for (std::size_t i = 0; i < B * K; ++i) gx[i] += g[i];
        });
    }
    return out;
}

// Per-row select: row r of the result is on_true[r] where mask[r] != 0, else
// on_false[r]. Gradients flow only to the side that was taken.
template <class T>
Tensor<T> row_select(Tape<T>& tape, const std::vector<std::uint8_t>& mask,
                     const Tensor<T>& on_true, const Tensor<T>& on_false) {
    detail::require_same_shape(on_true, on_false, "row_select");
    if (on_true.ndim() != 2 || mask.size() != on_true.dim(0)) {
        throw ShapeError("row_select: mask length must equal row count");
    }
    const std::size_t B = on_true.dim(0), K = on_true.dim(1);
    bool rg = on_true.requires_grad() || on_false.requires_grad();
    Tensor<T> out = detail::output_like<T>(tape, {(long long)B, (long long)K}, rg);
    for (std::size_t r = 0; r < B; ++r) {
        const T* src = (mask[r] ? on_true.data() : on_false.data()) + r * K;
        std::copy(src, src + K, out.data() + r * K);
    }
    if (rg && tape.recording()) {
        Tensor<T> tc = on_true, fc = on_false, oc = out;
        std::vector<std::uint8_t> m = mask;
        tape.record([tc, fc, oc, m, B, K]() mutable {
            const T* g = oc.grad().data();
            for (std::size_t r = 0; r < B; ++r) {
                Tensor<T>& side = m[r] ? tc : fc;
                if (!side.requires_grad()) continue;
                T* gs = side.grad().data() + r * K;
                const T* gr = g + r * K;
                for (std::size_t c = 0; c < K; ++c) gs[c] += gr[c];
            }
        });
    }
    return out;
}

// Row gather: out[i] = table[ids[i]]. Backward scatter-adds into the table
// when it is trainable.
template <class T>
Tensor<T> gather_rows(Tape<T>& tape, const Tensor<T>& table,
                      const std::vector<std::int32_t>& ids) {
    if (table.ndim() != 2) throw ShapeError("gather_rows expects a 2-d table");
    const std::size_t V = table.dim(0), D = table.dim(1), B = ids.size();
    for (std::int32_t id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= V) {
            throw DataError("gather_rows: row id " + std::to_string(id) + " out of range");
        }
    }
    bool rg = table.requires_grad();
    Tensor<T> out = detail::output_like<T>(tape, {(long long)B, (long long)D}, rg);
    for (std::size_t i = 0; i < B; ++i) {
        const T* src = table.data() + static_cast<std::size_t>(ids[i]) * D;
        std::copy(src, src + D, out.data() + i * D);
    }
    if (rg && tape.recording()) {
        Tensor<T> tc = table, oc = out;
        std::vector<std::int32_t> idc = ids;
        tape.record([tc, oc, idc, D]() mutable {
            const T* g = oc.grad().data();
            T* gt = tc.grad().data();
            for (std::size_t i = 0; i < idc.size(); ++i) {
                T* dst = gt + static_cast<std::size_t>(idc[i]) * D;
                const T* src = g + i * D;
                for (std::size_t c = 0; c < D; ++c) dst[c] += src[c];
            }
        });
    }
    return out;
}

// ---- reductions ------------------------------------------------------------

template <class T>
Tensor<T> sum_all(Tape<T>& tape, const Tensor<T>& x) {
    bool rg = x.requires_grad();
    Tensor<T> out = detail::output_like<T>(tape, {1}, rg);
    double acc = 0.0;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(x.data()[i]);
    out.data()[0] = static_cast<T>(acc);
    if (rg && tape.recording()) {
        Tensor<T> xc = x, oc = out;
        tape.record([xc, oc, n]() mutable {
            T g = oc.grad()[0];
            T* gx = xc.grad().data();
            for (std::size_t i = 0; i < n; ++i) gx[i] += g;
        });
    }
    return out;
}

template <class T>
Tensor<T> mean_all(Tape<T>& tape, const Tensor<T>& x) {
    bool rg = x.requires_grad();
    Tensor<T> out = detail::output_like<T>(tape, {1}, rg);
    double acc = 0.0;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(x.data()[i]);
    out.data()[0] = static_cast<T>(acc / static_cast<double>(n));
    if (rg && tape.recording()) {
        Tensor<T> xc = x, oc = out;
        tape.record([xc, oc, n]() mutable {
            T g = oc.grad()[0] / static_cast<T>(n);
            T* gx = xc.grad().data();
            for (std::size_t i = 0; i < n; ++i) gx[i] += g;
        });
    }
    return out;
}

} // namespace emoda::ad
