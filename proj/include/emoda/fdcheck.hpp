#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "emoda/rng.hpp"
#include "emoda/tensor.hpp"

namespace emoda::ad {

// Central-difference gradient oracle. It re-evaluates the forward pass at
// perturbed coordinates, so it checks the backward rules through a route
// that never touches them.

inline double fd_rel_err(double analytic, double numeric, double floor_ = 1e-3) {
    double denom = std::max({std::abs(analytic), std::abs(numeric), floor_});
    return std::abs(analytic - numeric) / denom;
}

struct FdFailure {
    std::string tensor;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct FdReport {
    std::size_t checked = 0;
    double max_rel_err = 0.0;
    std::vector<FdFailure> failures;
    bool ok(double tol) const { return failures.empty() && max_rel_err < tol; }
};

struct FdOptions {
    double h = 1e-5;
    double tol = 1e-4;
    // 0 = check every coordinate; otherwise sample this many per tensor.
    std::size_t coords_per_tensor = 0;
    std::uint64_t sample_seed = 0x5eed;
};

// Compares the gradients already stored in each tensor (produced by one
// backward pass) against central differences of `eval`, which must
// recompute the scalar loss from current tensor values.
template <class T>
FdReport check_gradients(const std::function<double()>& eval,
                         const std::vector<NamedParam<T>>& params, const FdOptions& opt = {}) {
    FdReport report;
    Rng rng(opt.sample_seed);
    for (const auto& np : params) {
        Tensor<T> p = np.tensor;
        const std::size_t n = p.size();
        std::vector<std::size_t> coords;
        if (opt.coords_per_tensor == 0 || opt.coords_per_tensor >= n) {
            coords.resize(n);
            for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            for (std::size_t i = 0; i < opt.coords_per_tensor; ++i)
                coords.push_back(static_cast<std::size_t>(rng.below(n)));
            std::sort(coords.begin(), coords.end());
            coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
        }
        for (std::size_t idx : coords) {
            T saved = p.data()[idx];
            p.data()[idx] = saved + static_cast<T>(opt.h);
            double fp = eval();
            p.data()[idx] = saved - static_cast<T>(opt.h);
            double fm = eval();
            p.data()[idx] = saved;
            double numeric = (fp - fm) / (2.0 * opt.h);
            double analytic = static_cast<double>(p.grad()[idx]);
            double re = fd_rel_err(analytic, numeric);
            report.checked += 1;
            report.max_rel_err = std::max(report.max_rel_err, re);
            if (re >= opt.tol) {
                report.failures.push_back({np.name, idx, analytic, numeric, re});
            }
        }
    }
    return report;
}

} // namespace emoda::ad
