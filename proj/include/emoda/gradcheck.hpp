#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emoda/model.hpp"

namespace emoda::gradcheck {

struct GradcheckOptions {
    int trials = 20;              // random micro-batches
    int coords_per_tensor = 4;    // sampled coordinates per parameter tensor
    std::uint64_t seed = 0x9c0ffee;
    double h = 1e-5;
    double tol = 1e-4;
    int batch = 3;
    int steps = 5;                // sequence length of the micro-batch
    std::size_t vocab = 48;
    model::ModelDims dims{};      // full production sizes by default
};

struct GradcheckOutcome {
    bool passed = false;
    std::size_t coordinates_checked = 0;
    double max_rel_err = 0.0;
    double seconds = 0.0;
    std::vector<std::string> failures;
};

// Checks the analytic gradients of l_fnd, l_emo, l_adv and l_total against
// central finite differences at 64-bit, over every parameter group of a
// DA MTL(P) model with trainable embeddings.
GradcheckOutcome run_gradcheck(const GradcheckOptions& options);

} // namespace emoda::gradcheck
