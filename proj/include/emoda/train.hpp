#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emoda/dataset.hpp"
#include "emoda/model.hpp"
#include "emoda/text.hpp"

namespace emoda::train {

using real = float; // training precision; gradient checks run the engine at double

struct TrainConfig {
    double lr = 0.0025;
    int batch_size = 25;
    int max_epochs = 50;
    double alpha = 0.0;
    double beta = 0.0;
    double lambda = 1.0;
    std::uint64_t seed = 0;
    model::ModelVariant variant = model::ModelVariant::stl;
    int max_len = 200;
    int min_freq = 1;
    bool embeddings_trainable = false;
    model::ModelDims dims{};

    // optional sanity-run switch: stop once source-train accuracy reaches
    // this value (0 disables)
    double stop_at_train_accuracy = 0.0;

    void validate() const;
};

// Source-driven paired batching: one epoch is ceil(n_s / batch_size) steps,
// the target set cycles with reshuffling on wraparound and persists its
// position across epochs.
class PairedBatcher {
  public:
    struct Step {
        std::vector<std::size_t> source;
        std::vector<std::size_t> target; // empty when no target set is used
    };

    PairedBatcher(std::size_t n_source, std::size_t n_target, std::size_t batch_size,
                  std::uint64_t seed);

    std::size_t steps_per_epoch() const;
    std::vector<Step> next_epoch();

  private:
    std::size_t n_s_, n_t_, batch_;
    Rng source_rng_, target_rng_;
    std::vector<std::size_t> target_order_;
    std::size_t target_pos_ = 0;
};

struct StepRecord {
    int epoch = 0;
    int step = 0;
    model::LossBreakdown losses;
};

struct EpochRecord {
    int epoch = 0;
    double l_fnd = 0, l_emo = 0, l_adv = 0, l_total = 0;
    double val_accuracy = 0;
};

struct TrainHistory {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    double best_val_accuracy = 0.0;
    bool stopped_early = false;
};

struct TrainResult {
    model::Model<real> trained;
    TrainHistory history;
};

// Full training run: per step zero grads, forward all active branches,
// backward, one Adam step; per epoch evaluate in-domain (source) validation
// accuracy; at the end restore the peak-validation checkpoint.
TrainResult train(const TrainConfig& config, const data::DatasetSplit& split,
                  const text::EmbeddingTable& embeddings);

double accuracy_against_labels(const model::Model<real>& m,
                               std::span<const data::LabeledExample> examples);

// threshold rule: probability >= 0.5 classifies as fake (1)
double accuracy_from_probabilities(std::span<const double> probabilities,
                                   std::span<const data::LabeledExample> examples);

// JSON-lines, one record per epoch
void write_history(const std::string& path, const TrainHistory& history);

// ---- alpha/beta grid search ---------------------------------------------------

struct GridCandidate {
    double alpha = 0.0;
    double beta = 0.0;
};

// {0, 0.1, 0.2, 0.3, 0.4} per axis, filtered to alpha + beta <= 0.8 and to
// the weights the variant actually uses.
std::vector<GridCandidate> default_grid(model::ModelVariant variant);

struct GridRecord {
    double alpha = 0.0;
    double beta = 0.0;
    double val_accuracy = 0.0;
    std::uint64_t seed = 0;
};

struct GridSearchResult {
    double alpha = 0.0;
    double beta = 0.0;
    std::vector<GridRecord> records;
};

// max validation accuracy; ties break toward smaller alpha + beta, then
// candidate order
std::size_t select_grid_winner(std::span<const GridRecord> records);

// Trains one model per candidate (seed = base seed + candidate index),
// selects the best in-domain validation accuracy; ties break toward smaller
// alpha + beta, then candidate order.
GridSearchResult grid_search(std::span<const GridCandidate> candidates,
                             const TrainConfig& base, const data::DatasetSplit& split,
                             const text::EmbeddingTable& embeddings);

} // namespace emoda::train
