#include "emoda/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace emoda::train {

void TrainConfig::validate() const {
    model::validate_mixture_weights(alpha, beta);
    if (!model::uses_discriminator(variant) && alpha != 0.0) {
        throw ConfigError("alpha must be 0 for non-adaptive variant " +
                          std::string(model::variant_display_name(variant)));
    }
    if (!model::uses_emotion(variant) && beta != 0.0) {
        throw ConfigError("beta must be 0 for single-task variant " +
                          std::string(model::variant_display_name(variant)));
    }
    if (lambda < 0.0) throw ConfigError("lambda must be nonnegative");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (lr <= 0.0) throw ConfigError("learning rate must be positive");
    if (max_len < 1) throw ConfigError("max_len must be >= 1");
}

PairedBatcher::PairedBatcher(std::size_t n_source, std::size_t n_target, std::size_t batch_size,
                             std::uint64_t seed)
    : n_s_(n_source), n_t_(n_target), batch_(batch_size),
      source_rng_(derive_seed(seed, "batch.source")),
      target_rng_(derive_seed(seed, "batch.target")) {
    if (n_s_ == 0) throw DataError("paired batching requires a nonempty source set");
    if (batch_ == 0) throw ConfigError("batch_size must be >= 1");
    if (n_t_ > 0) {
        target_order_.resize(n_t_);
        std::iota(target_order_.begin(), target_order_.end(), 0);
        target_rng_.shuffle(target_order_);
    }
}

std::size_t PairedBatcher::steps_per_epoch() const {
    return (n_s_ + batch_ - 1) / batch_;
}

std::vector<PairedBatcher::Step> PairedBatcher::next_epoch() {
    std::vector<std::size_t> order(n_s_);
    std::iota(order.begin(), order.end(), 0);
    source_rng_.shuffle(order);

    std::vector<Step> steps;
    steps.reserve(steps_per_epoch());
    for (std::size_t start = 0; start < n_s_; start += batch_) {
        Step step;
        std::size_t end = std::min(n_s_, start + batch_);
        step.source.assign(order.begin() + static_cast<long>(start),
                           order.begin() + static_cast<long>(end));
        if (n_t_ > 0) {
            for (std::size_t i = 0; i < step.source.size(); ++i) {
                if (target_pos_ == n_t_) {
                    target_rng_.shuffle(target_order_);
                    target_pos_ = 0;
                }
                step.target.push_back(target_order_[target_pos_++]);
            }
        }
        steps.push_back(std::move(step));
    }
    return steps;
}

double accuracy_from_probabilities(std::span<const double> probabilities,
                                   std::span<const data::LabeledExample> examples) {
    if (examples.empty()) throw DataError("cannot evaluate accuracy on an empty set");
    if (probabilities.size() != examples.size()) {
        throw ShapeError("probability/example count mismatch");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        int predicted = probabilities[i] >= 0.5 ? 1 : 0;
        if (predicted == examples[i].veracity_for_eval()) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(examples.size());
}

double accuracy_against_labels(const model::Model<real>& m,
                               std::span<const data::LabeledExample> examples) {
    if (examples.empty()) throw DataError("cannot evaluate accuracy on an empty set");
    auto probs = model::predict_fake_probability(m, examples);
    return accuracy_from_probabilities(probs, examples);
}

namespace {

void copy_params(model::Model<real>& dst, const model::Model<real>& src) {
    auto a = dst.named_params(true);
    auto b = src.named_params(true);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i].tensor.values() = b[i].tensor.values();
    }
}

std::vector<const data::LabeledExample*> gather(const std::vector<data::LabeledExample>& pool,
                                                const std::vector<std::size_t>& idx) {
    std::vector<const data::LabeledExample*> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(&pool[i]);
    return out;
}

} // namespace

TrainResult train(const TrainConfig& config, const data::DatasetSplit& split,
                  const text::EmbeddingTable& embeddings) {
    config.validate();
    const bool adaptive = model::uses_discriminator(config.variant);
    const bool needs_target = adaptive; // non-DA variants never touch target data
    if (split.n_s() == 0) throw DataError("training requires source examples");
    if (needs_target && split.n_t() == 0) {
        throw ContractError("domain-adaptive training requires target training examples");
    }
    if (split.source_val.empty()) {
        throw DataError("training requires a source validation split");
    }

    text::EmbeddingTable table = embeddings;
    table.trainable = config.embeddings_trainable;
    auto m = model::create_model<real>(config.variant, table, config.seed, config.dims,
                                       config.embeddings_trainable);

    ad::AdamOptimizer<real> optimizer(m.trainable_params(), static_cast<real>(config.lr));
    PairedBatcher batcher(split.n_s(), needs_target ? split.n_t() : 0,
                          static_cast<std::size_t>(config.batch_size), config.seed);

    TrainHistory history;
    model::Model<real> best_snapshot;
    bool have_best = false;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        double sum_fnd = 0, sum_emo = 0, sum_adv = 0, sum_total = 0;
        auto steps = batcher.next_epoch();
        int step_no = 0;
        for (const auto& step : steps) {
            auto source_batch = gather(split.source_train, step.source);
            auto target_batch = gather(split.target_train, step.target);

            optimizer.zero_grad();
            ad::Tape<real> tape;
            model::LossBreakdown breakdown;
            auto total = model::forward_losses<real>(tape, m, source_batch, target_batch,
                                                     config.alpha, config.beta,
                                                     static_cast<real>(config.lambda),
                                                     &breakdown);
            if (!std::isfinite(breakdown.l_total)) {
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                                   " step " + std::to_string(step_no + 1));
            }
            tape.backward(total);
            optimizer.step();

            history.steps.push_back({epoch + 1, step_no + 1, breakdown});
            sum_fnd += breakdown.l_fnd;
            sum_emo += breakdown.l_emo;
            sum_adv += breakdown.l_adv;
            sum_total += breakdown.l_total;
            ++step_no;
        }

        double val_acc = accuracy_against_labels(m, split.source_val);
        auto n = static_cast<double>(steps.size());
        history.epochs.push_back(
            {epoch + 1, sum_fnd / n, sum_emo / n, sum_adv / n, sum_total / n, val_acc});

        if (!have_best || val_acc > history.best_val_accuracy) {
            history.best_val_accuracy = val_acc;
            history.best_epoch = epoch + 1;
            best_snapshot = m.clone_params();
            have_best = true;
        }

        if (config.stop_at_train_accuracy > 0.0) {
            double train_acc = accuracy_against_labels(m, split.source_train);
            if (train_acc >= config.stop_at_train_accuracy) {
                history.stopped_early = true;
                break;
            }
        }
    }

    if (have_best) copy_params(m, best_snapshot);
    return {std::move(m), std::move(history)};
}

void write_history(const std::string& path, const TrainHistory& history) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write history file " + path);
    for (const auto& e : history.epochs) {
        nlohmann::json j;
        j["epoch"] = e.epoch;
        j["l_fnd"] = e.l_fnd;
        j["l_emo"] = e.l_emo;
        j["l_adv"] = e.l_adv;
        j["l_total"] = e.l_total;
        j["val_accuracy"] = e.val_accuracy;
        out << j.dump() << "\n";
    }
}

std::vector<GridCandidate> default_grid(model::ModelVariant variant) {
    static const double values[] = {0.0, 0.1, 0.2, 0.3, 0.4};
    const bool use_alpha = model::uses_discriminator(variant);
    const bool use_beta = model::uses_emotion(variant);
    std::vector<GridCandidate> grid;
    for (double a : values) {
        if (!use_alpha && a != 0.0) continue;
        for (double b : values) {
            if (!use_beta && b != 0.0) continue;
            if (a + b > 0.8 + 1e-12) continue;
            grid.push_back({a, b});
        }
    }
    return grid;
}

std::size_t select_grid_winner(std::span<const GridRecord> records) {
    if (records.empty()) throw ConfigError("grid selection requires at least one record");
    std::size_t best = 0;
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].val_accuracy > records[best].val_accuracy ||
            (records[i].val_accuracy == records[best].val_accuracy &&
             records[i].alpha + records[i].beta < records[best].alpha + records[best].beta)) {
            best = i;
        }
    }
    return best;
}

GridSearchResult grid_search(std::span<const GridCandidate> candidates,
                             const TrainConfig& base, const data::DatasetSplit& split,
                             const text::EmbeddingTable& embeddings) {
    if (candidates.empty()) throw ConfigError("grid search requires at least one candidate");
    GridSearchResult result;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        TrainConfig config = base;
        config.alpha = candidates[i].alpha;
        config.beta = candidates[i].beta;
        config.seed = base.seed + i;
        config.validate();
        auto run = train(config, split, embeddings);
        result.records.push_back(
            {config.alpha, config.beta, run.history.best_val_accuracy, config.seed});
    }
    std::size_t winner = select_grid_winner(result.records);
    result.alpha = result.records[winner].alpha;
    result.beta = result.records[winner].beta;
    return result;
}

} // namespace emoda::train
