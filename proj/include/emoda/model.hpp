#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emoda/adam.hpp"
#include "emoda/dataset.hpp"
#include "emoda/emotion.hpp"
#include "emoda/errors.hpp"
#include "emoda/ops.hpp"
#include "emoda/rng.hpp"
#include "emoda/tape.hpp"
#include "emoda/tensor.hpp"
#include "emoda/text.hpp"

namespace emoda::model {

enum class ModelVariant { stl, mtl_e, mtl_p, da_stl, da_mtl_e, da_mtl_p };

inline bool uses_emotion(ModelVariant v) {
    return v == ModelVariant::mtl_e || v == ModelVariant::mtl_p ||
           v == ModelVariant::da_mtl_e || v == ModelVariant::da_mtl_p;
}

inline bool uses_discriminator(ModelVariant v) {
    return v == ModelVariant::da_stl || v == ModelVariant::da_mtl_e ||
           v == ModelVariant::da_mtl_p;
}

inline std::optional<emotion::Taxonomy> variant_taxonomy(ModelVariant v) {
    switch (v) {
        case ModelVariant::mtl_e:
        case ModelVariant::da_mtl_e: return emotion::Taxonomy::ekman6;
        case ModelVariant::mtl_p:
        case ModelVariant::da_mtl_p: return emotion::Taxonomy::plutchik8;
        default: return std::nullopt;
    }
}

// canonical display name used in reports (Table-style)
inline const char* variant_display_name(ModelVariant v) {
    switch (v) {
        case ModelVariant::stl: return "STL";
        case ModelVariant::mtl_e: return "MTL(E)";
        case ModelVariant::mtl_p: return "MTL(P)";
        case ModelVariant::da_stl: return "DA STL";
        case ModelVariant::da_mtl_e: return "DA MTL(E)";
        case ModelVariant::da_mtl_p: return "DA MTL(P)";
    }
    return "?";
}

ModelVariant variant_from_name(const std::string& name); // accepts cli and display forms

inline const std::vector<ModelVariant>& all_variants() {
    static const std::vector<ModelVariant> v = {ModelVariant::stl,    ModelVariant::mtl_e,
                                                ModelVariant::mtl_p,  ModelVariant::da_stl,
                                                ModelVariant::da_mtl_e, ModelVariant::da_mtl_p};
    return v;
}

struct ModelDims {
    std::size_t embed_dim = 300;
    std::size_t hidden = 256;
    std::size_t head_hidden = 128;
};

template <class T>
struct Dense {
    ad::Tensor<T> W;
    ad::Tensor<T> b;
};

template <class T>
struct LstmParams {
    // input kernels, recurrent kernels and biases for gates i, f, c, o
    ad::Tensor<T> Wi, Wf, Wc, Wo;
    ad::Tensor<T> Ui, Uf, Uc, Uo;
    ad::Tensor<T> bi, bf, bc, bo;
};

template <class T>
struct Model {
    ModelVariant variant = ModelVariant::stl;
    ModelDims dims;
    int emotion_classes = 0; // 0 when the emotion head is disabled
    bool embedding_trainable = false;

    ad::Tensor<T> embedding; // V x embed_dim
    LstmParams<T> lstm;
    Dense<T> fnd1, fnd2;
    std::optional<Dense<T>> emo1, emo2;
    std::optional<Dense<T>> disc1, disc2;

    std::size_t vocab_size() const { return embedding.dim(0); }

    // theta_l, theta_f, theta_e, theta_d with stable checkpoint names
    std::vector<ad::NamedParam<T>> named_params(bool include_embedding = true) const;
    std::vector<ad::Tensor<T>> trainable_params() const;
    std::vector<ad::NamedParam<T>> extractor_params(bool include_embedding = false) const;

    Model<T> clone_params() const;
};

// Builds a model with deterministic per-tensor initialization: each tensor's
// seed is derived from (seed, its name), so shared groups initialize
// identically across variants. Weights are Xavier uniform, biases zero, the
// LSTM forget-gate bias is 1.
template <class T>
Model<T> create_model(ModelVariant variant, const text::EmbeddingTable& table,
                      std::uint64_t seed, ModelDims dims = {}, bool embedding_trainable = false);

// ---- batched forward --------------------------------------------------------

// Token ids arranged time-major ([t * batch + b]) so each timestep is a
// contiguous row block; mask marks real (non-padding) steps.
struct BatchInput {
    std::size_t batch = 0;
    std::size_t steps = 0;
    std::vector<std::int32_t> ids;
    std::vector<std::uint8_t> mask;

    static BatchInput from(std::span<const data::LabeledExample* const> examples);
};

// LSTM recurrence over the embedded tokens; returns the hidden state at each
// example's true_length (padding never advances the state).
template <class T>
ad::Tensor<T> extract_features(ad::Tape<T>& tape, const Model<T>& model,
                               const BatchInput& batch);

template <class T>
ad::Tensor<T> extract_features(ad::Tape<T>& tape, const Model<T>& model,
                               const data::LabeledExample& example);

// head forwards (features: [B x hidden])
template <class T>
ad::Tensor<T> fake_news_probability(ad::Tape<T>& tape, const Model<T>& model,
                                    const ad::Tensor<T>& features); // [B x 1], sigmoid
template <class T>
ad::Tensor<T> emotion_probabilities(ad::Tape<T>& tape, const Model<T>& model,
                                    const ad::Tensor<T>& features); // [B x K], softmax
template <class T>
ad::Tensor<T> domain_probability(ad::Tape<T>& tape, const Model<T>& model,
                                 const ad::Tensor<T>& features, T lambda); // GRL inside

// ---- losses ------------------------------------------------------------------

using ExampleSpan = std::span<const data::LabeledExample* const>;

struct LossBreakdown {
    double l_fnd = 0.0;
    double l_emo = 0.0;
    double l_adv = 0.0;
    double l_total = 0.0;
    double alpha = 0.0;
    double beta = 0.0;

    double recomposed() const {
        return (1.0 - alpha - beta) * l_fnd + alpha * l_adv + beta * l_emo;
    }
};

// Mean binary cross-entropy of the fake-news head over a source batch.
template <class T>
ad::Tensor<T> loss_fnd(ad::Tape<T>& tape, const Model<T>& model, ExampleSpan source_batch);

// Mean categorical cross-entropy of the emotion head over the concatenation
// of the source and target batches (target may be empty).
template <class T>
ad::Tensor<T> loss_emo(ad::Tape<T>& tape, const Model<T>& model, ExampleSpan source_batch,
                       ExampleSpan target_batch);

// Mean binary cross-entropy of the domain discriminator over both batches;
// features pass through grad_reverse(lambda) first.
template <class T>
ad::Tensor<T> loss_adv(ad::Tape<T>& tape, const Model<T>& model, ExampleSpan source_batch,
                       ExampleSpan target_batch, T lambda);

// (1 - alpha - beta) * l_fnd + alpha * l_adv + beta * l_emo. Undefined
// branches must be undefined tensors; they contribute exactly zero.
template <class T>
ad::Tensor<T> loss_total(ad::Tape<T>& tape, const ad::Tensor<T>& l_fnd,
                         const ad::Tensor<T>& l_adv, const ad::Tensor<T>& l_emo, double alpha,
                         double beta);

struct ForwardLosses {
    LossBreakdown breakdown;
};

// One training-step forward pass computing every active branch from shared
// features; returns the total-loss tensor plus the unweighted components.
template <class T>
ad::Tensor<T> forward_losses(ad::Tape<T>& tape, const Model<T>& model, ExampleSpan source_batch,
                             ExampleSpan target_batch, double alpha, double beta, T lambda,
                             LossBreakdown* breakdown);

// Fake-news probabilities for a set of examples, forward-only, batched.
template <class T>
std::vector<double> predict_fake_probability(const Model<T>& model,
                                             std::span<const data::LabeledExample> examples,
                                             std::size_t batch_size = 64);

void validate_mixture_weights(double alpha, double beta);

// ---- checkpoint ---------------------------------------------------------------

// Self-describing binary container of named tensors; round-trips losslessly
// at stored precision.
template <class T>
void save_checkpoint(const std::string& path, const Model<T>& model);

template <class T>
Model<T> load_checkpoint(const std::string& path);

} // namespace emoda::model

#include "emoda/model_impl.hpp"
