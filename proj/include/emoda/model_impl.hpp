#pragma once

// template implementations for model.hpp

#include <algorithm>
#include <cctype>
#include <cmath>

namespace emoda::model {

inline ModelVariant variant_from_name(const std::string& name) {
    std::string n;
    for (char c : name) {
        if (c == '-' || c == ' ' || c == '(' || c == ')') {
            if (!n.empty() && n.back() != '_') n += '_';
        } else {
            n += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    while (!n.empty() && n.back() == '_') n.pop_back();
    if (n == "stl") return ModelVariant::stl;
    if (n == "mtl_e" || n == "mtl_ekman") return ModelVariant::mtl_e;
    if (n == "mtl_p" || n == "mtl_plutchik") return ModelVariant::mtl_p;
    if (n == "da_stl") return ModelVariant::da_stl;
    if (n == "da_mtl_e") return ModelVariant::da_mtl_e;
    if (n == "da_mtl_p") return ModelVariant::da_mtl_p;
    throw ConfigError("unknown model variant '" + name + "'");
}

inline void validate_mixture_weights(double alpha, double beta) {
    if (alpha < 0.0 || beta < 0.0) {
        throw ConfigError("loss weights must be nonnegative (alpha=" + std::to_string(alpha) +
                          ", beta=" + std::to_string(beta) + ")");
    }
    if (alpha + beta > 1.0 + 1e-12) {
        throw ConfigError("alpha + beta must not exceed 1, got " +
                          std::to_string(alpha + beta));
    }
}

template <class T>
std::vector<ad::NamedParam<T>> Model<T>::named_params(bool include_embedding) const {
    std::vector<ad::NamedParam<T>> out;
    if (include_embedding) out.push_back({"embedding", embedding});
    out.push_back({"lstm.Wi", lstm.Wi});
    out.push_back({"lstm.Wf", lstm.Wf});
    out.push_back({"lstm.Wc", lstm.Wc});
    out.push_back({"lstm.Wo", lstm.Wo});
    out.push_back({"lstm.Ui", lstm.Ui});
    out.push_back({"lstm.Uf", lstm.Uf});
    out.push_back({"lstm.Uc", lstm.Uc});
    out.push_back({"lstm.Uo", lstm.Uo});
    out.push_back({"lstm.bi", lstm.bi});
    out.push_back({"lstm.bf", lstm.bf});
    out.push_back({"lstm.bc", lstm.bc});
    out.push_back({"lstm.bo", lstm.bo});
    out.push_back({"fnd.dense1.W", fnd1.W});
    out.push_back({"fnd.dense1.b", fnd1.b});
    out.push_back({"fnd.dense2.W", fnd2.W});
    out.push_back({"fnd.dense2.b", fnd2.b});
    if (emo1) {
        out.push_back({"emo.dense1.W", emo1->W});
        out.push_back({"emo.dense1.b", emo1->b});
        out.push_back({"emo.dense2.W", emo2->W});
        out.push_back({"emo.dense2.b", emo2->b});
    }
    if (disc1) {
        out.push_back({"disc.dense1.W", disc1->W});
        out.push_back({"disc.dense1.b", disc1->b});
        out.push_back({"disc.dense2.W", disc2->W});
        out.push_back({"disc.dense2.b", disc2->b});
    }
    return out;
}

template <class T>
std::vector<ad::Tensor<T>> Model<T>::trainable_params() const {
    std::vector<ad::Tensor<T>> out;
    for (auto& np : named_params(embedding_trainable)) out.push_back(np.tensor);
    return out;
}

template <class T>
std::vector<ad::NamedParam<T>> Model<T>::extractor_params(bool include_embedding) const {
    std::vector<ad::NamedParam<T>> out;
    for (auto& np : named_params(include_embedding)) {
        if (np.name.rfind("lstm.", 0) == 0 || np.name == "embedding") out.push_back(np);
    }
    return out;
}

template <class T>
Model<T> Model<T>::clone_params() const {
    Model<T> copy = *this;
    auto deep = [](ad::Tensor<T>& t) { t = t.clone(); };
    deep(copy.embedding);
    deep(copy.lstm.Wi); deep(copy.lstm.Wf); deep(copy.lstm.Wc); deep(copy.lstm.Wo);
    deep(copy.lstm.Ui); deep(copy.lstm.Uf); deep(copy.lstm.Uc); deep(copy.lstm.Uo);
    deep(copy.lstm.bi); deep(copy.lstm.bf); deep(copy.lstm.bc); deep(copy.lstm.bo);
    deep(copy.fnd1.W); deep(copy.fnd1.b); deep(copy.fnd2.W); deep(copy.fnd2.b);
    if (copy.emo1) {
        deep(copy.emo1->W); deep(copy.emo1->b);
        deep(copy.emo2->W); deep(copy.emo2->b);
    }
    if (copy.disc1) {
        deep(copy.disc1->W); deep(copy.disc1->b);
        deep(copy.disc2->W); deep(copy.disc2->b);
    }
    return copy;
}

namespace detail {

template <class T>
ad::Tensor<T> init_weight(std::vector<long long> dims, std::uint64_t seed,
                          const std::string& name) {
    auto t = ad::Tensor<T>::xavier_uniform(dims, derive_seed(seed, "init." + name), true);
    return t;
}

template <class T>
Dense<T> init_dense(std::size_t in, std::size_t out, std::uint64_t seed,
                    const std::string& prefix) {
    Dense<T> d;
    d.W = init_weight<T>({(long long)in, (long long)out}, seed, prefix + ".W");
    d.b = ad::Tensor<T>::zeros({(long long)out}, true);
    return d;
}

} // namespace detail

template <class T>
Model<T> create_model(ModelVariant variant, const text::EmbeddingTable& table,
                      std::uint64_t seed, ModelDims dims, bool embedding_trainable) {
    if (table.dim != dims.embed_dim) {
        throw ConfigError("embedding table dim " + std::to_string(table.dim) +
                          " does not match model embed_dim " + std::to_string(dims.embed_dim));
    }
    if (table.rows < 2) throw ConfigError("embedding table must cover PAD and UNK");

    Model<T> m;
    m.variant = variant;
    m.dims = dims;
    m.embedding_trainable = embedding_trainable;

    std::vector<T> emb(table.data.begin(), table.data.end());
    m.embedding = ad::Tensor<T>::from_values({(long long)table.rows, (long long)table.dim},
                                             std::move(emb), embedding_trainable);

    const auto E = static_cast<long long>(dims.embed_dim);
    const auto H = static_cast<long long>(dims.hidden);
    m.lstm.Wi = detail::init_weight<T>({E, H}, seed, "lstm.Wi");
    m.lstm.Wf = detail::init_weight<T>({E, H}, seed, "lstm.Wf");
    m.lstm.Wc = detail::init_weight<T>({E, H}, seed, "lstm.Wc");
    m.lstm.Wo = detail::init_weight<T>({E, H}, seed, "lstm.Wo");
    m.lstm.Ui = detail::init_weight<T>({H, H}, seed, "lstm.Ui");
    m.lstm.Uf = detail::init_weight<T>({H, H}, seed, "lstm.Uf");
    m.lstm.Uc = detail::init_weight<T>({H, H}, seed, "lstm.Uc");
    m.lstm.Uo = detail::init_weight<T>({H, H}, seed, "lstm.Uo");
    m.lstm.bi = ad::Tensor<T>::zeros({H}, true);
    m.lstm.bf = ad::Tensor<T>::constant({H}, T(1), true); // forget-gate bias starts open
    m.lstm.bc = ad::Tensor<T>::zeros({H}, true);
    m.lstm.bo = ad::Tensor<T>::zeros({H}, true);

    m.fnd1 = detail::init_dense<T>(dims.hidden, dims.head_hidden, seed, "fnd.dense1");
    m.fnd2 = detail::init_dense<T>(dims.head_hidden, 1, seed, "fnd.dense2");

    if (uses_emotion(variant)) {
        m.emotion_classes = emotion::taxonomy_size(*variant_taxonomy(variant));
        m.emo1 = detail::init_dense<T>(dims.hidden, dims.head_hidden, seed, "emo.dense1");
        m.emo2 = detail::init_dense<T>(dims.head_hidden,
                                       static_cast<std::size_t>(m.emotion_classes), seed,
                                       "emo.dense2");
    }
    if (uses_discriminator(variant)) {
        m.disc1 = detail::init_dense<T>(dims.hidden, dims.head_hidden, seed, "disc.dense1");
        m.disc2 = detail::init_dense<T>(dims.head_hidden, 1, seed, "disc.dense2");
    }
    return m;
}

inline BatchInput BatchInput::from(std::span<const data::LabeledExample* const> examples) {
    BatchInput batch;
    batch.batch = examples.size();
    if (examples.empty()) throw ContractError("cannot build a batch from zero examples");
    std::size_t steps = 0;
    for (const auto* ex : examples) {
        steps = std::max(steps, static_cast<std::size_t>(ex->seq.true_length));
    }
    batch.steps = steps;
    batch.ids.assign(steps * batch.batch, text::Vocabulary::kPadId);
    batch.mask.assign(steps * batch.batch, 0);
    for (std::size_t b = 0; b < batch.batch; ++b) {
        const auto& seq = examples[b]->seq;
        auto n = static_cast<std::size_t>(seq.true_length);
        for (std::size_t t = 0; t < n && t < steps; ++t) {
            batch.ids[t * batch.batch + b] = seq.ids[t];
            batch.mask[t * batch.batch + b] = 1;
        }
    }
    return batch;
}

template <class T>
ad::Tensor<T> extract_features(ad::Tape<T>& tape, const Model<T>& model,
                               const BatchInput& batch) {
    using ad::Tensor;
    const auto B = static_cast<long long>(batch.batch);
    const auto H = static_cast<long long>(model.dims.hidden);
    const std::size_t L = batch.steps;

    // one gather for the whole sequence, then one input-side projection per
    // gate over all timesteps at once
    auto embedded = ad::gather_rows(tape, model.embedding, batch.ids); // (L*B) x E
    auto xi = ad::add_bias(tape, ad::matmul(tape, embedded, model.lstm.Wi), model.lstm.bi);
    auto xf = ad::add_bias(tape, ad::matmul(tape, embedded, model.lstm.Wf), model.lstm.bf);
    auto xc = ad::add_bias(tape, ad::matmul(tape, embedded, model.lstm.Wc), model.lstm.bc);
    auto xo = ad::add_bias(tape, ad::matmul(tape, embedded, model.lstm.Wo), model.lstm.bo);

    Tensor<T> h = Tensor<T>::zeros({B, H});
    Tensor<T> c = Tensor<T>::zeros({B, H});
    std::vector<std::uint8_t> step_mask(batch.batch);
    for (std::size_t t = 0; t < L; ++t) {
        const std::size_t r0 = t * batch.batch, r1 = (t + 1) * batch.batch;
        auto pre_i = ad::add(tape, ad::slice_rows(tape, xi, r0, r1),
                             ad::matmul(tape, h, model.lstm.Ui));
        auto pre_f = ad::add(tape, ad::slice_rows(tape, xf, r0, r1),
                             ad::matmul(tape, h, model.lstm.Uf));
        auto pre_c = ad::add(tape, ad::slice_rows(tape, xc, r0, r1),
                             ad::matmul(tape, h, model.lstm.Uc));
        auto pre_o = ad::add(tape, ad::slice_rows(tape, xo, r0, r1),
                             ad::matmul(tape, h, model.lstm.Uo));
        auto gate_i = ad::sigmoid(tape, pre_i);
        auto gate_f = ad::sigmoid(tape, pre_f);
        auto gate_o = ad::sigmoid(tape, pre_o);
        auto cand = ad::tanh_op(tape, pre_c);
        auto c_new = ad::add(tape, ad::mul(tape, gate_f, c), ad::mul(tape, gate_i, cand));
        auto h_new = ad::mul(tape, gate_o, ad::tanh_op(tape, c_new));

        std::copy(batch.mask.begin() + static_cast<long>(r0),
                  batch.mask.begin() + static_cast<long>(r1), step_mask.begin());
        c = ad::row_select(tape, step_mask, c_new, c);
        h = ad::row_select(tape, step_mask, h_new, h);
    }
    return h;
}

template <class T>
ad::Tensor<T> extract_features(ad::Tape<T>& tape, const Model<T>& model,
                               const data::LabeledExample& example) {
    const data::LabeledExample* ptr = &example;
    std::span<const data::LabeledExample* const> one(&ptr, 1);
    return extract_features(tape, model, BatchInput::from(one));
}

template <class T>
ad::Tensor<T> fake_news_probability(ad::Tape<T>& tape, const Model<T>& model,
                                    const ad::Tensor<T>& features) {
    auto h = ad::relu(tape, ad::add_bias(tape, ad::matmul(tape, features, model.fnd1.W),
                                         model.fnd1.b));
    return ad::sigmoid(tape,
                       ad::add_bias(tape, ad::matmul(tape, h, model.fnd2.W), model.fnd2.b));
}

template <class T>
ad::Tensor<T> emotion_probabilities(ad::Tape<T>& tape, const Model<T>& model,
                                    const ad::Tensor<T>& features) {
    if (!model.emo1) throw ContractError("this model variant has no emotion head");
    auto h = ad::relu(tape, ad::add_bias(tape, ad::matmul(tape, features, model.emo1->W),
                                         model.emo1->b));
    return ad::softmax(tape,
                       ad::add_bias(tape, ad::matmul(tape, h, model.emo2->W), model.emo2->b));
}

template <class T>
ad::Tensor<T> domain_probability(ad::Tape<T>& tape, const Model<T>& model,
                                 const ad::Tensor<T>& features, T lambda) {
    if (!model.disc1) throw ContractError("this model variant has no domain discriminator");
    auto reversed = ad::grad_reverse(tape, features, lambda);
    auto h = ad::relu(tape, ad::add_bias(tape, ad::matmul(tape, reversed, model.disc1->W),
                                         model.disc1->b));
    return ad::sigmoid(tape,
                       ad::add_bias(tape, ad::matmul(tape, h, model.disc2->W), model.disc2->b));
}

namespace detail {

template <class T>
std::vector<T> training_veracity_labels(ExampleSpan batch) {
    std::vector<T> labels;
    labels.reserve(batch.size());
    for (const auto* ex : batch) {
        if (ex->domain != data::Domain::source) {
            throw ContractError("fake-news loss received a target-domain example (id=" +
                                ex->id + ")");
        }
        labels.push_back(static_cast<T>(ex->veracity_for_training()));
    }
    return labels;
}

inline std::vector<std::size_t> emotion_targets(ExampleSpan batch, emotion::Taxonomy expected) {
    std::vector<std::size_t> targets;
    targets.reserve(batch.size());
    for (const auto* ex : batch) {
        if (!ex->emotion) {
            throw ContractError("example " + ex->id + " has no emotion label");
        }
        if (ex->emotion->taxonomy != expected) {
            throw ContractError("example " + ex->id + " carries a " +
                                emotion::taxonomy_name(ex->emotion->taxonomy) +
                                " label but the variant expects " +
                                emotion::taxonomy_name(expected));
        }
        targets.push_back(static_cast<std::size_t>(ex->emotion->class_index));
    }
    return targets;
}

} // namespace detail

template <class T>
ad::Tensor<T> loss_fnd(ad::Tape<T>& tape, const Model<T>& model, ExampleSpan source_batch) {
    if (source_batch.empty()) throw ContractError("loss_fnd requires a nonempty source batch");
    auto labels = detail::training_veracity_labels<T>(source_batch);
    auto features = extract_features(tape, model, BatchInput::from(source_batch));
    auto p = fake_news_probability(tape, model, features);
    return ad::binary_cross_entropy_mean(tape, p, labels);
}

template <class T>
ad::Tensor<T> loss_emo(ad::Tape<T>& tape, const Model<T>& model, ExampleSpan source_batch,
                       ExampleSpan target_batch) {
    auto taxonomy = variant_taxonomy(model.variant);
    if (!taxonomy) throw ContractError("this model variant has no emotion branch");
    if (source_batch.empty()) throw ContractError("loss_emo requires a nonempty source batch");

    auto targets = detail::emotion_targets(source_batch, *taxonomy);
    auto features = extract_features(tape, model, BatchInput::from(source_batch));
    if (!target_batch.empty()) {
        auto t_targets = detail::emotion_targets(target_batch, *taxonomy);
        targets.insert(targets.end(), t_targets.begin(), t_targets.end());
        auto t_features = extract_features(tape, model, BatchInput::from(target_batch));
        features = ad::concat_rows(tape, features, t_features);
    }
    auto probs = emotion_probabilities(tape, model, features);
    return ad::cross_entropy_mean(tape, probs, targets);
}

template <class T>
ad::Tensor<T> loss_adv(ad::Tape<T>& tape, const Model<T>& model, ExampleSpan source_batch,
                       ExampleSpan target_batch, T lambda) {
    if (source_batch.empty() || target_batch.empty()) {
        throw ContractError("loss_adv requires nonempty source and target batches");
    }
    auto features_s = extract_features(tape, model, BatchInput::from(source_batch));
    auto features_t = extract_features(tape, model, BatchInput::from(target_batch));
    auto features = ad::concat_rows(tape, features_s, features_t);
    auto p = domain_probability(tape, model, features, lambda);
    std::vector<T> labels(source_batch.size() + target_batch.size(), T(0));
    std::fill(labels.begin() + static_cast<long>(source_batch.size()), labels.end(), T(1));
    return ad::binary_cross_entropy_mean(tape, p, labels);
}

template <class T>
ad::Tensor<T> loss_total(ad::Tape<T>& tape, const ad::Tensor<T>& l_fnd,
                         const ad::Tensor<T>& l_adv, const ad::Tensor<T>& l_emo, double alpha,
                         double beta) {
    validate_mixture_weights(alpha, beta);
    if (!l_fnd.defined()) throw ContractError("loss_total requires the fake-news loss");
    auto total = ad::scale(tape, l_fnd, static_cast<T>(1.0 - alpha - beta));
    if (l_adv.defined()) total = ad::add(tape, total, ad::scale(tape, l_adv, static_cast<T>(alpha)));
    if (l_emo.defined()) total = ad::add(tape, total, ad::scale(tape, l_emo, static_cast<T>(beta)));
    return total;
}

template <class T>
ad::Tensor<T> forward_losses(ad::Tape<T>& tape, const Model<T>& model, ExampleSpan source_batch,
                             ExampleSpan target_batch, double alpha, double beta, T lambda,
                             LossBreakdown* breakdown) {
    validate_mixture_weights(alpha, beta);
    if (!uses_discriminator(model.variant) && alpha != 0.0) {
        throw ConfigError("alpha must be 0 for a variant without a discriminator");
    }
    if (!uses_emotion(model.variant) && beta != 0.0) {
        throw ConfigError("beta must be 0 for a variant without an emotion head");
    }

    auto labels = detail::training_veracity_labels<T>(source_batch);
    auto features_s = extract_features(tape, model, BatchInput::from(source_batch));
    auto p_fake = fake_news_probability(tape, model, features_s);
    auto l_fnd_t = ad::binary_cross_entropy_mean(tape, p_fake, labels);

    ad::Tensor<T> features_t;
    if (!target_batch.empty()) {
        features_t = extract_features(tape, model, BatchInput::from(target_batch));
    }

    ad::Tensor<T> l_emo_t;
    if (uses_emotion(model.variant)) {
        auto taxonomy = *variant_taxonomy(model.variant);
        auto targets = detail::emotion_targets(source_batch, taxonomy);
        auto emo_features = features_s;
        if (features_t.defined()) {
            auto t_targets = detail::emotion_targets(target_batch, taxonomy);
            targets.insert(targets.end(), t_targets.begin(), t_targets.end());
            emo_features = ad::concat_rows(tape, features_s, features_t);
        }
        auto probs = emotion_probabilities(tape, model, emo_features);
        l_emo_t = ad::cross_entropy_mean(tape, probs, targets);
    }

    ad::Tensor<T> l_adv_t;
    if (uses_discriminator(model.variant)) {
        if (!features_t.defined()) {
            throw ContractError("domain-adaptive training requires a target batch");
        }
        auto both = ad::concat_rows(tape, features_s, features_t);
        auto p_dom = domain_probability(tape, model, both, lambda);
        std::vector<T> dom_labels(source_batch.size() + target_batch.size(), T(0));
        std::fill(dom_labels.begin() + static_cast<long>(source_batch.size()), dom_labels.end(),
                  T(1));
        l_adv_t = ad::binary_cross_entropy_mean(tape, p_dom, dom_labels);
    }

    ad::Tensor<T> total;
    if (!l_emo_t.defined() && !l_adv_t.defined() && alpha == 0.0 && beta == 0.0) {
        total = l_fnd_t; // single-task: the fake-news loss is the objective
    } else {
        total = loss_total(tape, l_fnd_t, l_adv_t, l_emo_t, alpha, beta);
    }

    if (breakdown) {
        breakdown->l_fnd = static_cast<double>(l_fnd_t.item());
        breakdown->l_emo = l_emo_t.defined() ? static_cast<double>(l_emo_t.item()) : 0.0;
        breakdown->l_adv = l_adv_t.defined() ? static_cast<double>(l_adv_t.item()) : 0.0;
        breakdown->l_total = static_cast<double>(total.item());
        breakdown->alpha = alpha;
        breakdown->beta = beta;
    }
    return total;
}

template <class T>
std::vector<double> predict_fake_probability(const Model<T>& model,
                                             std::span<const data::LabeledExample> examples,
                                             std::size_t batch_size) {
    std::vector<double> probs;
    probs.reserve(examples.size());
    std::vector<const data::LabeledExample*> ptrs;
    for (std::size_t start = 0; start < examples.size(); start += batch_size) {
        std::size_t end = std::min(examples.size(), start + batch_size);
        ptrs.clear();
        for (std::size_t i = start; i < end; ++i) ptrs.push_back(&examples[i]);
        ad::Tape<T> tape;
        tape.set_recording(false);
        auto features = extract_features(tape, model, BatchInput::from(ptrs));
        auto p = fake_news_probability(tape, model, features);
        for (std::size_t i = 0; i < p.size(); ++i) {
            probs.push_back(static_cast<double>(p.data()[i]));
        }
    }
    return probs;
}

} // namespace emoda::model
