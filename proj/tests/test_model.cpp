#include <doctest.h>

#include <cmath>

#include "emoda/fdcheck.hpp"
#include "emoda/model.hpp"
#include "testutil.hpp"

using namespace emoda;
using namespace emoda::model;

namespace {

// compact dimensions so full-coordinate finite differences stay fast
constexpr ModelDims kTinyDims{6, 5, 4};
constexpr std::size_t kVocab = 12;

text::EmbeddingTable tiny_table(std::uint64_t seed) {
    std::vector<std::vector<std::string>> corpus;
    for (std::size_t i = 2; i < kVocab; ++i) corpus.push_back({"w" + std::to_string(i)});
    auto vocab = text::Vocabulary::build(corpus, 1);
    return text::random_embeddings(vocab, kTinyDims.embed_dim, seed);
}

template <class T>
data::LabeledExample make_example(const std::string& id, data::Domain domain,
                                  std::vector<std::int32_t> ids, int true_len,
                                  std::optional<int> veracity, std::optional<int> emotion_idx,
                                  emotion::Taxonomy tax = emotion::Taxonomy::plutchik8) {
    data::LabeledExample ex;
    ex.id = id;
    ex.domain = domain;
    ex.seq.ids = std::move(ids);
    ex.seq.true_length = true_len;
    if (veracity) ex.set_veracity(*veracity);
    if (emotion_idx) ex.emotion = emotion::EmotionLabel{*emotion_idx, tax};
    return ex;
}

std::vector<const data::LabeledExample*> ptrs(const std::vector<data::LabeledExample>& v) {
    std::vector<const data::LabeledExample*> out;
    for (auto& e : v) out.push_back(&e);
    return out;
}

std::vector<data::LabeledExample> source_batch(int n, emotion::Taxonomy tax) {
    Rng rng(41);
    std::vector<data::LabeledExample> batch;
    for (int i = 0; i < n; ++i) {
        int len = 1 + static_cast<int>(rng.below(4));
        std::vector<std::int32_t> ids(4, 0);
        for (int t = 0; t < len; ++t) ids[t] = 2 + static_cast<int>(rng.below(kVocab - 2));
        batch.push_back(make_example<float>("s" + std::to_string(i), data::Domain::source, ids,
                                            len, static_cast<int>(rng.below(2)),
                                            static_cast<int>(rng.below(
                                                (std::uint64_t)emotion::taxonomy_size(tax))),
                                            tax));
    }
    return batch;
}

std::vector<data::LabeledExample> target_batch(int n, emotion::Taxonomy tax) {
    Rng rng(43);
    std::vector<data::LabeledExample> batch;
    for (int i = 0; i < n; ++i) {
        int len = 1 + static_cast<int>(rng.below(4));
        std::vector<std::int32_t> ids(4, 0);
        for (int t = 0; t < len; ++t) ids[t] = 2 + static_cast<int>(rng.below(kVocab - 2));
        batch.push_back(make_example<float>("t" + std::to_string(i), data::Domain::target, ids,
                                            len, std::nullopt,
                                            static_cast<int>(rng.below(
                                                (std::uint64_t)emotion::taxonomy_size(tax))),
                                            tax));
    }
    return batch;
}

} // namespace

TEST_CASE("variant names round-trip") {
    for (auto v : all_variants()) {
        CHECK(variant_from_name(variant_display_name(v)) == v);
    }
    CHECK(variant_from_name("da_mtl_p") == ModelVariant::da_mtl_p);
    CHECK_THROWS_AS(variant_from_name("transformer"), ConfigError);
}

TEST_CASE("padding never advances the recurrence") {
    auto table = tiny_table(3);
    auto m = create_model<double>(ModelVariant::stl, table, 11, kTinyDims);

    auto padded = make_example<double>("a", data::Domain::source, {5, 0, 0, 0}, 1, 1,
                                       std::nullopt);
    auto single = make_example<double>("b", data::Domain::source, {5}, 1, 1, std::nullopt);

    ad::Tape<double> tape;
    auto f1 = extract_features(tape, m, padded);
    auto f2 = extract_features(tape, m, single);
    CHECK(f1.values() == f2.values());
}

TEST_CASE("identical sequences give identical features") {
    auto table = tiny_table(3);
    auto m = create_model<double>(ModelVariant::stl, table, 11, kTinyDims);
    auto ex = make_example<double>("a", data::Domain::source, {5, 7, 3, 0}, 3, 1, std::nullopt);
    ad::Tape<double> tape;
    auto f1 = extract_features(tape, m, ex);
    auto f2 = extract_features(tape, m, ex);
    CHECK(f1.values() == f2.values());
}

TEST_CASE("lstm gradients match finite differences on a length-3 sequence") {
    auto table = tiny_table(5);
    auto m = create_model<double>(ModelVariant::stl, table, 13, kTinyDims, true);
    auto ex = make_example<double>("a", data::Domain::source, {4, 9, 2}, 3, 1, std::nullopt);

    auto params = m.named_params(true); // embedding included: trainable here
    auto forward = [&](ad::Tape<double>& tape) {
        return ad::sum_all(tape, extract_features(tape, m, ex));
    };
    for (auto& np : params) np.tensor.zero_grad();
    ad::Tape<double> tape;
    tape.backward(forward(tape));

    auto eval = [&]() {
        ad::Tape<double> t2;
        t2.set_recording(false);
        return forward(t2).item();
    };
    // lstm + embedding only (heads do not participate in this loss)
    std::vector<ad::NamedParam<double>> lstm_params;
    for (auto& np : params) {
        if (np.name.rfind("lstm.", 0) == 0 || np.name == "embedding") {
            lstm_params.push_back(np);
        }
    }
    auto report = ad::check_gradients<double>(eval, lstm_params, {});
    INFO("max rel err ", report.max_rel_err);
    CHECK(report.failures.empty());
    CHECK(report.checked > 100);
}

TEST_CASE("head independence: losses only touch their own head") {
    auto table = tiny_table(7);
    auto m = create_model<double>(ModelVariant::da_mtl_p, table, 17, kTinyDims);
    auto src = source_batch(4, emotion::Taxonomy::plutchik8);
    auto tgt = target_batch(4, emotion::Taxonomy::plutchik8);

    auto zero_all = [&]() {
        for (auto& np : m.named_params(true)) np.tensor.zero_grad();
    };
    auto grad_norm = [](const ad::Tensor<double>& t) {
        double s = 0;
        if (!t.has_grad()) return 0.0;
        for (double g : t.grad()) s += g * g;
        return s;
    };

    zero_all();
    {
        ad::Tape<double> tape;
        tape.backward(loss_fnd(tape, m, ptrs(src)));
    }
    CHECK(grad_norm(m.fnd1.W) > 0.0);
    CHECK(grad_norm(m.emo1->W) == 0.0);
    CHECK(grad_norm(m.disc1->W) == 0.0);

    zero_all();
    {
        ad::Tape<double> tape;
        tape.backward(loss_emo(tape, m, ptrs(src), ptrs(tgt)));
    }
    CHECK(grad_norm(m.emo1->W) > 0.0);
    CHECK(grad_norm(m.fnd1.W) == 0.0);
    CHECK(grad_norm(m.disc1->W) == 0.0);

    zero_all();
    {
        ad::Tape<double> tape;
        tape.backward(loss_adv(tape, m, ptrs(src), ptrs(tgt), 1.0));
    }
    CHECK(grad_norm(m.disc1->W) > 0.0);
    CHECK(grad_norm(m.fnd1.W) == 0.0);
    CHECK(grad_norm(m.emo1->W) == 0.0);
}

TEST_CASE("grl adversarial property: extractor gradient is -lambda times unreversed") {
    auto table = tiny_table(9);
    auto m = create_model<double>(ModelVariant::da_stl, table, 19, kTinyDims);
    auto src = source_batch(3, emotion::Taxonomy::plutchik8);
    auto tgt = target_batch(3, emotion::Taxonomy::plutchik8);
    const double lambda = 0.7;

    // discriminator head applied without the reversal: the test-side oracle
    auto unreversed_loss = [&](ad::Tape<double>& tape) {
        auto fs = extract_features(tape, m, BatchInput::from(ptrs(src)));
        auto ft = extract_features(tape, m, BatchInput::from(ptrs(tgt)));
        auto features = ad::concat_rows(tape, fs, ft);
        auto h = ad::relu(tape, ad::add_bias(tape, ad::matmul(tape, features, m.disc1->W),
                                             m.disc1->b));
        auto p = ad::sigmoid(tape,
                             ad::add_bias(tape, ad::matmul(tape, h, m.disc2->W), m.disc2->b));
        std::vector<double> labels(6, 0.0);
        std::fill(labels.begin() + 3, labels.end(), 1.0);
        return ad::binary_cross_entropy_mean(tape, p, labels);
    };

    auto extractor = m.extractor_params(false);

    for (auto& np : m.named_params(true)) np.tensor.zero_grad();
    {
        ad::Tape<double> tape;
        tape.backward(loss_adv(tape, m, ptrs(src), ptrs(tgt), lambda));
    }
    std::vector<std::vector<double>> with_grl;
    for (auto& np : extractor) with_grl.push_back(np.tensor.grad());

    for (auto& np : m.named_params(true)) np.tensor.zero_grad();
    {
        ad::Tape<double> tape;
        tape.backward(unreversed_loss(tape));
    }

    for (std::size_t p = 0; p < extractor.size(); ++p) {
        const auto& plain = extractor[p].tensor.grad();
        for (std::size_t i = 0; i < plain.size(); ++i) {
            double expected = -lambda * plain[i];
            CHECK(std::abs(with_grl[p][i] - expected) <=
                  1e-12 * std::max(1.0, std::abs(expected)));
            if (plain[i] != 0.0) {
                // sign flip, as the adversarial max demands
                CHECK(std::signbit(with_grl[p][i]) != std::signbit(plain[i]));
            }
        }
    }
}

TEST_CASE("lambda zero silences the extractor but not the discriminator") {
    auto table = tiny_table(21);
    auto m = create_model<double>(ModelVariant::da_stl, table, 23, kTinyDims);
    auto src = source_batch(3, emotion::Taxonomy::plutchik8);
    auto tgt = target_batch(3, emotion::Taxonomy::plutchik8);

    for (auto& np : m.named_params(true)) np.tensor.zero_grad();
    ad::Tape<double> tape;
    tape.backward(loss_adv(tape, m, ptrs(src), ptrs(tgt), 0.0));

    for (auto& np : m.extractor_params(true)) {
        for (double g : np.tensor.grad()) CHECK(g == 0.0);
    }
    double disc_norm = 0;
    for (double g : m.disc1->W.grad()) disc_norm += g * g;
    CHECK(disc_norm > 0.0);
}

TEST_CASE("uniform predictions reduce to the closed-form losses") {
    auto table = tiny_table(25);
    auto src6 = source_batch(5, emotion::Taxonomy::ekman6);
    auto src8 = source_batch(5, emotion::Taxonomy::plutchik8);
    auto tgt8 = target_batch(5, emotion::Taxonomy::plutchik8);

    {
        auto m = create_model<double>(ModelVariant::mtl_e, table, 27, kTinyDims);
        // zero output layers force p = 0.5 and uniform softmax
        std::fill(m.fnd2.W.values().begin(), m.fnd2.W.values().end(), 0.0);
        std::fill(m.fnd2.b.values().begin(), m.fnd2.b.values().end(), 0.0);
        std::fill(m.emo2->W.values().begin(), m.emo2->W.values().end(), 0.0);
        std::fill(m.emo2->b.values().begin(), m.emo2->b.values().end(), 0.0);
        ad::Tape<double> tape;
        CHECK(loss_fnd(tape, m, ptrs(src6)).item() ==
              doctest::Approx(std::log(2.0)).epsilon(1e-9));
        CHECK(loss_emo(tape, m, ptrs(src6), {}).item() ==
              doctest::Approx(std::log(6.0)).epsilon(1e-9));
    }
    {
        auto m = create_model<double>(ModelVariant::da_mtl_p, table, 27, kTinyDims);
        std::fill(m.emo2->W.values().begin(), m.emo2->W.values().end(), 0.0);
        std::fill(m.emo2->b.values().begin(), m.emo2->b.values().end(), 0.0);
        std::fill(m.disc2->W.values().begin(), m.disc2->W.values().end(), 0.0);
        std::fill(m.disc2->b.values().begin(), m.disc2->b.values().end(), 0.0);
        ad::Tape<double> tape;
        CHECK(loss_emo(tape, m, ptrs(src8), ptrs(tgt8)).item() ==
              doctest::Approx(std::log(8.0)).epsilon(1e-9));
        CHECK(loss_adv(tape, m, ptrs(src8), ptrs(tgt8), 1.0).item() ==
              doctest::Approx(std::log(2.0)).epsilon(1e-9));
    }
}

TEST_CASE("two-example hand batch for the fake-news loss") {
    ad::Tape<double> tape;
    auto p = ad::Tensor<double>::from_values({2, 1}, {0.9, 0.2});
    auto loss = ad::binary_cross_entropy_mean(tape, p, std::vector<double>{1.0, 0.0});
    CHECK(loss.item() == doctest::Approx((-std::log(0.9) - std::log(0.8)) / 2).epsilon(1e-12));
    CHECK(loss.item() == doctest::Approx(0.16425).epsilon(1e-3));
}

TEST_CASE("loss_fnd rejects target examples") {
    auto table = tiny_table(29);
    auto m = create_model<double>(ModelVariant::stl, table, 31, kTinyDims);
    auto tgt = target_batch(2, emotion::Taxonomy::plutchik8);
    ad::Tape<double> tape;
    CHECK_THROWS_AS(loss_fnd(tape, m, ptrs(tgt)), ContractError);
}

TEST_CASE("loss_emo validates the taxonomy") {
    auto table = tiny_table(33);
    auto m = create_model<double>(ModelVariant::mtl_p, table, 35, kTinyDims);
    auto wrong = source_batch(2, emotion::Taxonomy::ekman6);
    ad::Tape<double> tape;
    CHECK_THROWS_AS(loss_emo(tape, m, ptrs(wrong), {}), ContractError);

    // and an empty target batch reduces to the source mean
    auto src = source_batch(3, emotion::Taxonomy::plutchik8);
    auto with_empty = loss_emo(tape, m, ptrs(src), {});
    auto direct = loss_emo(tape, m, ptrs(src), std::vector<const data::LabeledExample*>{});
    CHECK(with_empty.item() == direct.item());
}

TEST_CASE("loss_total substitutes into the weighted sum") {
    ad::Tape<double> tape;
    auto fnd = ad::Tensor<double>::scalar(1.0);
    auto adv = ad::Tensor<double>::scalar(2.0);
    auto emo = ad::Tensor<double>::scalar(3.0);
    auto total = loss_total(tape, fnd, adv, emo, 0.2, 0.3);
    CHECK(total.item() == doctest::Approx(1.8).epsilon(1e-12));

    auto no_extras = loss_total(tape, fnd, adv, emo, 0.0, 0.0);
    CHECK(no_extras.item() == 1.0); // exact

    CHECK_THROWS_AS(loss_total(tape, fnd, adv, emo, 0.7, 0.4), ConfigError);
    CHECK_THROWS_AS(loss_total(tape, fnd, adv, emo, -0.1, 0.0), ConfigError);
}

TEST_CASE("theta_f gradient of l_total is (1-alpha-beta) times the l_fnd gradient") {
    auto table = tiny_table(37);
    auto m = create_model<double>(ModelVariant::da_mtl_p, table, 39, kTinyDims);
    auto src = source_batch(4, emotion::Taxonomy::plutchik8);
    auto tgt = target_batch(4, emotion::Taxonomy::plutchik8);
    const double alpha = 0.25, beta = 0.35;

    for (auto& np : m.named_params(true)) np.tensor.zero_grad();
    {
        ad::Tape<double> tape;
        tape.backward(
            forward_losses<double>(tape, m, ptrs(src), ptrs(tgt), alpha, beta, 1.0, nullptr));
    }
    auto total_grad = m.fnd2.W.grad();

    for (auto& np : m.named_params(true)) np.tensor.zero_grad();
    {
        ad::Tape<double> tape;
        tape.backward(loss_fnd(tape, m, ptrs(src)));
    }
    auto fnd_grad = m.fnd2.W.grad();

    for (std::size_t i = 0; i < total_grad.size(); ++i) {
        CHECK(total_grad[i] ==
              doctest::Approx((1.0 - alpha - beta) * fnd_grad[i]).epsilon(1e-9));
    }
}

TEST_CASE("loss breakdown recomposes") {
    auto table = tiny_table(41);
    auto m = create_model<double>(ModelVariant::da_mtl_p, table, 43, kTinyDims);
    auto src = source_batch(4, emotion::Taxonomy::plutchik8);
    auto tgt = target_batch(4, emotion::Taxonomy::plutchik8);
    ad::Tape<double> tape;
    LossBreakdown breakdown;
    auto total =
        forward_losses<double>(tape, m, ptrs(src), ptrs(tgt), 0.2, 0.3, 1.0, &breakdown);
    CHECK(std::abs(breakdown.l_total - breakdown.recomposed()) <= 1e-6);
    CHECK(total.item() == doctest::Approx(breakdown.l_total));
}

TEST_CASE("checkpoint round-trips bit for bit") {
    testutil::TempDir tmp;
    auto table = tiny_table(45);
    auto m = create_model<float>(ModelVariant::da_mtl_e, table, 47, kTinyDims, true);
    auto path = tmp.file("model.ckpt");
    save_checkpoint(path, m);

    auto loaded = load_checkpoint<float>(path);
    CHECK(loaded.variant == m.variant);
    CHECK(loaded.emotion_classes == m.emotion_classes);
    CHECK(loaded.embedding_trainable == m.embedding_trainable);
    CHECK(loaded.dims.hidden == m.dims.hidden);

    auto a = m.named_params(true);
    auto b = loaded.named_params(true);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].name == b[i].name);
        CHECK(a[i].tensor.values() == b[i].tensor.values());
        CHECK(a[i].tensor.shape() == b[i].tensor.shape());
    }

    // save(load(x)) is byte-identical to save(x)
    auto path2 = tmp.file("model2.ckpt");
    save_checkpoint(path2, loaded);
    CHECK(testutil::read_file(path) == testutil::read_file(path2));

    // precision mismatch is rejected
    CHECK_THROWS_AS(load_checkpoint<double>(path), ConfigError);
}

TEST_CASE("forward losses are identical whether features are shared or recomputed") {
    auto table = tiny_table(49);
    auto m = create_model<float>(ModelVariant::da_mtl_p, table, 51, kTinyDims);
    auto src = source_batch(4, emotion::Taxonomy::plutchik8);
    auto tgt = target_batch(4, emotion::Taxonomy::plutchik8);

    ad::Tape<float> tape;
    LossBreakdown breakdown;
    forward_losses<float>(tape, m, ptrs(src), ptrs(tgt), 0.2f, 0.3f, 1.0f, &breakdown);

    CHECK(loss_fnd(tape, m, ptrs(src)).item() == doctest::Approx(breakdown.l_fnd));
    CHECK(loss_emo(tape, m, ptrs(src), ptrs(tgt)).item() == doctest::Approx(breakdown.l_emo));
    CHECK(loss_adv(tape, m, ptrs(src), ptrs(tgt), 1.0f).item() ==
          doctest::Approx(breakdown.l_adv));
}
