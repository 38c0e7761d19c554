#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "emoda/dataset.hpp"
#include "emoda/text.hpp"
#include "emoda/train.hpp"
#include "testutil.hpp"

using namespace emoda;
using namespace emoda::data;

namespace {

text::Vocabulary tiny_vocab() {
    return text::Vocabulary::build({{"x", "y", "z"}}, 1);
}

} // namespace

TEST_CASE("jsonl load maps labels and roles") {
    testutil::TempDir tmp;
    testutil::write_file(tmp.file("d.jsonl"),
                         R"({"id":"a","text":"X y","label":"fake"})" "\n"
                         R"({"id":"b","text":"z z","label":"real","emotion":"joy"})" "\n");
    auto vocab = tiny_vocab();
    auto examples = load_dataset(tmp.file("d.jsonl"), Domain::source, vocab, 4,
                                 emotion::Taxonomy::ekman6);
    REQUIRE(examples.size() == 2);
    CHECK(examples[0].veracity_for_training() == 1);
    CHECK(examples[0].domain == Domain::source);
    CHECK(!examples[0].emotion);
    CHECK(examples[1].veracity_for_training() == 0);
    CHECK(examples[1].emotion->class_name() == "joy");
}

TEST_CASE("duplicate ids are rejected by name") {
    testutil::TempDir tmp;
    testutil::write_file(tmp.file("d.jsonl"), R"({"id":"a","text":"x"})" "\n"
                                              R"({"id":"a","text":"y"})" "\n");
    try {
        read_jsonl_documents(tmp.file("d.jsonl"));
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("\"a\"") != std::string::npos);
    }
}

TEST_CASE("missing text and source-missing-label are rejected") {
    testutil::TempDir tmp;
    testutil::write_file(tmp.file("notext.jsonl"), R"({"id":"a","label":"fake"})" "\n");
    CHECK_THROWS_AS(read_jsonl_documents(tmp.file("notext.jsonl")), DataError);

    testutil::write_file(tmp.file("nolabel.jsonl"), R"({"id":"a","text":"x y"})" "\n");
    auto vocab = tiny_vocab();
    CHECK_THROWS_AS(
        load_dataset(tmp.file("nolabel.jsonl"), Domain::source, vocab, 4, std::nullopt),
        DataError);
    // the same file is fine as target
    auto target =
        load_dataset(tmp.file("nolabel.jsonl"), Domain::target, vocab, 4, std::nullopt);
    CHECK(target.size() == 1);
    CHECK(!target[0].has_veracity());
}

TEST_CASE("target veracity labels load but stay blinded from the training path") {
    testutil::TempDir tmp;
    testutil::write_file(tmp.file("t.jsonl"),
                         R"({"id":"a","text":"x y z","label":"fake"})" "\n");
    auto vocab = tiny_vocab();
    auto examples = load_dataset(tmp.file("t.jsonl"), Domain::target, vocab, 4, std::nullopt);
    REQUIRE(examples.size() == 1);
    CHECK(examples[0].has_veracity());
    CHECK_THROWS_AS(examples[0].veracity_for_training(), ContractError);
    CHECK(examples[0].veracity_for_eval() == 1); // test-time evaluation only
}

TEST_CASE("split is deterministic, disjoint and sized") {
    std::vector<LabeledExample> examples;
    for (int i = 0; i < 100; ++i) {
        LabeledExample ex;
        ex.id = "e" + std::to_string(i);
        ex.seq.ids = {2};
        ex.seq.true_length = 1;
        ex.set_veracity(i % 2);
        examples.push_back(ex);
    }
    auto s1 = split_dataset(examples, {0.8, 0.1, 0.1}, 1);
    CHECK(s1.train.size() == 80);
    CHECK(s1.val.size() == 10);
    CHECK(s1.test.size() == 10);

    std::set<std::string> ids;
    for (const auto* part : {&s1.train, &s1.val, &s1.test}) {
        for (const auto& ex : *part) CHECK(ids.insert(ex.id).second);
    }
    CHECK(ids.size() == 100);

    auto s2 = split_dataset(examples, {0.8, 0.1, 0.1}, 1);
    auto id_list = [](const std::vector<LabeledExample>& v) {
        std::vector<std::string> out;
        for (auto& e : v) out.push_back(e.id);
        return out;
    };
    CHECK(id_list(s1.train) == id_list(s2.train));
    CHECK(id_list(s1.val) == id_list(s2.val));
    CHECK(id_list(s1.test) == id_list(s2.test));

    auto s3 = split_dataset(examples, {0.8, 0.1, 0.1}, 2);
    CHECK(id_list(s1.train) != id_list(s3.train));
}

TEST_CASE("split stratifies by veracity within one example") {
    std::vector<LabeledExample> examples;
    for (int i = 0; i < 100; ++i) {
        LabeledExample ex;
        ex.id = "e" + std::to_string(i);
        ex.seq.ids = {2};
        ex.seq.true_length = 1;
        ex.set_veracity(i < 50 ? 1 : 0);
        examples.push_back(ex);
    }
    auto s = split_dataset(examples, {0.8, 0.1, 0.1}, 3);
    int fake = 0, real = 0;
    for (auto& ex : s.train) (ex.veracity_for_eval() == 1 ? fake : real)++;
    CHECK(std::abs(fake - 40) <= 1);
    CHECK(std::abs(real - 40) <= 1);
}

TEST_CASE("split validation errors") {
    std::vector<LabeledExample> examples(3);
    for (int i = 0; i < 3; ++i) {
        examples[i].id = std::to_string(i);
        examples[i].seq.ids = {2};
        examples[i].seq.true_length = 1;
    }
    CHECK_THROWS_AS(split_dataset(examples, {0.5, 0.2, 0.2}, 1), ConfigError);
    CHECK_THROWS_AS(split_dataset(examples, {0.98, 0.01, 0.01}, 1), DataError);
}

TEST_CASE("csv shim concatenates title and text") {
    testutil::TempDir tmp;
    testutil::write_file(tmp.file("d.csv"),
                         "id,title,text,label\n"
                         "a,\"Big, bold claim\",\"body with \"\"quotes\"\"\",fake\n"
                         "b,,plain body,real\n");
    auto docs = read_csv_documents(tmp.file("d.csv"));
    REQUIRE(docs.size() == 2);
    CHECK(docs[0].id == "a");
    CHECK(docs[0].text == "Big, bold claim body with \"quotes\"");
    CHECK(*docs[0].veracity == 1);
    CHECK(docs[1].text == "plain body");
    CHECK(*docs[1].veracity == 0);
}

TEST_CASE("synthetic spec requires a seed and valid ranges") {
    SyntheticSpec spec;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.seed = 9;
    spec.seed_set = true;
    spec.validate();
    spec.rho = 1.5;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

namespace {

SyntheticSpec small_spec(std::uint64_t seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    spec.seed_set = true;
    spec.n_source = 2000;
    spec.n_target = 2000;
    return spec;
}

double emotion_veracity_mi(const std::vector<RawDocument>& docs) {
    std::map<std::pair<std::string, int>, double> joint;
    std::map<std::string, double> p_e;
    std::map<int, double> p_v;
    double n = static_cast<double>(docs.size());
    for (const auto& d : docs) {
        joint[{*d.emotion, *d.veracity}] += 1.0 / n;
        p_e[*d.emotion] += 1.0 / n;
        p_v[*d.veracity] += 1.0 / n;
    }
    double mi = 0.0;
    for (auto& [key, p] : joint) {
        mi += p * std::log(p / (p_e[key.first] * p_v[key.second]));
    }
    return mi;
}

} // namespace

TEST_CASE("rho zero gives near-zero emotion/veracity mutual information") {
    auto spec = small_spec(11);
    spec.rho = 0.0;
    auto corpus = make_synthetic_corpus(spec);
    CHECK(emotion_veracity_mi(corpus.source) < 0.01);
    CHECK(emotion_veracity_mi(corpus.target) < 0.01);
}

TEST_CASE("rho one puts every fake example in the affiliated emotion set") {
    auto spec = small_spec(12);
    spec.rho = 1.0;
    spec.n_source = 1000;
    spec.n_target = 0;
    auto corpus = make_synthetic_corpus(spec);
    const auto& fake_set = affiliated_emotions(spec.taxonomy, 1);
    const auto& real_set = affiliated_emotions(spec.taxonomy, 0);
    for (const auto& d : corpus.source) {
        const auto& expected = *d.veracity == 1 ? fake_set : real_set;
        CHECK(std::find(expected.begin(), expected.end(), *d.emotion) != expected.end());
    }
    // and rho high does carry information
    CHECK(emotion_veracity_mi(corpus.source) > 0.1);
}

TEST_CASE("shift zero keeps the domains identically distributed") {
    auto spec = small_spec(13);
    spec.shift = 0.0;
    auto corpus = make_synthetic_corpus(spec);
    std::map<std::string, double> src_freq, tgt_freq;
    double ns = 0, nt = 0;
    for (auto& d : corpus.source) {
        for (auto& tok : text::tokenize(d.text)) {
            src_freq[tok] += 1;
            ns += 1;
        }
    }
    for (auto& d : corpus.target) {
        for (auto& tok : text::tokenize(d.text)) {
            tgt_freq[tok] += 1;
            nt += 1;
        }
    }
    // no target-only surface forms at all
    for (auto& [tok, f] : tgt_freq) CHECK(src_freq.count(tok) == 1);
    // empirical unigram distributions agree up to sampling noise
    double tv = 0;
    for (auto& [tok, f] : src_freq) {
        tv += std::abs(f / ns - (tgt_freq.count(tok) ? tgt_freq[tok] / nt : 0.0));
    }
    CHECK(tv / 2 < 0.15);
}

TEST_CASE("positive shift introduces disjoint target surface forms") {
    auto spec = small_spec(14);
    spec.shift = 0.5;
    auto corpus = make_synthetic_corpus(spec);
    std::set<std::string> src_tokens, tgt_tokens;
    for (auto& d : corpus.source)
        for (auto& tok : text::tokenize(d.text)) src_tokens.insert(tok);
    for (auto& d : corpus.target)
        for (auto& tok : text::tokenize(d.text)) tgt_tokens.insert(tok);
    std::size_t target_only = 0;
    for (auto& tok : tgt_tokens) {
        if (!src_tokens.count(tok)) ++target_only;
    }
    CHECK(target_only > tgt_tokens.size() / 5);
}

TEST_CASE("generator is deterministic in the seed") {
    auto a = make_synthetic_corpus(small_spec(15));
    auto b = make_synthetic_corpus(small_spec(15));
    auto c = make_synthetic_corpus(small_spec(16));
    REQUIRE(a.source.size() == b.source.size());
    bool all_equal = true;
    for (std::size_t i = 0; i < a.source.size(); ++i) {
        if (a.source[i].text != b.source[i].text || *a.source[i].veracity != *b.source[i].veracity ||
            *a.source[i].emotion != *b.source[i].emotion) {
            all_equal = false;
        }
    }
    CHECK(all_equal);
    bool differs = false;
    for (std::size_t i = 0; i < a.source.size() && !differs; ++i) {
        if (a.source[i].text != c.source[i].text) differs = true;
    }
    CHECK(differs);
}

TEST_CASE("increasing shift degrades source-trained STL accuracy on the target") {
    // trend over seeds, small model for speed
    auto target_accuracy = [](double shift, std::uint64_t seed) {
        SyntheticSpec spec;
        spec.seed = 100 + seed;
        spec.seed_set = true;
        spec.n_source = 400;
        spec.n_target = 400;
        spec.shift = shift;
        spec.rho = 0.9;
        auto corpus = make_synthetic_corpus(spec);

        std::vector<std::vector<std::string>> tokens;
        for (auto& d : corpus.source) tokens.push_back(text::tokenize(d.text));
        for (auto& d : corpus.target) tokens.push_back(text::tokenize(d.text));
        auto vocab = text::Vocabulary::build(tokens, 1);
        auto table = text::random_embeddings(vocab, 32, 5);

        auto src = encode_documents(corpus.source, Domain::source, vocab, 16, std::nullopt);
        auto tgt = encode_documents(corpus.target, Domain::target, vocab, 16, std::nullopt);
        auto split = make_split(src, tgt, {0.8, 0.1, 0.1}, 7);

        train::TrainConfig cfg;
        cfg.variant = model::ModelVariant::stl;
        cfg.max_epochs = 6;
        cfg.seed = seed;
        cfg.max_len = 16;
        cfg.dims = {32, 24, 16};
        auto run = train::train(cfg, split, table);
        return train::accuracy_against_labels(run.trained, split.target_test);
    };

    auto med = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    std::vector<double> at_zero, at_half, at_one;
    for (std::uint64_t s = 1; s <= 5; ++s) {
        at_zero.push_back(target_accuracy(0.0, s));
        at_half.push_back(target_accuracy(0.5, s));
        at_one.push_back(target_accuracy(1.0, s));
    }
    CHECK(med(at_zero) > med(at_half));
    CHECK(med(at_half) > med(at_one));
}
