#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "emoda/train.hpp"
#include "testutil.hpp"

using namespace emoda;
using namespace emoda::train;

namespace {

constexpr model::ModelDims kSmallDims{24, 16, 12};

// small separable synthetic pair shared by the training tests
struct Fixture {
    data::DatasetSplit split;
    text::EmbeddingTable table;
};

Fixture make_fixture(int n, double shift, double rho, std::uint64_t seed) {
    data::SyntheticSpec spec;
    spec.seed = seed;
    spec.seed_set = true;
    spec.n_source = n;
    spec.n_target = n;
    spec.shift = shift;
    spec.rho = rho;
    spec.doc_len_min = 4;
    spec.doc_len_max = 8;
    auto corpus = data::make_synthetic_corpus(spec);

    std::vector<std::vector<std::string>> tokens;
    for (auto& d : corpus.source) tokens.push_back(text::tokenize(d.text));
    for (auto& d : corpus.target) tokens.push_back(text::tokenize(d.text));
    auto vocab = text::Vocabulary::build(tokens, 1);

    Fixture fx;
    fx.table = text::random_embeddings(vocab, kSmallDims.embed_dim, seed ^ 0xabc);
    auto src = data::encode_documents(corpus.source, data::Domain::source, vocab, 10,
                                      emotion::Taxonomy::plutchik8);
    auto tgt = data::encode_documents(corpus.target, data::Domain::target, vocab, 10,
                                      emotion::Taxonomy::plutchik8);
    fx.split = data::make_split(src, tgt, {0.8, 0.1, 0.1}, seed ^ 0xdef);
    return fx;
}

TrainConfig small_config(model::ModelVariant variant, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.variant = variant;
    cfg.seed = seed;
    cfg.max_epochs = 6;
    cfg.max_len = 10;
    cfg.dims = kSmallDims;
    return cfg;
}

} // namespace

TEST_CASE("config validation gates the mixture weights by variant") {
    TrainConfig cfg = small_config(model::ModelVariant::stl, 1);
    cfg.alpha = 0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.alpha = 0.0;
    cfg.beta = 0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = small_config(model::ModelVariant::da_mtl_p, 1);
    cfg.alpha = 0.6;
    cfg.beta = 0.6;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.alpha = 0.3;
    cfg.beta = 0.3;
    cfg.validate();
}

TEST_CASE("paired batcher arithmetic and determinism") {
    PairedBatcher b(100, 0, 25, 7);
    CHECK(b.steps_per_epoch() == 4);
    auto epoch = b.next_epoch();
    CHECK(epoch.size() == 4);
    std::set<std::size_t> seen;
    for (auto& step : epoch) {
        CHECK(step.source.size() == 25);
        CHECK(step.target.empty());
        for (auto i : step.source) CHECK(seen.insert(i).second);
    }
    CHECK(seen.size() == 100);

    PairedBatcher b1(100, 0, 25, 9), b2(100, 0, 25, 9);
    CHECK(b1.next_epoch()[0].source == b2.next_epoch()[0].source);

    CHECK((PairedBatcher(10, 0, 3, 1).steps_per_epoch()) == 4); // ceil(10/3)
}

TEST_CASE("target set cycles with reshuffling on wraparound") {
    PairedBatcher b(100, 30, 25, 11);
    auto epoch = b.next_epoch();
    std::vector<std::size_t> drawn;
    for (auto& step : epoch) {
        CHECK(step.target.size() == step.source.size());
        drawn.insert(drawn.end(), step.target.begin(), step.target.end());
    }
    CHECK(drawn.size() == 100);
    // the first 30 draws exhaust the target set exactly once
    std::set<std::size_t> first(drawn.begin(), drawn.begin() + 30);
    CHECK(first.size() == 30);
    // after wraparound the order differs (reshuffled), but coverage repeats
    std::set<std::size_t> second(drawn.begin() + 30, drawn.begin() + 60);
    CHECK(second.size() == 30);
    CHECK(!std::equal(drawn.begin(), drawn.begin() + 30, drawn.begin() + 30));
}

TEST_CASE("training fits a separable source") {
    auto fx = make_fixture(200, 0.0, 0.9, 31);
    auto cfg = small_config(model::ModelVariant::stl, 5);
    cfg.max_epochs = 40;
    cfg.lr = 0.005; // small model, few steps per epoch
    auto result = emoda::train::train(cfg, fx.split, fx.table);
    CHECK(accuracy_against_labels(result.trained, fx.split.source_train) >= 0.9);
    CHECK(result.history.epochs.size() <= 40);
    CHECK(result.history.best_epoch >= 1);
}

TEST_CASE("train accuracy stop flag ends the run early") {
    auto fx = make_fixture(200, 0.0, 0.9, 33);
    auto cfg = small_config(model::ModelVariant::stl, 5);
    cfg.max_epochs = 80;
    cfg.lr = 0.005;
    cfg.stop_at_train_accuracy = 0.9;
    auto result = emoda::train::train(cfg, fx.split, fx.table);
    CHECK(result.history.stopped_early);
    CHECK(result.history.epochs.size() < 80);
}

TEST_CASE("restored model reproduces the recorded best validation accuracy") {
    auto fx = make_fixture(150, 0.3, 0.9, 35);
    auto cfg = small_config(model::ModelVariant::stl, 7);
    auto result = emoda::train::train(cfg, fx.split, fx.table);

    double recorded = result.history.best_val_accuracy;
    double replayed = accuracy_against_labels(result.trained, fx.split.source_val);
    CHECK(replayed == recorded);

    // early stop dominance over the final epoch
    CHECK(recorded >= result.history.epochs.back().val_accuracy);
    // the recorded best is the max over epochs
    double max_epoch = 0;
    for (auto& e : result.history.epochs) max_epoch = std::max(max_epoch, e.val_accuracy);
    CHECK(recorded == max_epoch);
}

TEST_CASE("training is deterministic: same config, same checkpoint bytes") {
    auto fx = make_fixture(120, 0.4, 0.9, 37);
    auto cfg = small_config(model::ModelVariant::da_mtl_p, 9);
    cfg.alpha = 0.2;
    cfg.beta = 0.2;
    cfg.max_epochs = 3;

    testutil::TempDir tmp;
    auto r1 = emoda::train::train(cfg, fx.split, fx.table);
    auto r2 = emoda::train::train(cfg, fx.split, fx.table);
    model::save_checkpoint(tmp.file("a.ckpt"), r1.trained);
    model::save_checkpoint(tmp.file("b.ckpt"), r2.trained);
    CHECK(testutil::read_file(tmp.file("a.ckpt")) == testutil::read_file(tmp.file("b.ckpt")));

    auto cfg2 = cfg;
    cfg2.seed = 10;
    auto r3 = emoda::train::train(cfg2, fx.split, fx.table);
    model::save_checkpoint(tmp.file("c.ckpt"), r3.trained);
    CHECK(testutil::read_file(tmp.file("a.ckpt")) != testutil::read_file(tmp.file("c.ckpt")));
}

TEST_CASE("da_mtl with zero weights walks the same trajectory as stl") {
    auto fx = make_fixture(120, 0.4, 0.9, 39);

    auto stl_cfg = small_config(model::ModelVariant::stl, 11);
    stl_cfg.max_epochs = 4;
    auto da_cfg = small_config(model::ModelVariant::da_mtl_p, 11);
    da_cfg.max_epochs = 4;
    da_cfg.alpha = 0.0;
    da_cfg.beta = 0.0;

    auto stl_run = emoda::train::train(stl_cfg, fx.split, fx.table);
    auto da_run = emoda::train::train(da_cfg, fx.split, fx.table);

    // shared parameter groups are bit-identical
    for (const char* name : {"embedding", "lstm.Wi", "lstm.Uf", "lstm.bc", "fnd.dense1.W",
                             "fnd.dense2.W", "fnd.dense2.b"}) {
        ad::Tensor<float> a, b;
        for (auto& np : stl_run.trained.named_params(true)) {
            if (np.name == name) a = np.tensor;
        }
        for (auto& np : da_run.trained.named_params(true)) {
            if (np.name == name) b = np.tensor;
        }
        REQUIRE(a.defined());
        REQUIRE(b.defined());
        CHECK(a.values() == b.values());
    }
    // and the loss histories agree on the fake-news term
    REQUIRE(stl_run.history.steps.size() == da_run.history.steps.size());
    for (std::size_t i = 0; i < stl_run.history.steps.size(); ++i) {
        CHECK(stl_run.history.steps[i].losses.l_fnd == da_run.history.steps[i].losses.l_fnd);
    }
}

TEST_CASE("pad embedding row stays zero even when the table is trainable") {
    auto fx = make_fixture(120, 0.4, 0.9, 57);
    auto cfg = small_config(model::ModelVariant::stl, 23);
    cfg.max_epochs = 3;
    cfg.embeddings_trainable = true;
    auto result = emoda::train::train(cfg, fx.split, fx.table);
    const auto& emb = result.trained.embedding;
    REQUIRE(result.trained.embedding_trainable);
    for (std::size_t c = 0; c < emb.dim(1); ++c) {
        CHECK(emb.values()[c] == 0.0f); // PAD row never receives gradient
    }
    // the unk/content rows did move
    bool moved = false;
    for (std::size_t i = 2 * emb.dim(1); i < emb.size(); ++i) {
        if (emb.values()[i] != fx.table.data[i]) moved = true;
    }
    CHECK(moved);
}

TEST_CASE("loss recomposition invariant holds at every recorded step") {
    auto fx = make_fixture(100, 0.4, 0.9, 41);
    auto cfg = small_config(model::ModelVariant::da_mtl_p, 13);
    cfg.alpha = 0.25;
    cfg.beta = 0.3;
    cfg.max_epochs = 3;
    auto result = emoda::train::train(cfg, fx.split, fx.table);
    CHECK(!result.history.steps.empty());
    for (const auto& s : result.history.steps) {
        CHECK(std::abs(s.losses.l_total - s.losses.recomposed()) <= 1e-6);
    }
}

TEST_CASE("da training without target data is a contract violation") {
    auto fx = make_fixture(100, 0.4, 0.9, 43);
    data::DatasetSplit no_target;
    no_target.source_train = fx.split.source_train;
    no_target.source_val = fx.split.source_val;
    auto cfg = small_config(model::ModelVariant::da_stl, 15);
    CHECK_THROWS_AS(emoda::train::train(cfg, no_target, fx.table), ContractError);
}

TEST_CASE("a non-finite loss aborts with the step named") {
    auto fx = make_fixture(100, 0.4, 0.9, 45);
    auto cfg = small_config(model::ModelVariant::stl, 17);
    auto table = fx.table;
    table.data[2 * table.dim] = std::numeric_limits<float>::quiet_NaN();
    try {
        emoda::train::train(cfg, fx.split, table);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}

TEST_CASE("history file is one json record per epoch") {
    auto fx = make_fixture(100, 0.4, 0.9, 47);
    auto cfg = small_config(model::ModelVariant::stl, 19);
    cfg.max_epochs = 3;
    auto result = emoda::train::train(cfg, fx.split, fx.table);
    testutil::TempDir tmp;
    write_history(tmp.file("history.jsonl"), result.history);
    auto content = testutil::read_file(tmp.file("history.jsonl"));
    CHECK(std::count(content.begin(), content.end(), '\n') == 3);
    CHECK(content.find("val_accuracy") != std::string::npos);
    CHECK(content.find("l_fnd") != std::string::npos);
}

TEST_CASE("default grid enumerations") {
    CHECK(default_grid(model::ModelVariant::da_mtl_p).size() == 25);
    CHECK(default_grid(model::ModelVariant::da_mtl_e).size() == 25);
    CHECK(default_grid(model::ModelVariant::da_stl).size() == 5); // beta pinned to 0
    CHECK(default_grid(model::ModelVariant::mtl_p).size() == 5);  // alpha pinned to 0
    CHECK(default_grid(model::ModelVariant::stl).size() == 1);
    for (auto& c : default_grid(model::ModelVariant::da_mtl_p)) {
        CHECK(c.alpha + c.beta <= 0.8 + 1e-12);
    }
}

TEST_CASE("grid winner selection: ties break to smaller alpha+beta then order") {
    std::vector<GridRecord> records{
        {0.3, 0.3, 0.80, 1},
        {0.1, 0.2, 0.80, 2},
        {0.2, 0.1, 0.80, 3}, // same sum as above, later order
        {0.4, 0.0, 0.79, 4},
    };
    CHECK(select_grid_winner(records) == 1);
    records[3].val_accuracy = 0.9;
    CHECK(select_grid_winner(records) == 3);
    CHECK_THROWS_AS(select_grid_winner({}), ConfigError);
}

TEST_CASE("single-candidate grid search returns it") {
    auto fx = make_fixture(100, 0.4, 0.9, 49);
    auto cfg = small_config(model::ModelVariant::mtl_p, 21);
    cfg.max_epochs = 2;
    std::vector<GridCandidate> grid{{0.0, 0.2}};
    auto result = grid_search(grid, cfg, fx.split, fx.table);
    CHECK(result.alpha == 0.0);
    CHECK(result.beta == 0.2);
    REQUIRE(result.records.size() == 1);
    CHECK(result.records[0].seed == cfg.seed); // base seed + candidate index 0
}
