#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <nlohmann/json.hpp>

#include "emoda/dataset.hpp"
#include "emoda/emotion.hpp"
#include "emoda/experiment.hpp"
#include "emoda/gradcheck.hpp"
#include "emoda/model.hpp"
#include "emoda/text.hpp"
#include "emoda/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::optional<std::uint64_t> env_seed_override() {
    const char* v = std::getenv("EMODA_SEED");
    if (!v || !*v) return std::nullopt;
    try {
        return std::stoull(v);
    } catch (...) {
        throw emoda::UsageError("EMODA_SEED must be an unsigned integer");
    }
}

json read_json_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw emoda::IoError(std::string("cannot open ") + what + " " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw emoda::ParseError(std::string(what) + " " + path + ": " + e.what());
    }
    return j;
}

struct TrainFileConfig {
    emoda::train::TrainConfig train;
    emoda::data::SplitFractions fractions;
    std::uint64_t split_seed = 0;
    bool split_seed_set = false;
    std::string embeddings_path;
    std::string lexicon_path;
};

TrainFileConfig parse_train_config(const json& j) {
    TrainFileConfig cfg;
    auto& t = cfg.train;
    t.lr = j.value("lr", t.lr);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.max_epochs = j.value("max_epochs", t.max_epochs);
    t.alpha = j.value("alpha", t.alpha);
    t.beta = j.value("beta", t.beta);
    t.lambda = j.value("lambda", t.lambda);
    t.seed = j.value("seed", t.seed);
    t.max_len = j.value("max_len", t.max_len);
    t.min_freq = j.value("min_freq", t.min_freq);
    t.embeddings_trainable = j.value("embeddings_trainable", t.embeddings_trainable);
    t.stop_at_train_accuracy = j.value("stop_at_train_accuracy", t.stop_at_train_accuracy);
    if (j.contains("variant")) {
        t.variant = emoda::model::variant_from_name(j.at("variant").get<std::string>());
    }
    if (j.contains("hidden")) t.dims.hidden = j.at("hidden").get<std::size_t>();
    if (j.contains("embed_dim")) t.dims.embed_dim = j.at("embed_dim").get<std::size_t>();
    if (j.contains("head_hidden")) t.dims.head_hidden = j.at("head_hidden").get<std::size_t>();
    if (j.contains("fractions")) {
        const auto& f = j.at("fractions");
        cfg.fractions.train = f.value("train", cfg.fractions.train);
        cfg.fractions.val = f.value("val", cfg.fractions.val);
        cfg.fractions.test = f.value("test", cfg.fractions.test);
    }
    if (j.contains("split_seed")) {
        cfg.split_seed = j.at("split_seed").get<std::uint64_t>();
        cfg.split_seed_set = true;
    }
    cfg.embeddings_path = j.value("embeddings", std::string());
    cfg.lexicon_path = j.value("lexicon", std::string());
    return cfg;
}

int cmd_preprocess(const std::string& input, const std::string& output, int max_len,
                   int min_freq, std::string vocab_out, const std::string& embeddings_path) {
    auto docs = emoda::data::read_jsonl_documents(input);
    if (docs.empty()) throw emoda::DataError("dataset " + input + " contains no documents");

    std::vector<std::vector<std::string>> tokens;
    tokens.reserve(docs.size());
    for (const auto& d : docs) {
        tokens.push_back(emoda::text::tokenize(emoda::text::preprocess_text(d.text)));
    }
    auto vocab = emoda::text::Vocabulary::build(tokens, min_freq);

    std::size_t total_tokens = 0, unk_tokens = 0;
    std::ofstream out(output);
    if (!out) throw emoda::IoError("cannot write " + output);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (tokens[i].empty()) {
            throw emoda::DataError("example " + docs[i].id +
                                   " has no tokens after preprocessing");
        }
        auto seq = emoda::text::encode(tokens[i], vocab, max_len);
        for (std::int32_t t = 0; t < seq.true_length; ++t) {
            ++total_tokens;
            if (seq.ids[static_cast<std::size_t>(t)] == emoda::text::Vocabulary::kUnkId) {
                ++unk_tokens;
            }
        }
        json j;
        j["id"] = docs[i].id;
        j["ids"] = seq.ids;
        j["true_length"] = seq.true_length;
        if (docs[i].veracity) j["label"] = *docs[i].veracity == 1 ? "fake" : "real";
        if (docs[i].emotion) j["emotion"] = *docs[i].emotion;
        out << j.dump() << "\n";
    }
    if (vocab_out.empty()) vocab_out = output + ".vocab.json";
    vocab.save(vocab_out);

    std::cout << "encoded " << docs.size() << " documents, vocabulary " << vocab.size()
              << " tokens (min_freq " << min_freq << ")\n";
    std::cout << "unk rate: " << (total_tokens ? static_cast<double>(unk_tokens) / total_tokens
                                               : 0.0)
              << "\n";
    if (!embeddings_path.empty()) {
        auto table = emoda::text::load_embeddings(embeddings_path, vocab);
        std::cout << "embedding coverage: " << table.found << "/" << table.rows << " = "
                  << table.coverage() << "\n";
    }
    return 0;
}

int cmd_annotate(const std::string& dataset, const std::string& lexicon_path,
                 const std::string& labels_path, const std::string& taxonomy_name,
                 const std::string& output) {
    auto taxonomy = emoda::emotion::taxonomy_from_name(taxonomy_name);
    auto docs = emoda::data::read_jsonl_documents(dataset);
    if (docs.empty()) throw emoda::DataError("dataset " + dataset + " contains no documents");

    std::size_t no_hit = 0;
    if (!lexicon_path.empty()) {
        auto lexicon = emoda::emotion::EmotionLexicon::load(lexicon_path);
        for (auto& d : docs) {
            auto tokens = emoda::text::tokenize(emoda::text::preprocess_text(d.text));
            auto r = emoda::emotion::annotate(tokens, lexicon, taxonomy);
            d.emotion = r.label.class_name();
            if (r.no_lexicon_hit) ++no_hit;
        }
    } else {
        auto entries = emoda::emotion::read_label_file(labels_path);
        std::unordered_map<std::string, std::string> by_id;
        for (auto& e : entries) by_id[e.id] = e.emotion;
        std::vector<std::string> missing, bad;
        for (auto& d : docs) {
            auto it = by_id.find(d.id);
            if (it == by_id.end()) {
                missing.push_back(d.id);
            } else if (!emoda::emotion::class_index(taxonomy, it->second)) {
                bad.push_back(d.id + " ('" + it->second + "')");
            } else {
                d.emotion = it->second;
            }
        }
        if (!missing.empty() || !bad.empty()) {
            std::string msg = "label ingestion failed:";
            if (!missing.empty()) {
                msg += " missing ids:";
                for (auto& id : missing) msg += " " + id;
            }
            if (!bad.empty()) {
                msg += " invalid classes for " +
                       std::string(emoda::emotion::taxonomy_name(taxonomy)) + ":";
                for (auto& s : bad) msg += " " + s;
            }
            throw emoda::DataError(msg);
        }
    }
    emoda::data::write_jsonl_documents(output, docs);
    std::cout << "annotated " << docs.size() << " documents under "
              << emoda::emotion::taxonomy_name(taxonomy) << "; no_lexicon_hit " << no_hit
              << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& source_path,
              const std::string& target_path, const std::string& variant_name,
              const std::string& out_dir) {
    TrainFileConfig cfg;
    if (!config_path.empty()) cfg = parse_train_config(read_json_file(config_path, "config"));
    if (!variant_name.empty()) {
        cfg.train.variant = emoda::model::variant_from_name(variant_name);
    }
    if (auto seed = env_seed_override()) cfg.train.seed = *seed;
    if (!cfg.split_seed_set) cfg.split_seed = cfg.train.seed;

    const bool needs_target = emoda::model::uses_discriminator(cfg.train.variant);
    if (needs_target && target_path.empty()) {
        throw emoda::UsageError("variant " +
                                std::string(emoda::model::variant_display_name(
                                    cfg.train.variant)) +
                                " requires --target");
    }
    cfg.train.validate();

    auto source_docs = emoda::data::read_jsonl_documents(source_path);
    std::vector<emoda::data::RawDocument> target_docs;
    if (!target_path.empty()) target_docs = emoda::data::read_jsonl_documents(target_path);

    auto tokenize_all = [](const std::vector<emoda::data::RawDocument>& docs) {
        std::vector<std::vector<std::string>> out;
        out.reserve(docs.size());
        for (const auto& d : docs) {
            out.push_back(emoda::text::tokenize(emoda::text::preprocess_text(d.text)));
        }
        return out;
    };
    auto source_tokens = tokenize_all(source_docs);
    auto target_tokens = tokenize_all(target_docs);

    std::vector<std::optional<int>> src_labels, tgt_labels;
    for (auto& d : source_docs) src_labels.push_back(d.veracity);
    for (auto& d : target_docs) tgt_labels.push_back(d.veracity);
    auto src_idx = emoda::data::split_indices(src_labels, cfg.fractions,
                                              emoda::derive_seed(cfg.split_seed, "source"));
    emoda::data::IndexSplit tgt_idx;
    if (!target_docs.empty()) {
        tgt_idx = emoda::data::split_indices(tgt_labels, cfg.fractions,
                                             emoda::derive_seed(cfg.split_seed, "target"));
    }

    std::vector<std::vector<std::string>> train_tokens;
    for (auto i : src_idx.train) train_tokens.push_back(source_tokens[i]);
    for (auto i : tgt_idx.train) train_tokens.push_back(target_tokens[i]);
    auto vocab = emoda::text::Vocabulary::build(train_tokens, cfg.train.min_freq);

    emoda::text::EmbeddingTable table;
    if (cfg.embeddings_path.empty()) {
        table = emoda::text::random_embeddings(vocab, cfg.train.dims.embed_dim,
                                               emoda::derive_seed(cfg.split_seed,
                                                                  "embeddings"));
    } else {
        table = emoda::text::load_embeddings(cfg.embeddings_path, vocab,
                                             cfg.train.dims.embed_dim);
        std::cout << "embedding coverage: " << table.found << "/" << table.rows << "\n";
    }

    auto taxonomy = emoda::model::variant_taxonomy(cfg.train.variant);
    std::optional<emoda::emotion::EmotionLexicon> lexicon;
    if (taxonomy && !cfg.lexicon_path.empty()) {
        lexicon = emoda::emotion::EmotionLexicon::load(cfg.lexicon_path);
    }

    auto encode_part = [&](const std::vector<emoda::data::RawDocument>& docs,
                           const std::vector<std::vector<std::string>>& tokens,
                           const std::vector<std::size_t>& idx, emoda::data::Domain domain) {
        std::vector<emoda::data::LabeledExample> out;
        for (auto i : idx) {
            const auto& doc = docs[i];
            if (tokens[i].empty()) {
                throw emoda::DataError("example " + doc.id +
                                       " has no tokens after preprocessing");
            }
            emoda::data::LabeledExample ex;
            ex.id = doc.id;
            ex.domain = domain;
            ex.seq = emoda::text::encode(tokens[i], vocab, cfg.train.max_len);
            if (doc.veracity) ex.set_veracity(*doc.veracity);
            if (domain == emoda::data::Domain::source && !doc.veracity) {
                throw emoda::DataError("source example " + doc.id +
                                       " is missing its veracity label");
            }
            if (taxonomy) {
                if (doc.emotion) {
                    ex.emotion = emoda::emotion::make_label(*taxonomy, *doc.emotion);
                } else if (lexicon) {
                    auto r = emoda::emotion::annotate(tokens[i], *lexicon, *taxonomy);
                    ex.emotion = r.label;
                    ex.no_lexicon_hit = r.no_lexicon_hit;
                } else {
                    throw emoda::DataError("example " + doc.id +
                                           " has no emotion label; provide lexicon or labels");
                }
            }
            out.push_back(std::move(ex));
        }
        return out;
    };

    emoda::data::DatasetSplit split;
    split.source_train =
        encode_part(source_docs, source_tokens, src_idx.train, emoda::data::Domain::source);
    split.source_val =
        encode_part(source_docs, source_tokens, src_idx.val, emoda::data::Domain::source);
    split.source_test =
        encode_part(source_docs, source_tokens, src_idx.test, emoda::data::Domain::source);
    if (!target_docs.empty()) {
        split.target_train =
            encode_part(target_docs, target_tokens, tgt_idx.train, emoda::data::Domain::target);
        split.target_test =
            encode_part(target_docs, target_tokens, tgt_idx.test, emoda::data::Domain::target);
    }

    auto result = emoda::train::train(cfg.train, split, table);

    fs::create_directories(out_dir);
    auto checkpoint_path = (fs::path(out_dir) / "checkpoint.bin").string();
    auto history_path = (fs::path(out_dir) / "history.jsonl").string();
    emoda::model::save_checkpoint(checkpoint_path, result.trained);
    emoda::train::write_history(history_path, result.history);
    vocab.save((fs::path(out_dir) / "vocab.json").string());

    std::cout << "trained " << emoda::model::variant_display_name(cfg.train.variant)
              << ": best epoch " << result.history.best_epoch << ", val accuracy "
              << result.history.best_val_accuracy << "\n";
    std::cout << "checkpoint: " << checkpoint_path << "\n";
    return 0;
}

int cmd_run_matrix(const std::string& config_path, const std::string& out_dir) {
    auto cfg = emoda::experiment::load_matrix_config(config_path);
    if (auto seed = env_seed_override()) {
        cfg.base.seed = *seed;
        if (cfg.seeds.empty()) cfg.seeds.push_back(*seed);
    }
    fs::create_directories(out_dir);
    auto results_path = (fs::path(out_dir) / "results.jsonl").string();
    auto run = emoda::experiment::run_matrix(cfg, results_path);

    if (!run.records.empty()) {
        auto report = emoda::experiment::render_report(run.records);
        std::cout << report;
        std::ofstream rj((fs::path(out_dir) / "report.json").string());
        rj << emoda::experiment::report_json(run.records).dump(2) << "\n";
    }
    for (const auto& f : run.failures) {
        std::cerr << "cell failed: " << f.source << " -> " << f.target << " [" << f.setting
                  << "] seed " << f.seed << ": " << f.error << "\n";
    }
    std::cout << "executed " << run.executed << " cells, " << run.records.size()
              << " records total, " << run.failures.size() << " failures\n";
    return run.failures.empty() ? 0 : 2;
}

int cmd_gradcheck(int precision, int trials, int coords, std::uint64_t seed) {
    if (precision != 64) {
        throw emoda::UsageError("gradcheck supports --precision 64 only");
    }
    emoda::gradcheck::GradcheckOptions opt;
    opt.trials = trials;
    opt.coords_per_tensor = coords;
    opt.seed = seed;
    if (auto s = env_seed_override()) opt.seed = *s;
    auto outcome = emoda::gradcheck::run_gradcheck(opt);
    std::cout << "gradcheck: " << outcome.coordinates_checked << " coordinates, max rel err "
              << outcome.max_rel_err << ", " << outcome.seconds << "s\n";
    for (const auto& f : outcome.failures) std::cout << "  FAIL " << f << "\n";
    if (!outcome.passed) {
        std::cout << "gradcheck FAILED\n";
        return 3;
    }
    std::cout << "gradcheck passed\n";
    return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
    auto j = read_json_file(spec_path, "synthetic spec");
    auto spec = emoda::experiment::synthetic_spec_from_json(j);
    if (auto s = env_seed_override()) spec.seed = *s;
    auto corpus = emoda::data::make_synthetic_corpus(spec);
    fs::create_directories(out_dir);
    emoda::data::write_jsonl_documents((fs::path(out_dir) / "source.jsonl").string(),
                                       corpus.source);
    emoda::data::write_jsonl_documents((fs::path(out_dir) / "target.jsonl").string(),
                                       corpus.target);
    std::cout << "wrote " << corpus.source.size() << " source and " << corpus.target.size()
              << " target documents to " << out_dir << "\n";
    return 0;
}

int cmd_ingest_csv(const std::string& input, const std::string& output) {
    auto docs = emoda::data::read_csv_documents(input);
    emoda::data::write_jsonl_documents(output, docs);
    std::cout << "converted " << docs.size() << " rows\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"emotion-guided domain-adaptive fake news detection"};
    app.require_subcommand(1);

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "normalize, tokenize and encode a dataset");
    std::string pre_in, pre_out, pre_vocab, pre_emb;
    int pre_max_len = 200, pre_min_freq = 1;
    pre->add_option("--input", pre_in)->required();
    pre->add_option("--output", pre_out)->required();
    pre->add_option("--max-len", pre_max_len);
    pre->add_option("--min-freq", pre_min_freq);
    pre->add_option("--vocab-output", pre_vocab);
    pre->add_option("--embeddings", pre_emb);

    // annotate
    auto* ann = app.add_subcommand("annotate", "attach emotion labels via lexicon or file");
    std::string ann_dataset, ann_lexicon, ann_labels, ann_taxonomy, ann_out;
    ann->add_option("--dataset", ann_dataset)->required();
    ann->add_option("--lexicon", ann_lexicon);
    ann->add_option("--labels", ann_labels);
    ann->add_option("--taxonomy", ann_taxonomy)->required();
    ann->add_option("--output", ann_out)->required();

    // train
    auto* tr = app.add_subcommand("train", "train one model variant");
    std::string tr_config, tr_source, tr_target, tr_variant, tr_out;
    tr->add_option("--config", tr_config);
    tr->add_option("--source", tr_source)->required();
    tr->add_option("--target", tr_target);
    tr->add_option("--variant", tr_variant);
    tr->add_option("--out", tr_out)->required();

    // run-matrix
    auto* mx = app.add_subcommand("run-matrix", "run the cross-domain experiment matrix");
    std::string mx_config, mx_out;
    mx->add_option("--matrix-config", mx_config)->required();
    mx->add_option("--out-dir", mx_out)->required();

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    int gc_precision = 64, gc_trials = 20, gc_coords = 4;
    std::uint64_t gc_seed = 0x9c0ffee;
    gc->add_option("--precision", gc_precision);
    gc->add_option("--trials", gc_trials);
    gc->add_option("--coords", gc_coords);
    gc->add_option("--seed", gc_seed);

    // synth
    auto* sy = app.add_subcommand("synth", "generate a synthetic source/target pair");
    std::string sy_spec, sy_out;
    sy->add_option("--spec", sy_spec)->required();
    sy->add_option("--out", sy_out)->required();

    // ingest-csv
    auto* ic = app.add_subcommand("ingest-csv", "convert a (id,title,text,label) csv");
    std::string ic_in, ic_out;
    ic->add_option("--input", ic_in)->required();
    ic->add_option("--output", ic_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return 1;
    }

    try {
        if (pre->parsed()) {
            return cmd_preprocess(pre_in, pre_out, pre_max_len, pre_min_freq, pre_vocab,
                                  pre_emb);
        }
        if (ann->parsed()) {
            if (ann_lexicon.empty() == ann_labels.empty()) {
                throw emoda::UsageError("annotate requires exactly one of --lexicon/--labels");
            }
            return cmd_annotate(ann_dataset, ann_lexicon, ann_labels, ann_taxonomy, ann_out);
        }
        if (tr->parsed()) return cmd_train(tr_config, tr_source, tr_target, tr_variant, tr_out);
        if (mx->parsed()) return cmd_run_matrix(mx_config, mx_out);
        if (gc->parsed()) return cmd_gradcheck(gc_precision, gc_trials, gc_coords, gc_seed);
        if (sy->parsed()) return cmd_synth(sy_spec, sy_out);
        if (ic->parsed()) return cmd_ingest_csv(ic_in, ic_out);
        throw emoda::UsageError("no subcommand given");
    } catch (const emoda::Error& e) {
        std::cerr << "emoda: error[" << e.kind_name() << "]: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "emoda: error[internal]: " << e.what() << "\n";
        return 2;
    }
}
