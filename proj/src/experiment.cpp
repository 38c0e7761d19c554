#include "emoda/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "emoda/rng.hpp"

namespace emoda::experiment {

double evaluate_accuracy(const model::Model<train::real>& m,
                         std::span<const data::LabeledExample> examples) {
    return train::accuracy_against_labels(m, examples);
}

nlohmann::json record_to_json(const ResultRecord& r) {
    nlohmann::json j;
    j["source"] = r.source;
    j["target"] = r.target;
    j["setting"] = r.setting;
    j["accuracy"] = r.accuracy;
    j["seed"] = r.seed;
    j["config_hash"] = r.config_hash;
    return j;
}

ResultRecord record_from_json(const nlohmann::json& j) {
    ResultRecord r;
    r.source = j.at("source").get<std::string>();
    r.target = j.at("target").get<std::string>();
    r.setting = j.at("setting").get<std::string>();
    r.accuracy = j.at("accuracy").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    return r;
}

std::vector<ResultRecord> read_results_file(const std::string& path) {
    std::ifstream in(path);
    std::vector<ResultRecord> records;
    if (!in) return records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            records.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("results file " + path + " line " + std::to_string(line_no) +
                             ": " + e.what());
        }
    }
    return records;
}

void MatrixConfig::validate() const {
    if (pairs.empty()) throw ConfigError("matrix config declares no dataset pairs");
    if (settings.empty()) throw ConfigError("matrix config declares no settings");
    std::set<std::string> known;
    for (const auto& [name, path] : dataset_paths) known.insert(name);
    for (const auto& sp : synthetic_pairs) {
        known.insert(sp.source_name);
        known.insert(sp.target_name);
        sp.spec.validate();
    }
    for (const auto& [s, t] : pairs) {
        if (!known.count(s)) throw ConfigError("pair references unknown dataset '" + s + "'");
        if (!known.count(t)) throw ConfigError("pair references unknown dataset '" + t + "'");
        if (s == t) throw ConfigError("source and target must differ, got '" + s + "' twice");
    }
}

namespace {

model::ModelVariant setting_from_json(const nlohmann::json& j) {
    return model::variant_from_name(j.get<std::string>());
}

} // namespace

data::SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
    data::SyntheticSpec spec;
    if (!j.contains("seed")) throw ConfigError("synthetic spec: seed is mandatory");
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.seed_set = true;
    spec.n_source = j.value("n_source", spec.n_source);
    spec.n_target = j.value("n_target", spec.n_target);
    spec.rho = j.value("rho", spec.rho);
    spec.shift = j.value("shift", spec.shift);
    spec.class_balance = j.value("class_balance", spec.class_balance);
    spec.class_tokens_per_class = j.value("class_tokens_per_class", spec.class_tokens_per_class);
    spec.emotion_tokens_per_class =
        j.value("emotion_tokens_per_class", spec.emotion_tokens_per_class);
    spec.background_tokens = j.value("background_tokens", spec.background_tokens);
    spec.doc_len_min = j.value("doc_len_min", spec.doc_len_min);
    spec.doc_len_max = j.value("doc_len_max", spec.doc_len_max);
    spec.p_class = j.value("p_class", spec.p_class);
    spec.p_emotion = j.value("p_emotion", spec.p_emotion);
    if (j.contains("taxonomy")) {
        spec.taxonomy = emotion::taxonomy_from_name(j.at("taxonomy").get<std::string>());
    }
    spec.validate();
    return spec;
}

namespace {

std::string canonical_spec_string(const data::SyntheticSpec& s) {
    std::ostringstream os;
    os << "synth:" << s.n_source << ":" << s.n_target << ":" << s.seed << ":" << s.rho << ":"
       << s.shift << ":" << s.class_balance << ":" << s.class_tokens_per_class << ":"
       << s.emotion_tokens_per_class << ":" << s.background_tokens << ":" << s.doc_len_min
       << ":" << s.doc_len_max << ":" << s.p_class << ":" << s.p_emotion << ":"
       << emotion::taxonomy_name(s.taxonomy);
    return os.str();
}

} // namespace

MatrixConfig matrix_config_from_json(const nlohmann::json& j) {
    MatrixConfig cfg;
    if (j.contains("datasets")) {
        for (auto& [name, entry] : j.at("datasets").items()) {
            cfg.dataset_paths[name] = entry.at("path").get<std::string>();
        }
    }
    if (j.contains("synthetic_pairs")) {
        for (const auto& sp : j.at("synthetic_pairs")) {
            MatrixConfig::SyntheticPair pair;
            pair.source_name = sp.at("source").get<std::string>();
            pair.target_name = sp.at("target").get<std::string>();
            pair.spec = synthetic_spec_from_json(sp.at("spec"));
            cfg.synthetic_pairs.push_back(std::move(pair));
        }
    }
    for (const auto& p : j.at("pairs")) {
        cfg.pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    }
    if (j.contains("settings")) {
        for (const auto& s : j.at("settings")) cfg.settings.push_back(setting_from_json(s));
    } else {
        cfg.settings = model::all_variants();
    }

    const auto& t = j.value("train", nlohmann::json::object());
    cfg.base.lr = t.value("lr", cfg.base.lr);
    cfg.base.batch_size = t.value("batch_size", cfg.base.batch_size);
    cfg.base.max_epochs = t.value("max_epochs", cfg.base.max_epochs);
    cfg.base.alpha = t.value("alpha", cfg.base.alpha);
    cfg.base.beta = t.value("beta", cfg.base.beta);
    cfg.base.lambda = t.value("lambda", cfg.base.lambda);
    cfg.base.seed = t.value("seed", cfg.base.seed);
    cfg.base.max_len = t.value("max_len", cfg.base.max_len);
    cfg.base.min_freq = t.value("min_freq", cfg.base.min_freq);
    cfg.base.embeddings_trainable =
        t.value("embeddings_trainable", cfg.base.embeddings_trainable);
    if (t.contains("hidden")) cfg.base.dims.hidden = t.at("hidden").get<std::size_t>();
    if (t.contains("embed_dim")) cfg.base.dims.embed_dim = t.at("embed_dim").get<std::size_t>();
    if (t.contains("head_hidden")) {
        cfg.base.dims.head_hidden = t.at("head_hidden").get<std::size_t>();
    }

    if (j.contains("seeds")) {
        for (const auto& s : j.at("seeds")) cfg.seeds.push_back(s.get<std::uint64_t>());
    }
    if (j.contains("fractions")) {
        const auto& f = j.at("fractions");
        cfg.fractions.train = f.value("train", cfg.fractions.train);
        cfg.fractions.val = f.value("val", cfg.fractions.val);
        cfg.fractions.test = f.value("test", cfg.fractions.test);
    }
    cfg.split_seed = j.value("split_seed", cfg.base.seed);
    cfg.embeddings_path = j.value("embeddings", std::string());
    cfg.lexicon_path = j.value("lexicon", std::string());
    cfg.grid = j.value("grid", false);
    if (j.contains("overrides")) {
        for (const auto& o : j.at("overrides")) {
            CellOverride ov;
            ov.source = o.value("source", std::string());
            ov.target = o.value("target", std::string());
            ov.setting = o.value("setting", std::string());
            if (o.contains("alpha")) ov.alpha = o.at("alpha").get<double>();
            if (o.contains("beta")) ov.beta = o.at("beta").get<double>();
            if (o.contains("lambda")) ov.lambda = o.at("lambda").get<double>();
            if (o.contains("lr")) ov.lr = o.at("lr").get<double>();
            if (o.contains("max_epochs")) ov.max_epochs = o.at("max_epochs").get<int>();
            cfg.overrides.push_back(std::move(ov));
        }
    }
    cfg.validate();
    return cfg;
}

MatrixConfig load_matrix_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open matrix config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("matrix config " + path + ": " + e.what());
    }
    return matrix_config_from_json(j);
}

namespace {

struct PreparedDataset {
    std::vector<data::RawDocument> docs;
    std::vector<std::vector<std::string>> tokens; // parallel to docs
    std::string identity;                         // path or canonical synth spec
};

} // namespace

double median(std::vector<double> values) {
    if (values.empty()) throw DataError("median of an empty set");
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

std::string format_accuracy(double accuracy) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", accuracy);
    return buf;
}

const std::vector<std::string>& canonical_setting_order() {
    static const std::vector<std::string> order = {"STL",    "MTL(E)",    "MTL(P)",
                                                   "DA STL", "DA MTL(E)", "DA MTL(P)"};
    return order;
}

} // namespace

std::string render_report(std::span<const ResultRecord> records) {
    if (records.empty()) throw DataError("cannot render a report from zero records");

    // groups in first-appearance order
    std::vector<std::pair<std::string, std::string>> groups;
    for (const auto& r : records) {
        std::pair<std::string, std::string> key{r.source, r.target};
        if (std::find(groups.begin(), groups.end(), key) == groups.end()) {
            groups.push_back(key);
        }
    }

    std::ostringstream os;
    os << "Source        Target        Setting     Accuracy\n";
    os << "------------------------------------------------\n";
    for (const auto& [src, tgt] : groups) {
        struct Row {
            std::string setting;
            double accuracy;
        };
        std::vector<Row> rows;
        for (const auto& setting : canonical_setting_order()) {
            std::vector<double> accs;
            for (const auto& r : records) {
                if (r.source == src && r.target == tgt && r.setting == setting) {
                    accs.push_back(r.accuracy);
                }
            }
            if (!accs.empty()) rows.push_back({setting, median(accs)});
        }
        double best = 0.0;
        for (const auto& row : rows) best = std::max(best, row.accuracy);
        auto pad = [](const std::string& s, std::size_t width) {
            return s + std::string(s.size() < width ? width - s.size() : 1, ' ');
        };
        for (std::size_t i = 0; i < rows.size(); ++i) {
            os << pad(i == 0 ? src : std::string(), 14);
            os << pad(i == 0 ? tgt : std::string(), 14);
            os << pad(rows[i].setting, 12);
            os << format_accuracy(rows[i].accuracy);
            if (format_accuracy(rows[i].accuracy) == format_accuracy(best)) os << " *";
            os << "\n";
        }
        os << "\n";
    }
    return os.str();
}

nlohmann::json report_json(std::span<const ResultRecord> records) {
    nlohmann::json j;
    j["records"] = nlohmann::json::array();
    for (const auto& r : records) j["records"].push_back(record_to_json(r));

    nlohmann::json groups = nlohmann::json::array();
    std::vector<std::pair<std::string, std::string>> seen;
    for (const auto& r : records) {
        std::pair<std::string, std::string> key{r.source, r.target};
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
        seen.push_back(key);
        nlohmann::json group;
        group["source"] = key.first;
        group["target"] = key.second;
        nlohmann::json rows = nlohmann::json::array();
        double best = 0.0;
        std::vector<std::pair<std::string, double>> medians;
        for (const auto& setting : canonical_setting_order()) {
            std::vector<double> accs;
            for (const auto& r2 : records) {
                if (r2.source == key.first && r2.target == key.second &&
                    r2.setting == setting) {
                    accs.push_back(r2.accuracy);
                }
            }
            if (accs.empty()) continue;
            double med = median(accs);
            best = std::max(best, med);
            medians.emplace_back(setting, med);
        }
        for (auto& [setting, med] : medians) {
            nlohmann::json row;
            row["setting"] = setting;
            row["accuracy"] = med;
            row["best"] = format_accuracy(med) == format_accuracy(best);
            rows.push_back(row);
        }
        group["rows"] = rows;
        groups.push_back(group);
    }
    j["groups"] = groups;
    return j;
}

namespace {

std::string cell_hash(const MatrixConfig& cfg, const std::string& src_id,
                      const std::string& tgt_id, const std::string& src_name,
                      const std::string& tgt_name, const train::TrainConfig& tc,
                      model::ModelVariant setting) {
    std::ostringstream os;
    os << src_name << "|" << tgt_name << "|" << src_id << "|" << tgt_id << "|"
       << model::variant_display_name(setting) << "|" << tc.seed << "|" << tc.lr << "|"
       << tc.batch_size << "|" << tc.max_epochs << "|" << tc.alpha << "|" << tc.beta << "|"
       << tc.lambda << "|" << tc.max_len << "|" << tc.min_freq << "|"
       << tc.embeddings_trainable << "|" << tc.dims.embed_dim << "|" << tc.dims.hidden << "|"
       << tc.dims.head_hidden << "|" << cfg.fractions.train << "|" << cfg.fractions.val << "|"
       << cfg.fractions.test << "|" << cfg.split_seed << "|"
       << (cfg.embeddings_path.empty() ? "random" : cfg.embeddings_path) << "|"
       << cfg.lexicon_path << "|" << (cfg.grid ? "grid" : "fixed");
    std::uint64_t h = fnv1a64(os.str());
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace

MatrixRunResult run_matrix(const MatrixConfig& config, const std::string& results_path) {
    config.validate();

    // materialize all datasets
    std::map<std::string, PreparedDataset> datasets;
    for (const auto& [name, path] : config.dataset_paths) {
        PreparedDataset ds;
        ds.docs = data::read_jsonl_documents(path);
        ds.identity = path;
        datasets.emplace(name, std::move(ds));
    }
    for (const auto& sp : config.synthetic_pairs) {
        auto corpus = data::make_synthetic_corpus(sp.spec);
        PreparedDataset s, t;
        s.docs = std::move(corpus.source);
        t.docs = std::move(corpus.target);
        s.identity = canonical_spec_string(sp.spec) + ":source";
        t.identity = canonical_spec_string(sp.spec) + ":target";
        datasets.emplace(sp.source_name, std::move(s));
        datasets.emplace(sp.target_name, std::move(t));
    }
    for (auto& [name, ds] : datasets) {
        if (ds.docs.empty()) throw DataError("dataset '" + name + "' is empty");
        ds.tokens.reserve(ds.docs.size());
        for (const auto& doc : ds.docs) {
            ds.tokens.push_back(text::tokenize(text::preprocess_text(doc.text)));
        }
    }

    std::optional<emotion::EmotionLexicon> lexicon;
    if (!config.lexicon_path.empty()) {
        lexicon = emotion::EmotionLexicon::load(config.lexicon_path);
    }

    auto done = read_results_file(results_path);
    std::set<std::string> done_hashes;
    for (const auto& r : done) done_hashes.insert(r.config_hash);

    std::ofstream out(results_path, std::ios::app);
    if (!out) throw IoError("cannot open results file " + results_path + " for writing");

    std::vector<std::uint64_t> seeds = config.seeds;
    if (seeds.empty()) seeds.push_back(config.base.seed);

    MatrixRunResult result;
    result.records = done;

    for (const auto& [src_name, tgt_name] : config.pairs) {
        const auto& src_ds = datasets.at(src_name);
        const auto& tgt_ds = datasets.at(tgt_name);

        // split indices once per pair (shared by every setting and seed)
        std::vector<std::optional<int>> src_labels, tgt_labels;
        for (const auto& d : src_ds.docs) src_labels.push_back(d.veracity);
        for (const auto& d : tgt_ds.docs) tgt_labels.push_back(d.veracity);
        auto src_idx = data::split_indices(src_labels, config.fractions,
                                           derive_seed(config.split_seed, "source"));
        auto tgt_idx = data::split_indices(tgt_labels, config.fractions,
                                           derive_seed(config.split_seed, "target"));

        // vocabulary from the training halves of both domains
        std::vector<std::vector<std::string>> train_tokens;
        for (std::size_t i : src_idx.train) train_tokens.push_back(src_ds.tokens[i]);
        for (std::size_t i : tgt_idx.train) train_tokens.push_back(tgt_ds.tokens[i]);
        auto vocab = text::Vocabulary::build(train_tokens, config.base.min_freq);

        text::EmbeddingTable table;
        if (config.embeddings_path.empty()) {
            table = text::random_embeddings(vocab, config.base.dims.embed_dim,
                                            derive_seed(config.split_seed, "embeddings"));
        } else {
            table = text::load_embeddings(config.embeddings_path, vocab,
                                          config.base.dims.embed_dim);
        }

        for (const auto setting : config.settings) {
            auto taxonomy = model::variant_taxonomy(setting);

            // per-setting encoding: emotion labels resolve against the
            // variant's taxonomy (absent for single-task settings)
            auto encode_part = [&](const PreparedDataset& ds,
                                   const std::vector<std::size_t>& idx, data::Domain domain) {
                std::vector<data::LabeledExample> out;
                out.reserve(idx.size());
                for (std::size_t i : idx) {
                    const auto& doc = ds.docs[i];
                    const auto& tokens = ds.tokens[i];
                    if (tokens.empty()) {
                        throw DataError("example " + doc.id +
                                        " has no tokens after preprocessing");
                    }
                    data::LabeledExample ex;
                    ex.id = doc.id;
                    ex.domain = domain;
                    ex.seq = text::encode(tokens, vocab, config.base.max_len);
                    if (doc.veracity) ex.set_veracity(*doc.veracity);
                    if (taxonomy) {
                        if (doc.emotion) {
                            ex.emotion = emotion::make_label(*taxonomy, *doc.emotion);
                        } else if (lexicon) {
                            auto ann = emotion::annotate(tokens, *lexicon, *taxonomy);
                            ex.emotion = ann.label;
                            ex.no_lexicon_hit = ann.no_lexicon_hit;
                        } else {
                            throw DataError("example " + doc.id +
                                            " has no emotion label and no lexicon was given");
                        }
                    }
                    out.push_back(std::move(ex));
                }
                return out;
            };

            data::DatasetSplit split;
            try {
                split.source_train = encode_part(src_ds, src_idx.train, data::Domain::source);
                split.source_val = encode_part(src_ds, src_idx.val, data::Domain::source);
                split.source_test = encode_part(src_ds, src_idx.test, data::Domain::source);
                split.target_train = encode_part(tgt_ds, tgt_idx.train, data::Domain::target);
                split.target_test = encode_part(tgt_ds, tgt_idx.test, data::Domain::target);
            } catch (const Error& e) {
                for (std::uint64_t seed : seeds) {
                    result.failures.push_back({src_name, tgt_name,
                                               model::variant_display_name(setting), seed,
                                               e.what()});
                }
                continue;
            }

            for (std::uint64_t seed : seeds) {
                train::TrainConfig tc = config.base;
                tc.variant = setting;
                tc.seed = seed;
                // gate the mixture weights by what the variant uses
                if (!model::uses_discriminator(setting)) tc.alpha = 0.0;
                if (!model::uses_emotion(setting)) tc.beta = 0.0;
                for (const auto& ov : config.overrides) {
                    if (!ov.source.empty() && ov.source != src_name) continue;
                    if (!ov.target.empty() && ov.target != tgt_name) continue;
                    if (!ov.setting.empty() &&
                        model::variant_from_name(ov.setting) != setting) {
                        continue;
                    }
                    if (ov.alpha) tc.alpha = *ov.alpha;
                    if (ov.beta) tc.beta = *ov.beta;
                    if (ov.lambda) tc.lambda = *ov.lambda;
                    if (ov.lr) tc.lr = *ov.lr;
                    if (ov.max_epochs) tc.max_epochs = *ov.max_epochs;
                }

                std::string hash = cell_hash(config, src_ds.identity, tgt_ds.identity,
                                             src_name, tgt_name, tc, setting);
                if (done_hashes.count(hash)) continue;

                try {
                    if (config.grid) {
                        auto grid = train::default_grid(setting);
                        auto best = train::grid_search(grid, tc, split, table);
                        tc.alpha = best.alpha;
                        tc.beta = best.beta;
                    }
                    auto run = train::train(tc, split, table);
                    ResultRecord record;
                    record.source = src_name;
                    record.target = tgt_name;
                    record.setting = model::variant_display_name(setting);
                    record.accuracy = evaluate_accuracy(run.trained, split.target_test);
                    record.seed = seed;
                    record.config_hash = hash;

                    out << record_to_json(record).dump() << "\n";
                    out.flush();
                    result.records.push_back(record);
                    ++result.executed;
                } catch (const Error& e) {
                    // the cell stays absent from the results file so a later
                    // run retries it
                    result.failures.push_back({src_name, tgt_name,
                                               model::variant_display_name(setting), seed,
                                               e.what()});
                }
            }
        }
    }
    return result;
}

} // namespace emoda::experiment
