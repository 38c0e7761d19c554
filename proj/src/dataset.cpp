#include "emoda/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "emoda/rng.hpp"

namespace emoda::data {

namespace {

int parse_label(const nlohmann::json& v, const std::string& id) {
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s == "fake") return 1;
        if (s == "real") return 0;
        throw DataError("example " + id + ": label must be \"fake\" or \"real\", got \"" + s +
                        "\"");
    }
    if (v.is_number_integer()) {
        int n = v.get<int>();
        if (n == 0 || n == 1) return n;
    }
    throw DataError("example " + id + ": unrecognized label value");
}

} // namespace

std::vector<RawDocument> read_jsonl_documents(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file " + path);
    std::vector<RawDocument> docs;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("dataset " + path + " line " + std::to_string(line_no) + ": " +
                             e.what());
        }
        RawDocument doc;
        if (!j.contains("id")) {
            throw DataError("dataset " + path + " line " + std::to_string(line_no) +
                            ": missing id");
        }
        doc.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
        if (!ids.insert(doc.id).second) {
            throw DataError("dataset " + path + ": duplicate id \"" + doc.id + "\" (line " +
                            std::to_string(line_no) + ")");
        }
        if (!j.contains("text") || !j.at("text").is_string()) {
            throw DataError("dataset " + path + ": example " + doc.id + " is missing text");
        }
        doc.text = j.at("text").get<std::string>();
        if (j.contains("label") && !j.at("label").is_null()) {
            doc.veracity = parse_label(j.at("label"), doc.id);
        }
        if (j.contains("emotion") && !j.at("emotion").is_null()) {
            doc.emotion = j.at("emotion").get<std::string>();
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

void write_jsonl_documents(const std::string& path, const std::vector<RawDocument>& docs) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset file " + path);
    for (const auto& d : docs) {
        nlohmann::json j;
        j["id"] = d.id;
        j["text"] = d.text;
        if (d.veracity) j["label"] = *d.veracity == 1 ? "fake" : "real";
        if (d.emotion) j["emotion"] = *d.emotion;
        out << j.dump() << "\n";
    }
}

std::vector<RawDocument> read_csv_documents(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open csv file " + path);

    // RFC-4180-ish parser: quoted fields may contain commas, doubled quotes
    // and newlines.
    std::vector<std::vector<std::string>> rows;
    {
        std::vector<std::string> row;
        std::string field;
        bool in_quotes = false;
        char c;
        bool any = false;
        while (in.get(c)) {
            any = true;
            if (in_quotes) {
                if (c == '"') {
                    if (in.peek() == '"') {
                        field += '"';
                        in.get();
                    } else {
                        in_quotes = false;
                    }
                } else {
                    field += c;
                }
            } else if (c == '"') {
                in_quotes = true;
            } else if (c == ',') {
                row.push_back(field);
                field.clear();
            } else if (c == '\n') {
                row.push_back(field);
                field.clear();
                rows.push_back(row);
                row.clear();
            } else if (c != '\r') {
                field += c;
            }
        }
        if (any && (!field.empty() || !row.empty())) {
            row.push_back(field);
            rows.push_back(row);
        }
    }
    if (rows.empty()) throw DataError("csv file " + path + " is empty");

    auto lower = [](std::string s) {
        for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        return s;
    };
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < rows[0].size(); ++i) col[lower(rows[0][i])] = i;
    for (const char* required : {"id", "title", "text", "label"}) {
        if (!col.count(required)) {
            throw ParseError("csv file " + path + ": missing column '" + required + "'");
        }
    }

    std::vector<RawDocument> docs;
    std::unordered_set<std::string> ids;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() < rows[0].size()) {
            throw ParseError("csv file " + path + " row " + std::to_string(r + 1) +
                             ": expected " + std::to_string(rows[0].size()) + " columns");
        }
        RawDocument doc;
        doc.id = row[col["id"]];
        if (doc.id.empty()) {
            throw DataError("csv file " + path + " row " + std::to_string(r + 1) + ": empty id");
        }
        if (!ids.insert(doc.id).second) {
            throw DataError("csv file " + path + ": duplicate id \"" + doc.id + "\"");
        }
        const std::string& title = row[col["title"]];
        const std::string& text = row[col["text"]];
        doc.text = title.empty() ? text : title + " " + text;
        std::string label = lower(row[col["label"]]);
        if (!label.empty()) {
            if (label == "fake" || label == "1") {
                doc.veracity = 1;
            } else if (label == "real" || label == "0") {
                doc.veracity = 0;
            } else {
                throw DataError("csv file " + path + ": example " + doc.id +
                                " has unrecognized label '" + label + "'");
            }
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<LabeledExample> encode_documents(const std::vector<RawDocument>& docs, Domain role,
                                             const text::Vocabulary& vocab, int max_len,
                                             std::optional<emotion::Taxonomy> taxonomy) {
    std::vector<LabeledExample> out;
    out.reserve(docs.size());
    for (const auto& doc : docs) {
        if (role == Domain::source && !doc.veracity) {
            throw DataError("source example " + doc.id + " is missing its veracity label");
        }
        auto tokens = text::tokenize(text::preprocess_text(doc.text));
        if (tokens.empty()) {
            throw DataError("example " + doc.id + " has no tokens after preprocessing");
        }
        LabeledExample ex;
        ex.id = doc.id;
        ex.domain = role;
        ex.seq = text::encode(tokens, vocab, max_len);
        if (doc.veracity) ex.set_veracity(*doc.veracity);
        // without a taxonomy (single-task use) emotion names are ignored
        if (doc.emotion && taxonomy) {
            ex.emotion = emotion::make_label(*taxonomy, *doc.emotion);
        }
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<LabeledExample> load_dataset(const std::string& path, Domain role,
                                         const text::Vocabulary& vocab, int max_len,
                                         std::optional<emotion::Taxonomy> taxonomy) {
    return encode_documents(read_jsonl_documents(path), role, vocab, max_len, taxonomy);
}

void ingest_labels(const std::string& path, emotion::Taxonomy taxonomy,
                   std::vector<LabeledExample>& examples) {
    auto entries = emotion::read_label_file(path);
    std::unordered_map<std::string, std::string> by_id;
    for (const auto& e : entries) by_id[e.id] = e.emotion;

    std::vector<std::string> missing;
    std::vector<std::string> bad_class;
    for (auto& ex : examples) {
        auto it = by_id.find(ex.id);
        if (it == by_id.end()) {
            missing.push_back(ex.id);
        } else if (!emotion::class_index(taxonomy, it->second)) {
            bad_class.push_back(ex.id + " ('" + it->second + "')");
        }
    }
    if (!missing.empty() || !bad_class.empty()) {
        std::string msg = "label ingestion from " + path + " failed:";
        if (!missing.empty()) {
            msg += " missing ids:";
            for (const auto& id : missing) msg += " " + id;
        }
        if (!bad_class.empty()) {
            msg += " invalid classes for " + std::string(emotion::taxonomy_name(taxonomy)) + ":";
            for (const auto& s : bad_class) msg += " " + s;
        }
        throw DataError(msg);
    }
    for (auto& ex : examples) ex.emotion = emotion::make_label(taxonomy, by_id[ex.id]);
}

IndexSplit split_indices(const std::vector<std::optional<int>>& veracity,
                         const SplitFractions& fractions, std::uint64_t seed) {
    double total = fractions.train + fractions.val + fractions.test;
    if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("split fractions must sum to 1, got " + std::to_string(total));
    }
    if (fractions.train < 0 || fractions.val < 0 || fractions.test < 0) {
        throw ConfigError("split fractions must be nonnegative");
    }

    // strata: unlabeled, real, fake
    std::vector<std::vector<std::size_t>> strata(3);
    for (std::size_t i = 0; i < veracity.size(); ++i) {
        if (!veracity[i]) {
            strata[0].push_back(i);
        } else {
            strata[*veracity[i] == 0 ? 1 : 2].push_back(i);
        }
    }

    Rng rng(derive_seed(seed, "split"));
    IndexSplit out;
    const double fracs[3] = {fractions.train, fractions.val, fractions.test};
    for (auto& stratum : strata) {
        if (stratum.empty()) continue;
        rng.shuffle(stratum);
        std::size_t n = stratum.size();
        // largest remainder allocation
        std::size_t counts[3];
        double rema[3];
        std::size_t assigned = 0;
        for (int k = 0; k < 3; ++k) {
            double exact = fracs[k] * static_cast<double>(n);
            counts[k] = static_cast<std::size_t>(std::floor(exact));
            rema[k] = exact - std::floor(exact);
            assigned += counts[k];
        }
        while (assigned < n) {
            int best = 0;
            for (int k = 1; k < 3; ++k)
                if (rema[k] > rema[best]) best = k;
            ++counts[best];
            rema[best] = -1;
            ++assigned;
        }
        std::size_t pos = 0;
        std::vector<std::size_t>* dests[3] = {&out.train, &out.val, &out.test};
        for (int k = 0; k < 3; ++k) {
            for (std::size_t i = 0; i < counts[k]; ++i, ++pos) {
                dests[k]->push_back(stratum[pos]);
            }
        }
    }

    auto check = [](double frac, const std::vector<std::size_t>& part, const char* name) {
        if (frac > 0 && part.empty()) {
            throw DataError(std::string("split '") + name +
                            "' would be empty; not enough examples");
        }
    };
    check(fractions.train, out.train, "train");
    check(fractions.val, out.val, "val");
    check(fractions.test, out.test, "test");
    return out;
}

ThreeWaySplit split_dataset(const std::vector<LabeledExample>& examples,
                            const SplitFractions& fractions, std::uint64_t seed) {
    std::vector<std::optional<int>> labels;
    labels.reserve(examples.size());
    for (const auto& ex : examples) {
        labels.push_back(ex.has_veracity() ? std::optional<int>(ex.veracity_for_eval())
                                           : std::nullopt);
    }
    auto idx = split_indices(labels, fractions, seed);
    ThreeWaySplit out;
    for (std::size_t i : idx.train) out.train.push_back(examples[i]);
    for (std::size_t i : idx.val) out.val.push_back(examples[i]);
    for (std::size_t i : idx.test) out.test.push_back(examples[i]);
    return out;
}

DatasetSplit make_split(const std::vector<LabeledExample>& source,
                        const std::vector<LabeledExample>& target,
                        const SplitFractions& fractions, std::uint64_t seed) {
    DatasetSplit split;
    auto s = split_dataset(source, fractions, derive_seed(seed, "source"));
    split.source_train = std::move(s.train);
    split.source_val = std::move(s.val);
    split.source_test = std::move(s.test);
    if (!target.empty()) {
        auto t = split_dataset(target, fractions, derive_seed(seed, "target"));
        split.target_train = std::move(t.train);
        split.target_val = std::move(t.val);
        split.target_test = std::move(t.test);
    }
    return split;
}

} // namespace emoda::data
