#include "emoda/emotion.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <nlohmann/json.hpp>

namespace emoda::emotion {

namespace {

const std::vector<std::string> kEkman6 = {"joy", "surprise", "anger",
                                          "sadness", "disgust", "fear"};
const std::vector<std::string> kPlutchik8 = {"joy",          "surprise", "trust",
                                             "anger",        "anticipation", "sadness",
                                             "disgust",      "fear"};

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

} // namespace

const std::vector<std::string>& taxonomy_classes(Taxonomy t) {
    return t == Taxonomy::ekman6 ? kEkman6 : kPlutchik8;
}

int taxonomy_size(Taxonomy t) {
    return static_cast<int>(taxonomy_classes(t).size());
}

const char* taxonomy_name(Taxonomy t) {
    return t == Taxonomy::ekman6 ? "ekman6" : "plutchik8";
}

Taxonomy taxonomy_from_name(const std::string& name) {
    std::string n = lower(name);
    if (n == "ekman6" || n == "ekman") return Taxonomy::ekman6;
    if (n == "plutchik8" || n == "plutchik") return Taxonomy::plutchik8;
    throw ConfigError("unknown taxonomy '" + name + "' (expected ekman6 or plutchik8)");
}

std::optional<int> class_index(Taxonomy t, const std::string& cls) {
    const auto& classes = taxonomy_classes(t);
    auto it = std::find(classes.begin(), classes.end(), cls);
    if (it == classes.end()) return std::nullopt;
    return static_cast<int>(it - classes.begin());
}

EmotionLabel make_label(Taxonomy t, const std::string& cls) {
    auto idx = class_index(t, cls);
    if (!idx) {
        throw DataError("emotion class '" + cls + "' is not part of taxonomy " +
                        taxonomy_name(t));
    }
    return EmotionLabel{*idx, t};
}

EmotionLexicon EmotionLexicon::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open lexicon file " + path);
    EmotionLexicon lex;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
            throw ParseError("lexicon " + path + " line " + std::to_string(line_no) +
                             ": expected word<TAB>emotion");
        }
        std::string word = lower(line.substr(0, tab));
        std::string cls = lower(line.substr(tab + 1));
        auto idx = class_index(Taxonomy::plutchik8, cls);
        if (!idx) {
            throw ParseError("lexicon " + path + " line " + std::to_string(line_no) +
                             ": '" + cls + "' is not a plutchik8 emotion class");
        }
        lex.word_mask_[word] |= static_cast<std::uint8_t>(1u << *idx);
    }
    return lex;
}

void EmotionLexicon::add(const std::string& word, const std::string& emotion_class) {
    auto idx = class_index(Taxonomy::plutchik8, lower(emotion_class));
    if (!idx) {
        throw DataError("emotion class '" + emotion_class + "' is not a plutchik8 class");
    }
    word_mask_[lower(word)] |= static_cast<std::uint8_t>(1u << *idx);
}

std::uint8_t EmotionLexicon::mask_of(const std::string& word) const {
    auto it = word_mask_.find(word);
    return it == word_mask_.end() ? 0 : it->second;
}

AnnotationResult annotate(const std::vector<std::string>& tokens, const EmotionLexicon& lexicon,
                          Taxonomy taxonomy) {
    const auto& classes = taxonomy_classes(taxonomy);
    // taxonomy class index for each plutchik8 bit, -1 when outside
    int p8_to_tax[8];
    for (int p = 0; p < 8; ++p) {
        auto idx = class_index(taxonomy, kPlutchik8[static_cast<std::size_t>(p)]);
        p8_to_tax[p] = idx ? *idx : -1;
    }
    std::vector<std::size_t> counts(classes.size(), 0);
    std::size_t total = 0;
    for (const auto& tok : tokens) {
        std::uint8_t mask = lexicon.mask_of(tok);
        if (!mask) continue;
        for (int p = 0; p < 8; ++p) {
            if ((mask & (1u << p)) && p8_to_tax[p] >= 0) {
                ++counts[static_cast<std::size_t>(p8_to_tax[p])];
                ++total;
            }
        }
    }
    AnnotationResult result;
    result.label.taxonomy = taxonomy;
    if (total == 0) {
        result.label.class_index = 0;
        result.no_lexicon_hit = true;
        return result;
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < counts.size(); ++k) {
        if (counts[k] > counts[best]) best = k; // earlier class wins ties
    }
    result.label.class_index = static_cast<int>(best);
    return result;
}

std::optional<EmotionLabel> project_to_ekman(const EmotionLabel& label) {
    if (label.taxonomy != Taxonomy::plutchik8) {
        throw ContractError("project_to_ekman expects a plutchik8 label");
    }
    auto idx = class_index(Taxonomy::ekman6, label.class_name());
    if (!idx) return std::nullopt;
    return EmotionLabel{*idx, Taxonomy::ekman6};
}

std::vector<LabelFileEntry> read_label_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open label file " + path);
    std::vector<LabelFileEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("label file " + path + " line " + std::to_string(line_no) + ": " +
                             e.what());
        }
        if (!j.contains("id") || !j.contains("emotion")) {
            throw ParseError("label file " + path + " line " + std::to_string(line_no) +
                             ": expected fields id and emotion");
        }
        entries.push_back({j.at("id").get<std::string>(), j.at("emotion").get<std::string>()});
    }
    return entries;
}

void write_label_file(const std::string& path, const std::vector<LabelFileEntry>& entries) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write label file " + path);
    for (const auto& e : entries) {
        nlohmann::json j;
        j["id"] = e.id;
        j["emotion"] = e.emotion;
        out << j.dump() << "\n";
    }
}

} // namespace emoda::emotion
