#include "emoda/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "emoda/rng.hpp"
#include "emoda/tensor.hpp"

namespace emoda::text {

namespace {

bool is_word_byte(unsigned char c) {
    return std::isalnum(c) || c == '\'' || c >= 0x80;
}

std::string lower_ascii(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// Whole-word expansions checked before the suffix rules.
const std::unordered_map<std::string, std::string>& exact_contractions() {
    static const std::unordered_map<std::string, std::string> table = {
        {"won't", "will not"}, {"can't", "cannot"},   {"it's", "it is"},
        {"that's", "that is"}, {"what's", "what is"},
    };
    return table;
}

struct SuffixRule {
    const char* suffix;
    const char* expansion;
};

// Order matters: longer suffixes first so "n't" wins over "'t".
const SuffixRule kSuffixRules[] = {
    {"n't", " not"}, {"'re", " are"}, {"'ve", " have"},
    {"'ll", " will"}, {"'d", " would"}, {"'m", " am"},
};

std::string decontract_word(const std::string& word) {
    std::string lw = lower_ascii(word);
    auto it = exact_contractions().find(lw);
    if (it != exact_contractions().end()) return it->second;
    for (const auto& rule : kSuffixRules) {
        std::size_t n = std::char_traits<char>::length(rule.suffix);
        if (lw.size() > n && lw.compare(lw.size() - n, n, rule.suffix) == 0) {
            return lw.substr(0, lw.size() - n) + rule.expansion;
        }
    }
    return word;
}

} // namespace

std::string preprocess_text(const std::string& raw) {
    // Normalize typographic apostrophes (U+2019) so curly-quoted
    // contractions hit the table too.
    std::string s;
    s.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (i + 2 < raw.size() && static_cast<unsigned char>(raw[i]) == 0xe2 &&
            static_cast<unsigned char>(raw[i + 1]) == 0x80 &&
            static_cast<unsigned char>(raw[i + 2]) == 0x99) {
            s += '\'';
            i += 2;
        } else {
            s += raw[i];
        }
    }

    // 1. de-contraction over word runs
    std::string expanded;
    expanded.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (is_word_byte(static_cast<unsigned char>(s[i]))) {
            std::size_t j = i;
            while (j < s.size() && is_word_byte(static_cast<unsigned char>(s[j]))) ++j;
            expanded += decontract_word(s.substr(i, j - i));
            i = j;
        } else {
            expanded += s[i];
            ++i;
        }
    }

    // 2. lowercase, 3. drop punctuation, 4. collapse whitespace
    std::string out;
    out.reserve(expanded.size());
    bool pending_space = false;
    for (unsigned char c : expanded) {
        if (std::isspace(c)) {
            pending_space = true;
        } else if (std::isalnum(c) || c >= 0x80) {
            if (pending_space && !out.empty()) out += ' ';
            pending_space = false;
            out += static_cast<char>(std::tolower(c));
        }
        // anything else is punctuation: deleted
    }
    return out;
}

std::vector<std::string> tokenize(const std::string& normalized) {
    std::vector<std::string> tokens;
    std::size_t start = 0;
    while (start < normalized.size()) {
        std::size_t end = normalized.find(' ', start);
        if (end == std::string::npos) end = normalized.size();
        if (end > start) tokens.push_back(normalized.substr(start, end - start));
        start = end + 1;
    }
    return tokens;
}

Vocabulary::Vocabulary() {
    push(kPadToken);
    push(kUnkToken);
}

void Vocabulary::push(const std::string& token) {
    token_to_id_.emplace(token, static_cast<std::int32_t>(id_to_token_.size()));
    id_to_token_.push_back(token);
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus, int min_freq) {
    if (min_freq < 1) throw ConfigError("vocabulary min_freq must be >= 1");
    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& doc : corpus) {
        for (const auto& tok : doc) {
            if (tok == kPadToken || tok == kUnkToken) continue;
            ++freq[tok];
        }
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    kept.reserve(freq.size());
    for (auto& [tok, n] : freq) {
        if (n >= static_cast<std::size_t>(min_freq)) kept.emplace_back(tok, n);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary v;
    v.min_freq_ = min_freq;
    for (auto& [tok, n] : kept) v.push(tok);
    return v;
}

std::int32_t Vocabulary::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
    return token_to_id_.count(token) != 0;
}

const std::string& Vocabulary::token_of(std::int32_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
        throw DataError("vocabulary id " + std::to_string(id) + " out of range");
    }
    return id_to_token_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::string& path) const {
    nlohmann::json j;
    j["min_freq"] = min_freq_;
    j["tokens"] = std::vector<std::string>(id_to_token_.begin() + 2, id_to_token_.end());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write vocabulary file " + path);
    out << j.dump() << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("vocabulary file " + path + ": " + e.what());
    }
    Vocabulary v;
    v.min_freq_ = j.value("min_freq", 1);
    for (const auto& tok : j.at("tokens")) v.push(tok.get<std::string>());
    return v;
}

TokenSequence encode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                     int max_len) {
    if (max_len < 1) throw ConfigError("encode max_len must be >= 1");
    if (tokens.empty()) throw DataError("cannot encode an empty token list");
    TokenSequence seq;
    seq.ids.assign(static_cast<std::size_t>(max_len), Vocabulary::kPadId);
    std::size_t n = std::min(tokens.size(), static_cast<std::size_t>(max_len));
    for (std::size_t i = 0; i < n; ++i) seq.ids[i] = vocab.id_of(tokens[i]);
    seq.true_length = static_cast<std::int32_t>(n);
    return seq;
}

EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab,
                               std::size_t dim) {
    if (dim < 1) throw ConfigError("embedding dim must be >= 1");
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embedding file " + path);

    EmbeddingTable table;
    table.rows = vocab.size();
    table.dim = dim;
    table.data.assign(table.rows * dim, 0.0f);

    std::string line;
    std::size_t line_no = 0;
    std::vector<char> seen(vocab.size(), 0);
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::size_t sp = line.find(' ');
        if (sp == std::string::npos || sp == 0) {
            throw ParseError("embedding file " + path + " line " + std::to_string(line_no) +
                             ": expected token followed by " + std::to_string(dim) + " floats");
        }
        std::string token = line.substr(0, sp);
        std::int32_t id = vocab.contains(token) ? vocab.id_of(token) : -1;

        const char* p = line.c_str() + sp;
        std::size_t count = 0;
        float* dst = id >= 0 ? table.data.data() + static_cast<std::size_t>(id) * dim : nullptr;
        while (*p) {
            char* end = nullptr;
            float v = std::strtof(p, &end);
            if (end == p) break;
            if (dst && count < dim) dst[count] = v;
            ++count;
            p = end;
        }
        if (count != dim) {
            if (dst) std::fill(dst, dst + dim, 0.0f);
            throw ParseError("embedding file " + path + " line " + std::to_string(line_no) +
                             ": expected " + std::to_string(dim) + " values, got " +
                             std::to_string(count));
        }
        if (id >= 2 && !seen[static_cast<std::size_t>(id)]) {
            seen[static_cast<std::size_t>(id)] = 1;
            ++table.found;
        } else if (id >= 0 && id < 2 && dst) {
            // reserved rows stay zero
            std::fill(dst, dst + dim, 0.0f);
        }
    }
    return table;
}

EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed) {
    if (dim < 1) throw ConfigError("embedding dim must be >= 1");
    EmbeddingTable table;
    table.rows = vocab.size();
    table.dim = dim;
    table.data.assign(table.rows * dim, 0.0f);
    double limit = std::sqrt(6.0 / static_cast<double>(table.rows + dim));
    Rng rng(seed);
    // rows 0 (PAD) and 1 (UNK) stay zero
    for (std::size_t r = 2; r < table.rows; ++r) {
        float* dst = table.data.data() + r * dim;
        for (std::size_t c = 0; c < dim; ++c) dst[c] = static_cast<float>(rng.uniform(-limit, limit));
    }
    return table;
}

} // namespace emoda::text
