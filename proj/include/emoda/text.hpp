#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "emoda/errors.hpp"

namespace emoda::text {

// Normalization pipeline, applied in order: de-contraction (fixed table,
// case-insensitive), lowercasing, punctuation removal, whitespace collapse.
// Idempotent. Bytes >= 0x80 pass through untouched so UTF-8 words survive.
std::string preprocess_text(const std::string& raw);

// Split an already-preprocessed string on single spaces.
std::vector<std::string> tokenize(const std::string& normalized);

class Vocabulary {
  public:
    static constexpr std::int32_t kPadId = 0;
    static constexpr std::int32_t kUnkId = 1;
    static constexpr const char* kPadToken = "<pad>";
    static constexpr const char* kUnkToken = "<unk>";

    Vocabulary();

    // Tokens with corpus frequency >= min_freq, ordered by (frequency desc,
    // token asc) after the reserved ids.
    static Vocabulary build(const std::vector<std::vector<std::string>>& corpus, int min_freq);

    std::int32_t id_of(const std::string& token) const; // kUnkId when absent
    bool contains(const std::string& token) const;
    const std::string& token_of(std::int32_t id) const;
    std::size_t size() const { return id_to_token_.size(); }
    int min_freq() const { return min_freq_; }

    const std::vector<std::string>& tokens() const { return id_to_token_; }

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

  private:
    void push(const std::string& token);

    std::unordered_map<std::string, std::int32_t> token_to_id_;
    std::vector<std::string> id_to_token_;
    int min_freq_ = 1;
};

struct TokenSequence {
    std::vector<std::int32_t> ids; // length == max_len, PAD-filled tail
    std::int32_t true_length = 0;
};

// Map tokens to ids (missing -> UNK), keep the first max_len, pad the rest.
TokenSequence encode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                     int max_len);

struct EmbeddingTable {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<float> data; // rows x dim, row-major
    bool trainable = false;
    std::size_t found = 0; // vocab tokens with a row in the file

    double coverage() const {
        return rows == 0 ? 0.0 : static_cast<double>(found) / static_cast<double>(rows);
    }
    const float* row(std::size_t r) const { return data.data() + r * dim; }
};

// GloVe-style text file: token followed by dim floats per line. Rows for
// vocab tokens found in the file are copied; everything else stays zero.
EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab,
                               std::size_t dim = 300);

// Deterministic random table for corpora without pretrained vectors.
// PAD and UNK rows stay zero.
EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed);

} // namespace emoda::text
