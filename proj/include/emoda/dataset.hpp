#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "emoda/emotion.hpp"
#include "emoda/errors.hpp"
#include "emoda/text.hpp"

namespace emoda::data {

enum class Domain : std::int32_t { source = 0, target = 1 };

inline const char* domain_name(Domain d) {
    return d == Domain::source ? "source" : "target";
}

// One encoded document. Veracity is held privately: training-path access
// on a target-domain example is a contract violation, evaluation access is
// a separate method so the blinding boundary is visible at call sites.
class LabeledExample {
  public:
    std::string id;
    text::TokenSequence seq;
    Domain domain = Domain::source;
    std::optional<emotion::EmotionLabel> emotion;
    bool no_lexicon_hit = false;

    bool has_veracity() const { return veracity_.has_value(); }

    void set_veracity(int v) {
        if (v != 0 && v != 1) throw DataError("veracity must be 0 (real) or 1 (fake)");
        veracity_ = v;
    }

    // fake = 1, real = 0
    int veracity_for_training() const {
        if (domain == Domain::target) {
            throw ContractError("training-path access to target-domain veracity label (id=" +
                                id + ")");
        }
        if (!veracity_) throw DataError("example " + id + " has no veracity label");
        return *veracity_;
    }

    int veracity_for_eval() const {
        if (!veracity_) throw DataError("example " + id + " has no veracity label");
        return *veracity_;
    }

  private:
    std::optional<int> veracity_;
};

struct RawDocument {
    std::string id;
    std::string text;
    std::optional<int> veracity;
    std::optional<std::string> emotion; // class name, taxonomy-checked at encode time
};

// JSON-lines records {id, text, label?, emotion?}. Validates duplicate ids
// and missing/empty text; label strings are "fake"/"real" (ints 1/0 also
// accepted).
std::vector<RawDocument> read_jsonl_documents(const std::string& path);

void write_jsonl_documents(const std::string& path, const std::vector<RawDocument>& docs);

// FakeNewsNet-style CSV shim: columns (id, title, text, label); title and
// text are concatenated with a space.
std::vector<RawDocument> read_csv_documents(const std::string& path);

// Role-aware load: validates that source documents carry labels, then
// preprocesses, tokenizes and encodes every document. Emotion names are
// resolved against `taxonomy`; without one they are dropped (single-task
// pipelines have no use for them).
std::vector<LabeledExample> load_dataset(const std::string& path, Domain role,
                                         const text::Vocabulary& vocab, int max_len,
                                         std::optional<emotion::Taxonomy> taxonomy);

// The same role validation + encoding for documents already in memory.
std::vector<LabeledExample> encode_documents(const std::vector<RawDocument>& docs, Domain role,
                                             const text::Vocabulary& vocab, int max_len,
                                             std::optional<emotion::Taxonomy> taxonomy);

// Attach labels from a {id, emotion} file; every example must be covered.
void ingest_labels(const std::string& path, emotion::Taxonomy taxonomy,
                   std::vector<LabeledExample>& examples);

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct ThreeWaySplit {
    std::vector<LabeledExample> train, val, test;
};

struct IndexSplit {
    std::vector<std::size_t> train, val, test;
};

// Deterministic stratified split over item indices: items are grouped by
// veracity where labels exist, shuffled per stratum, and allocated by
// largest remainder so per-stratum class ratios stay within one example of
// the fractions.
IndexSplit split_indices(const std::vector<std::optional<int>>& veracity,
                         const SplitFractions& fractions, std::uint64_t seed);

ThreeWaySplit split_dataset(const std::vector<LabeledExample>& examples,
                            const SplitFractions& fractions, std::uint64_t seed);

struct DatasetSplit {
    std::vector<LabeledExample> source_train, source_val, source_test;
    std::vector<LabeledExample> target_train, target_val, target_test;

    std::size_t n_s() const { return source_train.size(); }
    std::size_t n_t() const { return target_train.size(); }
};

DatasetSplit make_split(const std::vector<LabeledExample>& source,
                        const std::vector<LabeledExample>& target,
                        const SplitFractions& fractions, std::uint64_t seed);

// ---- synthetic corpus -------------------------------------------------------

struct SyntheticSpec {
    int n_source = 2000;
    int n_target = 2000;
    std::uint64_t seed = 0;
    bool seed_set = false; // seed is mandatory in config files

    double rho = 0.9;           // emotion-veracity correlation strength
    double shift = 0.5;         // fraction of the vocabulary remapped in the target domain
    double class_balance = 0.5; // P(fake)

    int class_tokens_per_class = 24;
    int emotion_tokens_per_class = 32;
    int background_tokens = 250;

    int doc_len_min = 6;
    int doc_len_max = 12;
    double p_class = 0.25;  // per-token probability of drawing from the veracity pool
    double p_emotion = 0.4; // ... from the emotion pool

    emotion::Taxonomy taxonomy = emotion::Taxonomy::plutchik8;

    void validate() const;
};

struct SyntheticCorpus {
    std::vector<RawDocument> source;
    std::vector<RawDocument> target;
};

// Generates two domains from one underlying process: veracity classes draw
// from their own token pools, emotion labels correlate with veracity at
// strength rho, and a `shift` fraction of vocabulary tokens take a disjoint
// surface form in the target domain.
SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec);

// Emotion classes affiliated with each veracity class, restricted to the
// given taxonomy (used by the generator at rho > 0).
const std::vector<std::string>& affiliated_emotions(emotion::Taxonomy t, int veracity);

} // namespace emoda::data
