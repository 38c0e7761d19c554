#include <cmath>
#include <string>
#include <vector>

#include "emoda/dataset.hpp"
#include "emoda/rng.hpp"

namespace emoda::data {

namespace {

// Fake news skews toward high-arousal negative emotions, real news toward
// the rest; restriction to ekman6 drops trust and anticipation.
const std::vector<std::string> kFakeP8 = {"surprise", "anger", "disgust", "fear"};
const std::vector<std::string> kRealP8 = {"joy", "trust", "anticipation", "sadness"};
const std::vector<std::string> kFakeE6 = {"surprise", "anger", "disgust", "fear"};
const std::vector<std::string> kRealE6 = {"joy", "sadness"};

struct TokenInfo {
    std::string source_form;
    std::string target_form; // same as source_form when the token is shared
};

} // namespace

const std::vector<std::string>& affiliated_emotions(emotion::Taxonomy t, int veracity) {
    if (t == emotion::Taxonomy::plutchik8) return veracity == 1 ? kFakeP8 : kRealP8;
    return veracity == 1 ? kFakeE6 : kRealE6;
}

void SyntheticSpec::validate() const {
    if (!seed_set) throw ConfigError("synthetic spec: seed is mandatory");
    if (n_source < 1 || n_target < 0) throw ConfigError("synthetic spec: bad sample counts");
    if (rho < 0.0 || rho > 1.0) throw ConfigError("synthetic spec: rho must be in [0,1]");
    if (shift < 0.0 || shift > 1.0) throw ConfigError("synthetic spec: shift must be in [0,1]");
    if (class_balance <= 0.0 || class_balance >= 1.0) {
        throw ConfigError("synthetic spec: class_balance must be in (0,1)");
    }
    if (class_tokens_per_class < 1 || emotion_tokens_per_class < 1 || background_tokens < 1) {
        throw ConfigError("synthetic spec: pool sizes must be >= 1");
    }
    if (doc_len_min < 1 || doc_len_max < doc_len_min) {
        throw ConfigError("synthetic spec: document length range is invalid");
    }
    if (p_class < 0.0 || p_emotion < 0.0 || p_class + p_emotion > 1.0) {
        throw ConfigError("synthetic spec: token mixture probabilities are invalid");
    }
}

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec) {
    spec.validate();
    const auto& classes = emotion::taxonomy_classes(spec.taxonomy);
    const int K = static_cast<int>(classes.size());

    // Build the base vocabulary: class pools, per-emotion pools, background.
    std::vector<std::vector<TokenInfo>> class_pool(2);
    std::vector<std::vector<TokenInfo>> emotion_pool(static_cast<std::size_t>(K));
    std::vector<TokenInfo> background;

    // Per-group remap rates: shift^e with e > 1 for emotion vocabulary and
    // e < 1 for topical (class) vocabulary. Affective words travel across
    // domains more readily than topic markers, which is the premise the
    // emotion-guided models exploit; both endpoints are preserved (shift 0
    // remaps nothing, shift 1 remaps everything).
    Rng remap_rng(derive_seed(spec.seed, "synth.remap"));
    auto make_token = [&](const std::string& base, double exponent) {
        TokenInfo info;
        info.source_form = base;
        double p = std::pow(spec.shift, exponent);
        info.target_form = remap_rng.next_double() < p ? base + "x" : base;
        return info;
    };
    constexpr double kClassExp = 0.15, kEmotionExp = 2.0, kBackgroundExp = 1.0;
    for (int v = 0; v < 2; ++v) {
        const char* prefix = v == 1 ? "fake" : "real";
        for (int i = 0; i < spec.class_tokens_per_class; ++i) {
            class_pool[static_cast<std::size_t>(v)].push_back(
                make_token(prefix + std::to_string(i), kClassExp));
        }
    }
    for (int k = 0; k < K; ++k) {
        for (int i = 0; i < spec.emotion_tokens_per_class; ++i) {
            emotion_pool[static_cast<std::size_t>(k)].push_back(
                make_token(classes[static_cast<std::size_t>(k)] + std::to_string(i),
                           kEmotionExp));
        }
    }
    for (int i = 0; i < spec.background_tokens; ++i) {
        background.push_back(make_token("bg" + std::to_string(i), kBackgroundExp));
    }

    // Pre-resolve the affiliated emotion class indices per veracity.
    std::vector<std::vector<int>> affiliated(2);
    for (int v = 0; v < 2; ++v) {
        for (const auto& name : affiliated_emotions(spec.taxonomy, v)) {
            affiliated[static_cast<std::size_t>(v)].push_back(
                *emotion::class_index(spec.taxonomy, name));
        }
    }

    auto generate = [&](int n, Domain domain, const char* id_prefix, Rng& rng) {
        std::vector<RawDocument> docs;
        docs.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            int veracity = rng.next_double() < spec.class_balance ? 1 : 0;
            int emo;
            if (rng.next_double() < spec.rho) {
                const auto& aff = affiliated[static_cast<std::size_t>(veracity)];
                emo = aff[static_cast<std::size_t>(rng.below(aff.size()))];
            } else {
                emo = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
            }
            int len = spec.doc_len_min +
                      static_cast<int>(rng.below(
                          static_cast<std::uint64_t>(spec.doc_len_max - spec.doc_len_min + 1)));
            std::string text;
            for (int t = 0; t < len; ++t) {
                double r = rng.next_double();
                const TokenInfo* tok;
                if (r < spec.p_class) {
                    const auto& pool = class_pool[static_cast<std::size_t>(veracity)];
                    tok = &pool[static_cast<std::size_t>(rng.below(pool.size()))];
                } else if (r < spec.p_class + spec.p_emotion) {
                    const auto& pool = emotion_pool[static_cast<std::size_t>(emo)];
                    tok = &pool[static_cast<std::size_t>(rng.below(pool.size()))];
                } else {
                    tok = &background[static_cast<std::size_t>(rng.below(background.size()))];
                }
                if (t) text += ' ';
                text += domain == Domain::source ? tok->source_form : tok->target_form;
            }
            RawDocument doc;
            doc.id = id_prefix + std::to_string(i);
            doc.text = std::move(text);
            doc.veracity = veracity;
            doc.emotion = classes[static_cast<std::size_t>(emo)];
            docs.push_back(std::move(doc));
        }
        return docs;
    };

    SyntheticCorpus corpus;
    Rng source_rng(derive_seed(spec.seed, "synth.source"));
    Rng target_rng(derive_seed(spec.seed, "synth.target"));
    corpus.source = generate(spec.n_source, Domain::source, "s", source_rng);
    corpus.target = generate(spec.n_target, Domain::target, "t", target_rng);
    return corpus;
}

} // namespace emoda::data
