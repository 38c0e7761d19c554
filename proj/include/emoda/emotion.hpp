#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "emoda/errors.hpp"

namespace emoda::emotion {

enum class Taxonomy { ekman6, plutchik8 };

// Class orders are fixed; tie-breaking and label indices depend on them.
const std::vector<std::string>& taxonomy_classes(Taxonomy t);
int taxonomy_size(Taxonomy t);
const char* taxonomy_name(Taxonomy t);
Taxonomy taxonomy_from_name(const std::string& name);

// index of `cls` within the taxonomy order, or nullopt
std::optional<int> class_index(Taxonomy t, const std::string& cls);

struct EmotionLabel {
    int class_index = 0;
    Taxonomy taxonomy = Taxonomy::ekman6;

    const std::string& class_name() const { return taxonomy_classes(taxonomy)[class_index]; }
    bool operator==(const EmotionLabel&) const = default;
};

EmotionLabel make_label(Taxonomy t, const std::string& cls); // throws DataError on unknown

// word -> set of Plutchik classes, stored as a bitmask over the
// plutchik8 class order.
class EmotionLexicon {
  public:
    // TSV lines: word <TAB> emotion
    static EmotionLexicon load(const std::string& path);

    void add(const std::string& word, const std::string& emotion_class); // validates class
    std::uint8_t mask_of(const std::string& word) const;                 // 0 when absent
    std::size_t size() const { return word_mask_.size(); }
    bool empty() const { return word_mask_.empty(); }

  private:
    std::unordered_map<std::string, std::uint8_t> word_mask_;
};

struct AnnotationResult {
    EmotionLabel label;
    bool no_lexicon_hit = false;
};

// Majority vote of lexicon hits over the taxonomy's classes. Ties break
// toward the earlier class in taxonomy order; zero hits fall back to the
// first class and set the flag.
AnnotationResult annotate(const std::vector<std::string>& tokens, const EmotionLexicon& lexicon,
                          Taxonomy taxonomy);

// Identity on the six shared classes; trust/anticipation have no image.
std::optional<EmotionLabel> project_to_ekman(const EmotionLabel& label);

struct LabelFileEntry {
    std::string id;
    std::string emotion;
};

// JSON-lines {id, emotion}
std::vector<LabelFileEntry> read_label_file(const std::string& path);
void write_label_file(const std::string& path, const std::vector<LabelFileEntry>& entries);

} // namespace emoda::emotion
