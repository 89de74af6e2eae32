#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace stag {

enum class Task { POS, CHUNK, NER };

Task task_from_string(const std::string& s);
std::string to_string(Task t);

// Decomposed BIO tag: either "O" or a (B|I, type) pair.
struct BioTag {
    bool is_outside = false;
    char prefix = 0; // 'B' or 'I' when !is_outside
    std::string type;
};

// Parses a class identifier under the BIO scheme. Throws on anything that
// is neither "O" nor "B-<type>"/"I-<type>".
BioTag parse_bio(const std::string& cls);

enum class LabelVariant { original, shuffled, proxy, words };

std::string to_string(LabelVariant v);
LabelVariant variant_from_string(const std::string& s);

// Ordered class inventory with a verbalizer. Class identifiers are stable
// across variants; only surfaces change.
struct LabelSet {
    std::vector<std::string> classes; // inventory order, used for tie-breaking
    std::unordered_map<std::string, std::string> surfaces; // class -> surface
    LabelVariant variant = LabelVariant::original;
    bool bio = false;

    const std::string& surface(const std::string& cls) const;
    // Reverse verbalizer lookup; empty when no class carries this surface.
    std::optional<std::string> class_of_surface(const std::string& surface) const;
    size_t index_of(const std::string& cls) const;
    bool contains(const std::string& cls) const;

    // Invariant check: verbalizer is a bijection over classes, and BIO
    // class identifiers parse. Throws on violation.
    void validate() const;
};

// The 17 UPOS tags (POS) or the 9 CoNLL-2003 BIO classes (NER), identity
// verbalizer. CHUNK has no fixed inventory; use original_labels(task,
// inventory) with the tag inventory observed in the data.
LabelSet original_labels(Task task);
LabelSet original_labels(Task task, const std::vector<std::string>& inventory);

// Seeded derangement of the surface forms over the same classes.
LabelSet shuffle_labels(const LabelSet& base, uint64_t seed);

// Consecutive-integer surfaces. Word-level tasks number classes directly;
// BIO tasks number entity types and keep the B-/I- prefixes and "O".
LabelSet proxy_labels(const LabelSet& base, int start = 11);

// English class names from a two-column TSV (class identifier \t surface).
LabelSet words_labels(const LabelSet& base, const std::string& mapping_path);

// Transition rule for valid BIO sequences: I-X may only extend a running
// B-X / I-X span; B-* and "O" are allowed everywhere.
class BioAutomaton {
public:
    explicit BioAutomaton(const LabelSet& labels);

    // Allowed successor classes, in inventory order. previous == nullopt
    // means sentence start.
    std::vector<std::string> allowed(const std::optional<std::string>& previous) const;

    bool transition_ok(const std::optional<std::string>& previous, const std::string& next) const;
    bool accepts(const std::vector<std::string>& tags) const;

private:
    std::vector<std::string> classes_;
    std::unordered_map<std::string, BioTag> parsed_;
};

} // namespace stag
