#pragma once

#include <cstdint>
#include <unordered_map>

#include "stag/backend.hpp"
#include "stag/labelspace.hpp"
#include "stag/prompt.hpp"

namespace stag {

// Text-level stand-in for an autoregressive LM. Scoring locates the last
// "<word><delim>" in the committed prefix, looks the word up in a lexicon
// of per-word majority classes, and puts probability mass 1-epsilon on the
// majority class surface with epsilon split uniformly over the rest.
// Out-of-lexicon words score uniformly. With noise_seed set, the per-class
// distribution is instead a deterministic hash of (word, class), which
// gives arbitrary (including BIO-invalid) argmaxes for adversarial tests.
struct MockLexiconConfig {
    std::unordered_map<std::string, std::string> lexicon; // word -> class id
    LabelSet labels;
    PromptConfig prompt;
    double epsilon = 0.01;
    double logprob_shift = 0.0; // added to every token logprob
    bool noisy = false;
    uint64_t noise_seed = 0;
};

// Builds the per-word majority-class lexicon from gold-tagged sentences.
// Ties break toward the class earlier in the inventory.
std::unordered_map<std::string, std::string> build_lexicon(
    const std::vector<TaggedSentence>& sentences, const LabelSet& labels);

std::unordered_map<std::string, std::string> load_lexicon_tsv(const std::string& path);

class MockLexiconBackend : public Backend {
public:
    explicit MockLexiconBackend(MockLexiconConfig config);

    std::unique_ptr<ScoringSession> open_session(std::string initial_prefix) override;
    std::string describe() const override;

    const MockLexiconConfig& config() const { return cfg_; }

    // The class this backend prefers for a word; equals the lexicon's
    // majority class for in-lexicon words under the default distribution.
    std::string argmax_class(const std::string& word) const;

    // Per-class logprobs for a word, in inventory order, shift applied.
    std::vector<double> class_logprobs(const std::string& word) const;

private:
    MockLexiconConfig cfg_;
};

} // namespace stag
