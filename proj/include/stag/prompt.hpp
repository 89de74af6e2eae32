#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "stag/corpus.hpp"
#include "stag/labelspace.hpp"

namespace stag {

struct PromptConfig {
    std::string context_keyword = "Context";
    std::string tagged_keyword = "Tagged";
    char delimiter = '/';
    bool include_word_in_tagged = true;

    // Delimiter must come from the fixed five-character set.
    void validate() const;
};

// "Context: w1 ... wn\nTagged: w1<delim>v(t1) ..." for one gold-tagged
// sentence; with include_word_in_tagged off the Tagged line carries the
// verbalized tags only.
std::string render_demonstration(const TaggedSentence& sentence, const LabelSet& labels,
                                 const PromptConfig& config);

// Immutable snapshot of the incremental tagging context. The rendered
// prefix is append-only across advance() calls, which is what lets a
// backend reuse cached state for the committed part.
class PromptState {
public:
    static PromptState begin(const std::vector<TaggedSentence>& demonstrations,
                             const LabelSet& labels, const TaggedSentence& sentence,
                             const PromptConfig& config);

    // Text to append before scoring candidates for the pending word:
    // " <word><delim>" (or a lone " " when words are not repeated).
    std::string pending_fragment() const;

    // New state with the pending word committed to predicted_surface.
    // The prefix grows by pending_fragment() + predicted_surface.
    PromptState advance(const std::string& predicted_surface) const;

    const std::string& rendered_prefix() const { return prefix_; }
    size_t pending_word_index() const { return history_.size(); }
    bool done() const;
    const std::string& pending_word() const;
    const std::vector<std::pair<std::string, std::string>>& history() const {
        return history_;
    }

private:
    struct Shared {
        TaggedSentence sentence;
        PromptConfig config;
    };
    std::shared_ptr<const Shared> shared_;
    std::string prefix_;
    std::vector<std::pair<std::string, std::string>> history_; // (word, surface)
};

} // namespace stag
