#include "stag/prompt.hpp"

#include <sstream>
#include <stdexcept>

namespace stag {

namespace {
constexpr const char* kDelimiters = "/:-_=";
}

void PromptConfig::validate() const {
    if (std::string(kDelimiters).find(delimiter) == std::string::npos) {
        throw std::invalid_argument(std::string("delimiter must be one of {/,:,-,_,=}, got '") +
                                    delimiter + "'");
    }
    if (context_keyword.empty() || tagged_keyword.empty()) {
        throw std::invalid_argument("prompt keywords must be non-empty");
    }
}

std::string render_demonstration(const TaggedSentence& sentence, const LabelSet& labels,
                                 const PromptConfig& config) {
    config.validate();
    std::ostringstream out;
    out << config.context_keyword << ':';
    for (const auto& w : sentence.words) {
        out << ' ' << w;
    }
    out << '\n' << config.tagged_keyword << ':';
    for (size_t i = 0; i < sentence.words.size(); ++i) {
        const std::string& surface = labels.surface(sentence.gold_tags[i]); // throws if unknown
        out << ' ';
        if (config.include_word_in_tagged) {
            out << sentence.words[i] << config.delimiter;
        }
        out << surface;
    }
    return out.str();
}

PromptState PromptState::begin(const std::vector<TaggedSentence>& demonstrations,
                               const LabelSet& labels, const TaggedSentence& sentence,
                               const PromptConfig& config) {
    config.validate();
    PromptState st;
    auto shared = std::make_shared<Shared>();
    shared->sentence = sentence;
    shared->config = config;
    st.shared_ = std::move(shared);

    std::ostringstream out;
    for (const auto& demo : demonstrations) {
        out << render_demonstration(demo, labels, config) << "\n\n";
    }
    out << config.context_keyword << ':';
    for (const auto& w : sentence.words) {
        out << ' ' << w;
    }
    out << '\n' << config.tagged_keyword << ':';
    st.prefix_ = out.str();
    return st;
}

bool PromptState::done() const {
    return history_.size() >= shared_->sentence.words.size();
}

const std::string& PromptState::pending_word() const {
    if (done()) {
        throw std::out_of_range("no pending word: sentence fully tagged");
    }
    return shared_->sentence.words[history_.size()];
}

std::string PromptState::pending_fragment() const {
    const std::string& word = pending_word();
    if (!shared_->config.include_word_in_tagged) {
        return " ";
    }
    return " " + word + shared_->config.delimiter;
}

PromptState PromptState::advance(const std::string& predicted_surface) const {
    if (done()) {
        throw std::out_of_range("advance past sentence end");
    }
    PromptState next = *this;
    next.prefix_ += pending_fragment() + predicted_surface;
    next.history_.emplace_back(pending_word(), predicted_surface);
    return next;
}

} // namespace stag
