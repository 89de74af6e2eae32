#include "stag/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "stag/rng.hpp"

namespace stag {

std::unordered_map<std::string, std::string> build_lexicon(
    const std::vector<TaggedSentence>& sentences, const LabelSet& labels) {
    std::unordered_map<std::string, std::map<std::string, size_t>> counts;
    for (const auto& s : sentences) {
        for (size_t i = 0; i < s.words.size(); ++i) {
            counts[s.words[i]][s.gold_tags[i]]++;
        }
    }
    std::unordered_map<std::string, std::string> lex;
    for (const auto& [word, tag_counts] : counts) {
        std::string best;
        size_t best_count = 0;
        size_t best_rank = labels.classes.size();
        for (const auto& [tag, count] : tag_counts) {
            const size_t rank = labels.index_of(tag);
            if (count > best_count || (count == best_count && rank < best_rank)) {
                best = tag;
                best_count = count;
                best_rank = rank;
            }
        }
        lex[word] = best;
    }
    return lex;
}

std::unordered_map<std::string, std::string> load_lexicon_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open lexicon: " + path);
    }
    std::unordered_map<std::string, std::string> lex;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected word<TAB>class");
        }
        lex[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return lex;
}

MockLexiconBackend::MockLexiconBackend(MockLexiconConfig config) : cfg_(std::move(config)) {
    cfg_.labels.validate();
    cfg_.prompt.validate();
    for (const auto& [word, cls] : cfg_.lexicon) {
        if (!cfg_.labels.contains(cls)) {
            throw std::invalid_argument("lexicon class not in label set: " + cls);
        }
    }
}

std::vector<double> MockLexiconBackend::class_logprobs(const std::string& word) const {
    const size_t n = cfg_.labels.classes.size();
    std::vector<double> lps(n, 0.0);
    if (cfg_.noisy) {
        std::vector<double> w(n);
        double sum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const uint64_t h =
                hash_bytes(cfg_.noise_seed + i * 0x9e3779b97f4a7c15ULL, word.data(), word.size());
            w[i] = static_cast<double>(h % 100000 + 1);
            sum += w[i];
        }
        for (size_t i = 0; i < n; ++i) {
            lps[i] = std::log(w[i] / sum);
        }
    } else {
        auto it = cfg_.lexicon.find(word);
        if (it == cfg_.lexicon.end()) {
            const double lp = std::log(1.0 / static_cast<double>(n));
            std::fill(lps.begin(), lps.end(), lp);
        } else {
            const size_t majority = cfg_.labels.index_of(it->second);
            const double rest =
                n > 1 ? std::log(cfg_.epsilon / static_cast<double>(n - 1)) : 0.0;
            for (size_t i = 0; i < n; ++i) {
                lps[i] = i == majority ? std::log(1.0 - cfg_.epsilon) : rest;
            }
            if (n == 1) {
                lps[0] = 0.0;
            }
        }
    }
    for (double& lp : lps) {
        lp += cfg_.logprob_shift;
    }
    return lps;
}

std::string MockLexiconBackend::argmax_class(const std::string& word) const {
    const auto lps = class_logprobs(word);
    size_t best = 0;
    for (size_t i = 1; i < lps.size(); ++i) {
        if (lps[i] > lps[best]) {
            best = i; // ties keep the earlier class
        }
    }
    return cfg_.labels.classes[best];
}

namespace {

class MockSession : public ScoringSession {
public:
    MockSession(const MockLexiconBackend& backend, std::string initial_prefix)
        : ScoringSession(std::move(initial_prefix)), backend_(backend) {}

    std::vector<CandidateScore> score_candidates(
        const std::vector<std::string>& candidates) override {
        if (candidates.empty()) {
            throw std::invalid_argument("score_candidates: empty candidate list");
        }
        const std::string word = pending_word();
        const auto& cfg = backend_.config();
        const auto lps = backend_.class_logprobs(word);

        // Floor for texts that are not a label surface at all; below every
        // in-set logprob so it never wins an argmax.
        double floor = lps.empty() ? -50.0 : *std::min_element(lps.begin(), lps.end());
        floor -= std::log(1000.0);

        std::vector<CandidateScore> out;
        out.reserve(candidates.size());
        for (const auto& cand : candidates) {
            if (cand.empty()) {
                throw BackendError("candidate tokenizes to zero tokens: \"\"");
            }
            double lp = floor;
            if (auto cls = cfg.labels.class_of_surface(cand)) {
                lp = lps[cfg.labels.index_of(*cls)];
            }
            CandidateScore cs;
            cs.text = cand;
            cs.tokens = {cand}; // the mock tokenizer is one token per candidate
            cs.token_logprobs = {lp};
            cs.mean_logprob = mean_logprob_of(cs.token_logprobs);
            out.push_back(std::move(cs));
        }
        return out;
    }

    GenerateResult generate_greedy(const std::string& stop, int max_tokens) override {
        if (max_tokens < 1) {
            throw std::invalid_argument("generate_greedy: max_tokens must be >= 1");
        }
        const auto& cfg = backend_.config();
        const auto tokens = plan_tokens();
        GenerateResult res;
        int used = 0;
        for (const auto& tok : tokens) {
            if (used >= max_tokens) {
                res.truncated = true;
                return res;
            }
            res.text += tok;
            ++used;
            if (!stop.empty()) {
                const auto pos = res.text.find(stop);
                if (pos != std::string::npos) {
                    res.text.resize(pos);
                    return res;
                }
            }
        }
        (void)cfg;
        res.truncated = true; // ran out of continuation before stop
        return res;
    }

private:
    // Word whose label is being scored: the prefix ends with "<word><delim>".
    std::string pending_word() const {
        const std::string& p = committed_prefix();
        const auto& cfg = backend_.config();
        if (p.empty() || p.back() != cfg.prompt.delimiter) {
            return ""; // unknown context; scores fall back to uniform
        }
        size_t end = p.size() - 1;
        size_t start = end;
        while (start > 0 && p[start - 1] != ' ' && p[start - 1] != '\n') {
            --start;
        }
        return p.substr(start, end - start);
    }

    // Continuation the mock would emit: finish the current Tagged line with
    // each remaining word and its preferred label, then a newline. One
    // token per emitted pair.
    std::vector<std::string> plan_tokens() const {
        const auto& cfg = backend_.config();
        const std::string& p = committed_prefix();

        const std::string ctx_key = cfg.prompt.context_keyword + ":";
        size_t ctx = p.rfind("\n" + ctx_key);
        size_t ctx_line = ctx == std::string::npos
                              ? (p.rfind(ctx_key, 0) == 0 ? 0 : std::string::npos)
                              : ctx + 1;
        if (ctx_line == std::string::npos) {
            return {"\n"};
        }
        const size_t ctx_start = ctx_line + ctx_key.size();
        const size_t ctx_end = std::min(p.find('\n', ctx_start), p.size());
        std::istringstream ctx_words(p.substr(ctx_start, ctx_end - ctx_start));
        std::vector<std::string> words;
        std::string w;
        while (ctx_words >> w) {
            words.push_back(w);
        }

        const std::string tag_key = cfg.prompt.tagged_keyword + ":";
        size_t tagged = p.find(tag_key, ctx_end == p.size() ? ctx_end : ctx_end + 1);
        size_t already = 0;
        if (tagged != std::string::npos) {
            std::istringstream pairs(p.substr(tagged + tag_key.size()));
            std::string chunk;
            while (pairs >> chunk) {
                ++already;
            }
        }

        std::vector<std::string> out;
        for (size_t i = already; i < words.size(); ++i) {
            std::string tok = " ";
            if (cfg.prompt.include_word_in_tagged) {
                tok += words[i] + cfg.prompt.delimiter;
            }
            tok += cfg.labels.surface(backend_.argmax_class(words[i]));
            out.push_back(std::move(tok));
        }
        out.push_back("\n");
        return out;
    }

    const MockLexiconBackend& backend_;
};

} // namespace

std::unique_ptr<ScoringSession> MockLexiconBackend::open_session(std::string initial_prefix) {
    return std::make_unique<MockSession>(*this, std::move(initial_prefix));
}

std::string MockLexiconBackend::describe() const {
    std::ostringstream out;
    out << "mock-lexicon(entries=" << cfg_.lexicon.size() << ",epsilon=" << cfg_.epsilon;
    if (cfg_.noisy) {
        out << ",noise_seed=" << cfg_.noise_seed;
    }
    out << ")";
    return out.str();
}

} // namespace stag
