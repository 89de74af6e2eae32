#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stag {

struct BackendError : std::runtime_error {
    explicit BackendError(const std::string& msg, bool retriable_ = false)
        : std::runtime_error(msg), retriable(retriable_) {}
    bool retriable;
};

// Per-candidate scoring result. mean_logprob is always recomputed by the
// harness from token_logprobs, whatever the backend reports.
struct CandidateScore {
    std::string text;
    std::vector<std::string> tokens;
    std::vector<double> token_logprobs;
    double mean_logprob = 0.0;
};

double mean_logprob_of(const std::vector<double>& token_logprobs);

struct GenerateResult {
    std::string text;
    bool truncated = false;
};

// One incremental scoring context. Scores are purely a function of the
// committed prefix plus the candidate; append() only grows the prefix, so
// a backend may reuse cached computation for the committed part. A session
// is confined to one thread at a time.
class ScoringSession {
public:
    explicit ScoringSession(std::string initial_prefix) : prefix_(std::move(initial_prefix)) {}
    virtual ~ScoringSession() = default;

    void append(std::string_view text);
    const std::string& committed_prefix() const { return prefix_; }

    // Per-token logprobs of each candidate conditioned on the committed
    // prefix (and the candidate's earlier tokens), plus their mean.
    virtual std::vector<CandidateScore> score_candidates(
        const std::vector<std::string>& candidates) = 0;

    // Greedy continuation until the stop substring or the token budget.
    virtual GenerateResult generate_greedy(const std::string& stop, int max_tokens) = 0;

protected:
    virtual void on_append(std::string_view text) { (void)text; }

private:
    std::string prefix_;
};

// An autoregressive LM reachable for scoring. Implementations must allow
// concurrent sessions.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::unique_ptr<ScoringSession> open_session(std::string initial_prefix) = 0;
    virtual std::string describe() const = 0;
};

} // namespace stag
