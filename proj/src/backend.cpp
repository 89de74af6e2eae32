#include "stag/backend.hpp"

namespace stag {

double mean_logprob_of(const std::vector<double>& token_logprobs) {
    if (token_logprobs.empty()) {
        throw std::invalid_argument("mean_logprob_of: empty token list");
    }
    double sum = 0.0;
    for (double lp : token_logprobs) {
        sum += lp;
    }
    return sum / static_cast<double>(token_logprobs.size());
}

void ScoringSession::append(std::string_view text) {
    prefix_.append(text);
    on_append(text);
}

} // namespace stag
