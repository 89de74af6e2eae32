#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "httplib.h"
#include "json.hpp"
#include "stag/decoder.hpp"
#include "stag/http_backend.hpp"
#include "stag/labelspace.hpp"
#include "stag/mock_backend.hpp"
#include "stag/rng.hpp"

using namespace stag;

namespace {

MockLexiconBackend make_mock() {
    MockLexiconConfig cfg;
    cfg.labels = original_labels(Task::POS);
    cfg.lexicon = {{"The", "DET"}, {"dog", "NOUN"}, {"runs", "VERB"}};
    return MockLexiconBackend(std::move(cfg));
}

struct ServerFixture {
    MockLexiconBackend mock = make_mock();
    BackendServer server{mock, "127.0.0.1", 0};
    int port = 0;

    ServerFixture() { port = server.start(); }
    ~ServerFixture() { server.stop(); }

    HttpBackend client(int retries = 2) {
        HttpBackendConfig cfg;
        cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
        cfg.timeout_sec = 10.0;
        cfg.retries = retries;
        return HttpBackend(cfg);
    }
};

std::vector<std::string> pos_surfaces() {
    std::vector<std::string> out;
    for (const auto& c : original_labels(Task::POS).classes) {
        out.push_back(c);
    }
    return out;
}

} // namespace

TEST_CASE("HTTP scoring matches the in-process backend") {
    ServerFixture fx;
    auto http = fx.client();
    const std::string prefix = "Context: The dog\nTagged: The/";
    const auto cands = pos_surfaces();

    auto remote = http.open_session(prefix)->score_candidates(cands);
    auto local = fx.mock.open_session(prefix)->score_candidates(cands);
    REQUIRE(remote.size() == local.size());
    for (size_t i = 0; i < remote.size(); ++i) {
        CHECK(remote[i].tokens == local[i].tokens);
        REQUIRE(remote[i].token_logprobs.size() == local[i].token_logprobs.size());
        for (size_t t = 0; t < remote[i].token_logprobs.size(); ++t) {
            CHECK(remote[i].token_logprobs[t] ==
                  doctest::Approx(local[i].token_logprobs[t]).epsilon(1e-9));
        }
        CHECK(remote[i].mean_logprob ==
              doctest::Approx(mean_logprob_of(remote[i].token_logprobs)));
    }
}

TEST_CASE("HTTP generation matches the in-process backend") {
    ServerFixture fx;
    auto http = fx.client();
    const std::string prefix = "Context: The dog runs\nTagged:";
    const auto remote = http.open_session(prefix)->generate_greedy("\n", 64);
    const auto local = fx.mock.open_session(prefix)->generate_greedy("\n", 64);
    CHECK(remote.text == local.text);
    CHECK(remote.truncated == local.truncated);
}

TEST_CASE("stateless equivalence holds across the wire") {
    ServerFixture fx;
    auto http = fx.client();
    const std::string full = "Context: The dog runs\nTagged: The/DET dog/";
    const auto cands = pos_surfaces();
    Rng rng(13);
    for (int trial = 0; trial < 25; ++trial) {
        const size_t cut = rng.below(full.size() + 1);
        auto split = http.open_session(full.substr(0, cut));
        split->append(full.substr(cut));
        auto whole = http.open_session(full);
        const auto a = split->score_candidates(cands);
        const auto b = whole->score_candidates(cands);
        for (size_t i = 0; i < a.size(); ++i) {
            for (size_t t = 0; t < a[i].token_logprobs.size(); ++t) {
                CHECK(std::abs(a[i].token_logprobs[t] - b[i].token_logprobs[t]) < 1e-6);
            }
        }
    }
}

TEST_CASE("decoding through HTTP equals decoding in process") {
    ServerFixture fx;
    auto http = fx.client();
    DecodeConfig cfg;
    cfg.label_set = original_labels(Task::POS);
    cfg.enforce_bio = false;
    const auto sent = testutil::sent("s", {"The", "dog", "runs"}, {"DET", "NOUN", "VERB"});
    const auto remote = tag_sentence(http, {}, sent, cfg);
    const auto local = tag_sentence(fx.mock, {}, sent, cfg);
    CHECK(remote.tags == local.tags);
    CHECK(remote.tags == (std::vector<std::string>{"DET", "NOUN", "VERB"}));
}

TEST_CASE("protocol errors surface as structured 4xx responses") {
    ServerFixture fx;
    httplib::Client raw("127.0.0.1", fx.port);

    SUBCASE("invalid JSON body") {
        const auto r = raw.Post("/v1/score", "this is not json", "application/json");
        REQUIRE(r);
        CHECK(r->status == 400);
        CHECK(nlohmann::json::parse(r->body).contains("error"));
    }
    SUBCASE("missing fields") {
        const auto r = raw.Post("/v1/score", R"({"prefix": "x"})", "application/json");
        REQUIRE(r);
        CHECK(r->status == 400);
    }
    SUBCASE("empty candidate list") {
        const auto r = raw.Post("/v1/score", R"({"prefix": "x", "candidates": []})",
                                "application/json");
        REQUIRE(r);
        CHECK(r->status == 400);
        CHECK(nlohmann::json::parse(r->body).at("error").get<std::string>().find(
                  "candidate") != std::string::npos);
    }
    SUBCASE("generate happy path over raw JSON") {
        const auto r = raw.Post(
            "/v1/generate",
            R"({"prefix": "Context: The\nTagged:", "max_tokens": 8, "stop": "\n"})",
            "application/json");
        REQUIRE(r);
        CHECK(r->status == 200);
        const auto body = nlohmann::json::parse(r->body);
        CHECK(body.at("text").get<std::string>() == " The/DET");
        CHECK(body.at("truncated").get<bool>() == false);
    }
}

TEST_CASE("unreachable backend raises a retriable error") {
    HttpBackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:1"; // nothing listens here
    cfg.timeout_sec = 1.0;
    cfg.retries = 0;
    HttpBackend backend(cfg);
    auto session = backend.open_session("x");
    try {
        (void)session->score_candidates({"NOUN"});
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.retriable);
    }
    CHECK_THROWS(HttpBackend(HttpBackendConfig{}));
}

TEST_CASE("client-side validation never hits the network") {
    ServerFixture fx;
    auto http = fx.client();
    auto session = http.open_session("x");
    CHECK_THROWS_AS((void)session->score_candidates({}), std::invalid_argument);
    CHECK_THROWS_AS((void)session->generate_greedy("\n", 0), std::invalid_argument);
}
