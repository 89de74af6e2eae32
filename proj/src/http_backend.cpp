#include "stag/http_backend.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace stag {

using nlohmann::json;

namespace {

// base_url "http://host:port" -> (host, port)
std::pair<std::string, int> split_url(const std::string& url) {
    std::string rest = url;
    const std::string scheme = "http://";
    if (rest.rfind(scheme, 0) == 0) {
        rest = rest.substr(scheme.size());
    }
    while (!rest.empty() && rest.back() == '/') {
        rest.pop_back();
    }
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) {
        return {rest, 80};
    }
    return {rest.substr(0, colon), std::stoi(rest.substr(colon + 1))};
}

class HttpSession : public ScoringSession {
public:
    HttpSession(const HttpBackendConfig& cfg, std::string initial_prefix)
        : ScoringSession(std::move(initial_prefix)), cfg_(cfg) {
        const auto [host, port] = split_url(cfg_.base_url);
        client_ = std::make_unique<httplib::Client>(host, port);
        const auto secs = static_cast<time_t>(cfg_.timeout_sec);
        const auto usecs = static_cast<time_t>((cfg_.timeout_sec - static_cast<double>(secs)) * 1e6);
        client_->set_connection_timeout(secs, usecs);
        client_->set_read_timeout(secs, usecs);
        client_->set_write_timeout(secs, usecs);
    }

    std::vector<CandidateScore> score_candidates(
        const std::vector<std::string>& candidates) override {
        if (candidates.empty()) {
            throw std::invalid_argument("score_candidates: empty candidate list");
        }
        json req = {{"prefix", committed_prefix()}, {"candidates", candidates}};
        const json resp = post("/v1/score", req);
        if (!resp.contains("scores") || !resp["scores"].is_array() ||
            resp["scores"].size() != candidates.size()) {
            throw BackendError("malformed /v1/score response");
        }
        std::vector<CandidateScore> out;
        out.reserve(candidates.size());
        for (size_t i = 0; i < candidates.size(); ++i) {
            const json& s = resp["scores"][i];
            CandidateScore cs;
            cs.text = candidates[i];
            cs.tokens = s.at("tokens").get<std::vector<std::string>>();
            cs.token_logprobs = s.at("logprobs").get<std::vector<double>>();
            if (cs.tokens.empty() || cs.tokens.size() != cs.token_logprobs.size()) {
                throw BackendError("backend returned no tokens for candidate: " + candidates[i]);
            }
            cs.mean_logprob = mean_logprob_of(cs.token_logprobs);
            out.push_back(std::move(cs));
        }
        return out;
    }

    GenerateResult generate_greedy(const std::string& stop, int max_tokens) override {
        if (max_tokens < 1) {
            throw std::invalid_argument("generate_greedy: max_tokens must be >= 1");
        }
        json req = {{"prefix", committed_prefix()}, {"max_tokens", max_tokens}, {"stop", stop}};
        const json resp = post("/v1/generate", req);
        GenerateResult res;
        res.text = resp.at("text").get<std::string>();
        res.truncated = resp.value("truncated", false);
        return res;
    }

private:
    json post(const std::string& path, const json& body) {
        std::string last_error;
        for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
            }
            auto r = client_->Post(path, body.dump(), "application/json");
            if (!r) {
                last_error = "connection failure: " + httplib::to_string(r.error());
                continue;
            }
            if (r->status >= 500) {
                last_error = "server error " + std::to_string(r->status) + ": " + r->body;
                continue;
            }
            if (r->status >= 400) {
                std::string msg = r->body;
                try {
                    msg = json::parse(r->body).value("error", r->body);
                } catch (const json::exception&) {
                }
                throw BackendError("backend rejected request (" + std::to_string(r->status) +
                                   "): " + msg);
            }
            try {
                return json::parse(r->body);
            } catch (const json::exception& e) {
                throw BackendError(std::string("invalid JSON from backend: ") + e.what());
            }
        }
        throw BackendError("backend unreachable after retries: " + last_error,
                           /*retriable=*/true);
    }

    HttpBackendConfig cfg_;
    std::unique_ptr<httplib::Client> client_;
};

} // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : cfg_(std::move(config)) {
    if (cfg_.base_url.empty()) {
        throw std::invalid_argument("HttpBackend: base_url required");
    }
}

std::unique_ptr<ScoringSession> HttpBackend::open_session(std::string initial_prefix) {
    return std::make_unique<HttpSession>(cfg_, std::move(initial_prefix));
}

std::string HttpBackend::describe() const {
    return "http(" + cfg_.base_url + ")";
}

struct BackendServer::Impl {
    httplib::Server server;
    std::thread thread;
    Backend* backend = nullptr;
    std::string host;
};

BackendServer::BackendServer(Backend& backend, const std::string& host, int port)
    : impl_(std::make_unique<Impl>()), port_(port) {
    impl_->backend = &backend;
    impl_->host = host;

    auto handle = [this](const httplib::Request& req, httplib::Response& res,
                         auto&& fn) {
        try {
            const json body = json::parse(req.body);
            res.set_content(fn(body).dump(), "application/json");
        } catch (const json::exception& e) {
            res.status = 400;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        } catch (const std::invalid_argument& e) {
            res.status = 400;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 500;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        }
    };

    impl_->server.Post("/v1/score", [this, handle](const httplib::Request& req,
                                                   httplib::Response& res) {
        handle(req, res, [this](const json& body) {
            auto session = impl_->backend->open_session(body.at("prefix").get<std::string>());
            const auto scores =
                session->score_candidates(body.at("candidates").get<std::vector<std::string>>());
            json out = {{"scores", json::array()}};
            for (const auto& s : scores) {
                out["scores"].push_back({{"tokens", s.tokens}, {"logprobs", s.token_logprobs}});
            }
            return out;
        });
    });

    impl_->server.Post("/v1/generate", [this, handle](const httplib::Request& req,
                                                      httplib::Response& res) {
        handle(req, res, [this](const json& body) {
            auto session = impl_->backend->open_session(body.at("prefix").get<std::string>());
            const auto gen = session->generate_greedy(body.value("stop", std::string()),
                                                      body.at("max_tokens").get<int>());
            return json{{"text", gen.text}, {"truncated", gen.truncated}};
        });
    });
}

BackendServer::~BackendServer() {
    stop();
}

int BackendServer::start() {
    if (port_ == 0) {
        port_ = impl_->server.bind_to_any_port(impl_->host);
        if (port_ < 0) {
            throw BackendError("cannot bind server socket");
        }
        impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    } else {
        if (!impl_->server.bind_to_port(impl_->host, port_)) {
            throw BackendError("cannot bind to port " + std::to_string(port_));
        }
        impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    }
    wait_ready();
    return port_;
}

void BackendServer::wait_ready() const {
    for (int i = 0; i < 200 && !impl_->server.is_running(); ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
}

void BackendServer::stop() {
    if (impl_ && impl_->thread.joinable()) {
        impl_->server.stop();
        impl_->thread.join();
    }
}

} // namespace stag
