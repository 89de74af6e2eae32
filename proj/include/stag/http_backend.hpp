#pragma once

#include <string>

#include "stag/backend.hpp"

namespace stag {

// Client for the artifact's HTTP scoring protocol:
//   POST /v1/score    {"prefix": str, "candidates": [str]}
//                  -> {"scores": [{"tokens": [str], "logprobs": [num]}]}
//   POST /v1/generate {"prefix": str, "max_tokens": int, "stop": str}
//                  -> {"text": str, "truncated": bool}
// Errors come back as HTTP 4xx/5xx with {"error": str}.
struct HttpBackendConfig {
    std::string base_url; // e.g. http://127.0.0.1:8080
    double timeout_sec = 30.0;
    int retries = 2; // extra attempts on connection failure / 5xx
};

class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);

    std::unique_ptr<ScoringSession> open_session(std::string initial_prefix) override;
    std::string describe() const override;

    const HttpBackendConfig& config() const { return cfg_; }

private:
    HttpBackendConfig cfg_;
};

// Serves any Backend over the protocol above; blocks until stopped.
// Intended for the CLI `serve` subcommand and in-process tests.
class BackendServer {
public:
    BackendServer(Backend& backend, const std::string& host, int port);
    ~BackendServer();

    // Binds to an OS-assigned port when port == 0; returns the bound port.
    int start();
    void wait_ready() const;
    void stop();
    int port() const { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_;
};

} // namespace stag
