#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sempipe/model_registry.hpp"
#include "sempipe/value.hpp"

namespace sempipe {

struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PromptRequest {
    std::string model_id;
    std::string system_text;
    std::string user_text;
    std::vector<std::string> image_payloads;  // base64
    std::int64_t max_output_tokens = 1024;

    // Structured routing metadata. The mock backend keys its answer table on
    // this; the http backend ignores it.
    struct Meta {
        std::string op_id;
        std::string op_kind;  // "convert" | "filter" | "synthesize"
        std::vector<std::string> fields;
        std::string predicate;
        std::string source_id;
        bool one_to_many = false;
    } meta;
};

struct GenerationResult {
    std::string text;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    double latency_s = 0.0;
    double usd = 0.0;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual GenerationResult generate(const ModelSpec& model, const PromptRequest& request) = 0;
    virtual std::string identity() const = 0;
};

/// Deterministic canned-answer table: per (model_id, operator-kind,
/// field-or-predicate, source_id) answers, with wildcard "*" on model and
/// source. Loadable from a JSON fixture file.
class MockModelTable {
public:
    void set_answer(const std::string& model, const std::string& op_kind,
                    const std::string& key, const std::string& source, Value answer);
    const Value* find_answer(const std::string& model, const std::string& op_kind,
                             const std::string& key, const std::string& source) const;

    std::string default_behavior = "garbage";  // echo | garbage | refuse
    double latency_s = 0.0;
    double error_rate = 0.0;
    std::map<std::string, double> model_latency_s;  // per-model override

    double latency_for(const std::string& model) const;

    static MockModelTable from_json(const Value& doc);
    static MockModelTable load(const std::filesystem::path& file);

private:
    // key: model \x1f op_kind \x1f key \x1f source
    std::map<std::string, Value> answers_;
};

// Tokens charged per image payload by the mock backend.
inline constexpr std::int64_t kMockImageTokens = 512;

class MockBackend : public Backend {
public:
    explicit MockBackend(MockModelTable table) : table_(std::move(table)) {}

    GenerationResult generate(const ModelSpec& model, const PromptRequest& request) override;
    std::string identity() const override { return "mock"; }

    std::int64_t calls() const { return calls_.load(); }
    void reset_calls() { calls_.store(0); }
    const MockModelTable& table() const { return table_; }

private:
    std::string answer_text(const ModelSpec& model, const PromptRequest& request) const;

    MockModelTable table_;
    std::atomic<std::int64_t> calls_{0};
};

struct HttpBackendConfig {
    std::string path = "/v1/chat/completions";
    std::string bearer_token_env = "SEMPIPE_API_TOKEN";
    int max_attempts = 3;
    double initial_backoff_s = 1.0;
};

/// OpenAI-compatible chat-completions client. Endpoint base URL comes from the
/// model spec; bearer token from the configured environment variable.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config = {}) : config_(std::move(config)) {}

    GenerationResult generate(const ModelSpec& model, const PromptRequest& request) override;
    std::string identity() const override { return "http"; }

    static Value build_request_body(const ModelSpec& model, const PromptRequest& request);

private:
    HttpBackendConfig config_;
};

}  // namespace sempipe
