#include "sempipe/backend.hpp"

#include <chrono>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "sempipe/fingerprint.hpp"
#include "sempipe/tokens.hpp"

namespace sempipe {

namespace {
std::string table_key(const std::string& model, const std::string& op_kind,
                      const std::string& key, const std::string& source) {
    return model + '\x1f' + op_kind + '\x1f' + key + '\x1f' + source;
}
}  // namespace

void MockModelTable::set_answer(const std::string& model, const std::string& op_kind,
                                const std::string& key, const std::string& source,
                                Value answer) {
    answers_[table_key(model, op_kind, key, source)] = std::move(answer);
}

const Value* MockModelTable::find_answer(const std::string& model, const std::string& op_kind,
                                         const std::string& key,
                                         const std::string& source) const {
    for (const std::string& m : {model, std::string("*")}) {
        for (const std::string& s : {source, std::string("*")}) {
            auto it = answers_.find(table_key(m, op_kind, key, s));
            if (it != answers_.end()) return &it->second;
        }
    }
    return nullptr;
}

double MockModelTable::latency_for(const std::string& model) const {
    auto it = model_latency_s.find(model);
    return it != model_latency_s.end() ? it->second : latency_s;
}

MockModelTable MockModelTable::from_json(const Value& doc) {
    MockModelTable table;
    table.default_behavior = doc.value("default_behavior", std::string("garbage"));
    table.latency_s = doc.value("latency_s", 0.0);
    table.error_rate = doc.value("error_rate", 0.0);
    for (const auto& [model, lat] : doc.value("model_latency_s", Value::object()).items())
        table.model_latency_s[model] = lat.get<double>();
    for (const Value& a : doc.value("answers", Value::array())) {
        table.set_answer(a.value("model", std::string("*")), a.at("op").get<std::string>(),
                         a.value("key", std::string{}), a.value("source", std::string("*")),
                         a.at("answer"));
    }
    return table;
}

MockModelTable MockModelTable::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw BackendError("cannot read mock table: " + file.string());
    return from_json(Value::parse(in));
}

std::string MockBackend::answer_text(const ModelSpec& model,
                                     const PromptRequest& request) const {
    const auto& meta = request.meta;
    if (meta.op_kind == "filter") {
        const Value* a = table_.find_answer(model.model_id, "filter", meta.predicate,
                                            meta.source_id);
        if (a) {
            if (a->is_boolean()) return a->get<bool>() ? "true" : "false";
            if (a->is_string()) return a->get<std::string>();
        }
    } else if (meta.op_kind == "convert" || meta.op_kind == "synthesize") {
        // whole-response entry wins, except that a single-field request (the
        // per-field strategy / bonded fallback) prefers its field answer
        const Value* whole =
            table_.find_answer(model.model_id, meta.op_kind, "__object__", meta.source_id);
        if (whole && meta.fields.size() == 1 &&
            table_.find_answer(model.model_id, meta.op_kind, meta.fields[0], meta.source_id))
            whole = nullptr;
        if (whole) return whole->is_string() ? whole->get<std::string>() : whole->dump();
        Value obj = Value::object();
        bool any = false;
        for (const std::string& field : meta.fields) {
            const Value* a =
                table_.find_answer(model.model_id, meta.op_kind, field, meta.source_id);
            if (a) {
                obj[field] = *a;
                any = true;
            }
        }
        if (any) return meta.one_to_many ? Value::array({obj}).dump() : obj.dump();
    }

    if (table_.default_behavior == "echo") return request.user_text;
    if (table_.default_behavior == "refuse") return "I cannot help with that request.";
    return "Well, that is an interesting document, let me think about it at length.";
}

GenerationResult MockBackend::generate(const ModelSpec& model, const PromptRequest& request) {
    calls_.fetch_add(1, std::memory_order_relaxed);

    if (table_.error_rate > 0.0) {
        Fnv1a h;
        h.update(model.model_id)
            .update(request.meta.op_id)
            .update(request.meta.source_id)
            .update(request.meta.predicate);
        double frac = static_cast<double>(h.value() % 1000000) / 1000000.0;
        if (frac < table_.error_rate)
            throw BackendError("mock backend injected error for " + request.meta.op_id);
    }

    double latency = table_.latency_for(model.model_id);
    if (latency > 0.0)
        std::this_thread::sleep_for(std::chrono::duration<double>(latency));

    GenerationResult result;
    result.text = answer_text(model, request);
    result.input_tokens = token_count(request.system_text) + token_count(request.user_text) +
                          kMockImageTokens * static_cast<std::int64_t>(request.image_payloads.size());
    result.output_tokens = token_count(result.text);
    result.latency_s = latency;
    result.usd = result.input_tokens * model.usd_per_million_input_tokens / 1e6 +
                 result.output_tokens * model.usd_per_million_output_tokens / 1e6;
    return result;
}

Value HttpBackend::build_request_body(const ModelSpec& model, const PromptRequest& request) {
    Value messages = Value::array();
    if (!request.system_text.empty())
        messages.push_back(Value{{"role", "system"}, {"content", request.system_text}});
    if (request.image_payloads.empty()) {
        messages.push_back(Value{{"role", "user"}, {"content", request.user_text}});
    } else {
        Value parts = Value::array();
        parts.push_back(Value{{"type", "text"}, {"text", request.user_text}});
        for (const std::string& img : request.image_payloads) {
            parts.push_back(Value{
                {"type", "image_url"},
                {"image_url", Value{{"url", "data:image/jpeg;base64," + img}}}});
        }
        messages.push_back(Value{{"role", "user"}, {"content", parts}});
    }
    return Value{{"model", model.model_id},
                 {"messages", messages},
                 {"max_tokens", request.max_output_tokens}};
}

GenerationResult HttpBackend::generate(const ModelSpec& model, const PromptRequest& request) {
    if (model.endpoint.empty())
        throw BackendError("model '" + model.model_id + "' has no http endpoint");

    Value body = build_request_body(model, request);
    std::string body_text = body.dump();

    std::string last_error;
    double backoff = config_.initial_backoff_s;
    for (int attempt = 0; attempt < config_.max_attempts; attempt++) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
            backoff *= 2.0;
        }
        try {
            httplib::Client client(model.endpoint);
            client.set_read_timeout(120, 0);
            httplib::Headers headers;
            if (const char* token = std::getenv(config_.bearer_token_env.c_str()))
                headers.emplace("Authorization", std::string("Bearer ") + token);

            auto start = std::chrono::steady_clock::now();
            auto res = client.Post(config_.path, headers, body_text, "application/json");
            auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);
            if (!res) {
                last_error = "transport error";
                continue;
            }
            if (res->status != 200) {
                last_error = "http status " + std::to_string(res->status);
                continue;
            }
            Value doc = Value::parse(res->body);
            GenerationResult result;
            result.text =
                doc.at("choices").at(0).at("message").at("content").get<std::string>();
            const Value usage = doc.value("usage", Value::object());
            result.input_tokens = usage.value("prompt_tokens", std::int64_t{0});
            result.output_tokens = usage.value("completion_tokens", std::int64_t{0});
            result.latency_s = elapsed.count();
            result.usd = result.input_tokens * model.usd_per_million_input_tokens / 1e6 +
                         result.output_tokens * model.usd_per_million_output_tokens / 1e6;
            return result;
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    throw BackendError("http backend failed after " + std::to_string(config_.max_attempts) +
                       " attempts: " + last_error);
}

}  // namespace sempipe
