#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "sempipe/prompts.hpp"
#include "sempipe/synthesis.hpp"
#include "sempipe/tokens.hpp"

using namespace sempipe;

namespace {

std::string numbered_tokens(int n) {
    std::ostringstream out;
    for (int i = 0; i < n; i++) {
        if (i) out << ' ';
        out << 't' << i;
    }
    return out.str();
}

FieldSpec string_field(const std::string& name) {
    return {name, name + " description", true, FieldKind::string()};
}

}  // namespace

TEST_CASE("reduce_input keeps an exact token prefix per budget") {
    std::string text = numbered_tokens(1000);
    std::int64_t expected[] = {100, 500, 900, 1000};
    double budgets[] = {0.1, 0.5, 0.9, 1.0};
    std::int64_t prev = 0;
    for (int i = 0; i < 4; i++) {
        std::string reduced = reduce_input(text, budgets[i]);
        CHECK(token_count(reduced) == expected[i]);
        // prefix property: the kept tokens are the first ones, in order
        auto toks = tokenize(reduced);
        for (size_t j = 0; j < toks.size(); j++)
            CHECK(toks[j] == "t" + std::to_string(j));
        CHECK(token_count(reduced) >= prev);  // monotone in the budget
        prev = token_count(reduced);
    }
    // full budget is byte-identical, not just token-identical
    CHECK(reduce_input(text, 1.0) == text);
    CHECK(reduce_input("", 0.5).empty());
    CHECK(token_count(reduce_input("a b c", 0.01)) == 1);  // ceil keeps at least one
}

TEST_CASE("bonded prompt marshals inputs, budget, and routing metadata") {
    Record rec;
    rec.source_id = "doc_1";
    rec.values = {{"contents", numbered_tokens(10)}, {"photo", "aGVsbG8="}};
    std::map<std::string, FieldKind> kinds{{"contents", FieldKind::string()},
                                           {"photo", FieldKind::bytes()}};
    std::vector<FieldSpec> targets{string_field("subject"), string_field("sender")};

    PromptRequest req = marshal_bonded_prompt(rec, targets, {"contents", "photo"}, kinds,
                                              /*one_to_many=*/false, 0.5);
    // bytes input became an image payload, not prompt text
    REQUIRE(req.image_payloads.size() == 1);
    CHECK(req.image_payloads[0] == "aGVsbG8=");
    CHECK(req.user_text.find("aGVsbG8=") == std::string::npos);
    // string input budget-reduced to 5 of 10 tokens
    CHECK(req.user_text.find("contents: t0 t1 t2 t3 t4\n") != std::string::npos);
    CHECK(req.user_text.find("t5") == std::string::npos);
    // target fields described by name, kind, and description
    CHECK(req.user_text.find("subject (string): subject description") != std::string::npos);
    CHECK(req.meta.op_kind == "convert");
    CHECK(req.meta.fields == std::vector<std::string>{"subject", "sender"});
    CHECK(req.meta.source_id == "doc_1");
    CHECK_FALSE(req.meta.one_to_many);

    PromptRequest many = marshal_bonded_prompt(rec, targets, {"contents"}, kinds, true, 1.0);
    CHECK(many.meta.one_to_many);
    CHECK(many.system_text.find("array") != std::string::npos);

    PromptRequest single = marshal_field_prompt(rec, targets[0], {"contents"}, kinds, 1.0);
    CHECK(single.meta.fields == std::vector<std::string>{"subject"});
}

TEST_CASE("filter prompt demands a one-word verdict") {
    Record rec;
    rec.source_id = "doc_2";
    rec.values = {{"contents", "quarterly revenue numbers"}};
    std::map<std::string, FieldKind> kinds{{"contents", FieldKind::string()}};
    PromptRequest req = marshal_filter_prompt(rec, "mentions revenue", {"contents"}, kinds, 1.0);
    CHECK(req.max_output_tokens == 4);
    CHECK(req.meta.op_kind == "filter");
    CHECK(req.meta.predicate == "mentions revenue");
    CHECK(req.user_text.find("mentions revenue") != std::string::npos);
    CHECK(req.user_text.find("quarterly revenue numbers") != std::string::npos);
}

TEST_CASE("extract_first_json finds balanced structures in free text") {
    auto v = extract_first_json("Sure! Here you go: {\"a\": 1, \"b\": [2, 3]} Hope that helps");
    REQUIRE(v.has_value());
    CHECK((*v)["a"] == 1);
    CHECK((*v)["b"].size() == 2);

    // braces inside strings and escapes do not confuse the scanner
    v = extract_first_json(R"(noise {"text": "closing } brace and \" quote", "n": 5} tail)");
    REQUIRE(v.has_value());
    CHECK((*v)["n"] == 5);

    // malformed candidate is skipped in favor of a later valid one
    v = extract_first_json("{not json} and then {\"ok\": true}");
    REQUIRE(v.has_value());
    CHECK((*v)["ok"] == true);

    v = extract_first_json("[1, 2, 3] trailing");
    REQUIRE(v.has_value());
    CHECK(v->is_array());

    CHECK_FALSE(extract_first_json("no structure here at all").has_value());
    CHECK_FALSE(extract_first_json("{unterminated").has_value());
    CHECK_FALSE(extract_first_json("").has_value());
}

TEST_CASE("parse_structured_response casts fields and enforces required ones") {
    std::vector<FieldSpec> fields{
        {"subject", "d", true, FieldKind::string()},
        {"price", "d", true, FieldKind::number()},
        {"note", "d", false, FieldKind::string()},
    };
    ParseResult r = parse_structured_response(
        "Answer: {\"subject\": \"hi\", \"price\": \"$1,250,000\"}", fields, false);
    REQUIRE(r.ok);
    REQUIRE(r.objects.size() == 1);
    CHECK(r.objects[0]["price"] == 1250000.0);
    CHECK_FALSE(r.objects[0].contains("note"));  // optional absent is fine

    // required field missing
    CHECK_FALSE(parse_structured_response("{\"subject\": \"hi\"}", fields, false).ok);
    // required field uncastable
    CHECK_FALSE(
        parse_structured_response("{\"subject\": \"hi\", \"price\": \"soon\"}", fields, false).ok);
    // no JSON at all
    ParseResult none = parse_structured_response("I would rather not.", fields, false);
    CHECK_FALSE(none.ok);
    CHECK_FALSE(none.error.empty());

    // oneToMany: array parses row by row; a bare object is wrapped
    std::vector<FieldSpec> one{{"name", "d", true, FieldKind::string()}};
    ParseResult rows = parse_structured_response(
        "[{\"name\": \"alice\"}, {\"name\": \"bob\"}]", one, true);
    REQUIRE(rows.ok);
    CHECK(rows.objects.size() == 2);
    ParseResult wrapped = parse_structured_response("{\"name\": \"carol\"}", one, true);
    REQUIRE(wrapped.ok);
    CHECK(wrapped.objects.size() == 1);
    // any bad row fails the whole response
    CHECK_FALSE(parse_structured_response("[{\"name\": \"a\"}, {}]", one, true).ok);
}

TEST_CASE("parse_field_response accepts object, bare JSON, and raw text forms") {
    FieldSpec subject{"subject", "d", true, FieldKind::string()};
    FieldSpec price{"price", "d", true, FieldKind::number()};

    auto v = parse_field_response("{\"subject\": \"board meeting\"}", subject);
    REQUIRE(v.has_value());
    CHECK(*v == "board meeting");

    v = parse_field_response("42.5", price);
    REQUIRE(v.has_value());
    CHECK(*v == 42.5);

    v = parse_field_response("  board meeting  \n", subject);
    REQUIRE(v.has_value());
    CHECK(*v == "board meeting");

    CHECK_FALSE(parse_field_response("no number here", price).has_value());
    CHECK_FALSE(parse_field_response("   ", subject).has_value());
}

TEST_CASE("parse_boolean_verdict normalizes the first word") {
    CHECK(parse_boolean_verdict("true"));
    CHECK(parse_boolean_verdict("True."));
    CHECK(parse_boolean_verdict("  YES, definitely"));
    CHECK(parse_boolean_verdict("1"));
    CHECK_FALSE(parse_boolean_verdict("false"));
    CHECK_FALSE(parse_boolean_verdict("No"));
    CHECK_FALSE(parse_boolean_verdict("certainly true"));  // first word decides
    CHECK_FALSE(parse_boolean_verdict(""));
    CHECK_FALSE(parse_boolean_verdict("I cannot help with that request."));
}

TEST_CASE("mock backend is deterministic and charges the exact token rates") {
    MockModelTable table;
    table.set_answer("*", "filter", "mentions fraud", "*", Value(true));
    MockBackend backend(table);
    ModelRegistry models = ModelRegistry::mock_defaults();
    const ModelSpec& cheap = models.get("mock-cheap");

    Record rec;
    rec.source_id = "d1";
    rec.values = {{"contents", "the fraud memo"}};
    std::map<std::string, FieldKind> kinds{{"contents", FieldKind::string()}};
    PromptRequest req = marshal_filter_prompt(rec, "mentions fraud", {"contents"}, kinds, 1.0);

    GenerationResult a = backend.generate(cheap, req);
    GenerationResult b = backend.generate(cheap, req);
    CHECK(a.text == "true");
    CHECK(a.text == b.text);
    CHECK(a.usd == b.usd);
    CHECK(backend.calls() == 2);
    backend.reset_calls();
    CHECK(backend.calls() == 0);

    // cost identity: usd is exactly tokens times the per-million rates
    std::int64_t in_tokens = token_count(req.system_text) + token_count(req.user_text);
    CHECK(a.input_tokens == in_tokens);
    CHECK(a.output_tokens == 1);
    CHECK(a.usd == in_tokens * cheap.usd_per_million_input_tokens / 1e6 +
                       1 * cheap.usd_per_million_output_tokens / 1e6);

    // image payloads are charged at the flat per-image token price
    req.image_payloads = {"aGVsbG8=", "d29ybGQ="};
    GenerationResult with_images = backend.generate(cheap, req);
    CHECK(with_images.input_tokens == in_tokens + 2 * kMockImageTokens);
}

TEST_CASE("mock answer table honors specificity and default behaviors") {
    MockModelTable table;
    table.default_behavior = "echo";
    table.set_answer("*", "filter", "p", "*", Value(false));
    table.set_answer("*", "filter", "p", "doc_3", Value(true));
    table.set_answer("mock-mid", "filter", "p", "*", Value(true));
    MockBackend backend(table);
    ModelRegistry models = ModelRegistry::mock_defaults();

    PromptRequest req;
    req.meta.op_kind = "filter";
    req.meta.predicate = "p";
    req.meta.source_id = "doc_1";
    // model-specific beats wildcard
    CHECK(backend.generate(models.get("mock-mid"), req).text == "true");
    CHECK(backend.generate(models.get("mock-cheap"), req).text == "false");
    // source-specific beats wildcard
    req.meta.source_id = "doc_3";
    CHECK(backend.generate(models.get("mock-cheap"), req).text == "true");

    // unmatched request falls back to the default behavior
    PromptRequest unmatched;
    unmatched.meta.op_kind = "filter";
    unmatched.meta.predicate = "unknown";
    unmatched.user_text = "echo me";
    CHECK(backend.generate(models.get("mock-cheap"), unmatched).text == "echo me");

    MockModelTable refusing;
    refusing.default_behavior = "refuse";
    MockBackend r(refusing);
    CHECK(r.generate(models.get("mock-cheap"), unmatched).text.find("cannot") !=
          std::string::npos);

    MockModelTable garbage;  // default default
    MockBackend g(garbage);
    CHECK_FALSE(parse_boolean_verdict(g.generate(models.get("mock-cheap"), unmatched).text));
}

TEST_CASE("mock convert answers assemble objects with field/object precedence") {
    MockModelTable table;
    table.set_answer("*", "convert", "__object__", "d1",
                     Value("{\"subject\": \"whole\", \"sender\": \"whole@x\"}"));
    table.set_answer("*", "convert", "subject", "d1", Value("field answer"));
    MockBackend backend(table);
    ModelRegistry models = ModelRegistry::mock_defaults();

    PromptRequest bonded;
    bonded.meta.op_kind = "convert";
    bonded.meta.source_id = "d1";
    bonded.meta.fields = {"subject", "sender"};
    // multi-field request: the whole-object entry wins
    Value whole = Value::parse(backend.generate(models.get("mock-cheap"), bonded).text);
    CHECK(whole["subject"] == "whole");

    // single-field request prefers its field-specific answer
    PromptRequest single = bonded;
    single.meta.fields = {"subject"};
    Value field = Value::parse(backend.generate(models.get("mock-cheap"), single).text);
    CHECK(field["subject"] == "field answer");

    // oneToMany requests wrap assembled objects in an array
    PromptRequest many;
    many.meta.op_kind = "convert";
    many.meta.source_id = "d2";
    many.meta.fields = {"subject"};
    many.meta.one_to_many = true;
    table.set_answer("*", "convert", "subject", "d2", Value("row"));
    MockBackend b2(table);
    Value rows = Value::parse(b2.generate(models.get("mock-cheap"), many).text);
    REQUIRE(rows.is_array());
    CHECK(rows[0]["subject"] == "row");
}

TEST_CASE("mock error injection is deterministic per request") {
    MockModelTable table;
    table.error_rate = 0.5;
    MockBackend backend(table);
    ModelRegistry models = ModelRegistry::mock_defaults();

    int errored = 0;
    for (int i = 0; i < 40; i++) {
        PromptRequest req;
        req.meta.op_kind = "filter";
        req.meta.op_id = "01_filter";
        req.meta.source_id = "doc_" + std::to_string(i);
        req.meta.predicate = "p";
        bool first_errors = false, second_errors = false;
        try {
            backend.generate(models.get("mock-cheap"), req);
        } catch (const BackendError&) {
            first_errors = true;
        }
        try {
            backend.generate(models.get("mock-cheap"), req);
        } catch (const BackendError&) {
            second_errors = true;
        }
        CHECK(first_errors == second_errors);  // same request, same fate
        if (first_errors) errored++;
    }
    CHECK(errored > 5);   // roughly half fail
    CHECK(errored < 35);

    MockModelTable clean;
    MockBackend never(clean);
    PromptRequest req;
    req.meta.op_kind = "filter";
    CHECK_NOTHROW(never.generate(models.get("mock-cheap"), req));
}

TEST_CASE("http request body follows the chat-completions wire format") {
    ModelSpec model;
    model.model_id = "remote-model";
    PromptRequest req;
    req.system_text = "be terse";
    req.user_text = "hello";
    req.max_output_tokens = 77;

    Value body = HttpBackend::build_request_body(model, req);
    CHECK(body["model"] == "remote-model");
    CHECK(body["max_tokens"] == 77);
    REQUIRE(body["messages"].size() == 2);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][0]["content"] == "be terse");
    CHECK(body["messages"][1]["role"] == "user");
    CHECK(body["messages"][1]["content"] == "hello");

    // images become multi-part user content with data URLs
    req.image_payloads = {"aGVsbG8="};
    Value with_img = HttpBackend::build_request_body(model, req);
    const Value& parts = with_img["messages"][1]["content"];
    REQUIRE(parts.is_array());
    CHECK(parts[0]["type"] == "text");
    CHECK(parts[1]["type"] == "image_url");
    CHECK(parts[1]["image_url"]["url"].get<std::string>().find("data:image/jpeg;base64,") == 0);

    // no system message when system text is empty
    PromptRequest bare;
    bare.user_text = "x";
    CHECK(HttpBackend::build_request_body(model, bare)["messages"].size() == 1);
}

TEST_CASE("http backend retries transient failures against a local stub server") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        int n = hits.fetch_add(1);
        if (n == 0) {  // first attempt: transient server error
            res.status = 500;
            return;
        }
        Value body = Value::parse(req.body);
        Value reply{{"choices", Value::array({Value{
                        {"message", Value{{"content", "stub says " +
                                                          body["model"].get<std::string>()}}}}})},
                    {"usage", Value{{"prompt_tokens", 12}, {"completion_tokens", 3}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ModelSpec model;
    model.model_id = "remote-model";
    model.endpoint = "http://127.0.0.1:" + std::to_string(port);
    model.usd_per_million_input_tokens = 1000.0;
    model.usd_per_million_output_tokens = 2000.0;

    HttpBackendConfig cfg;
    cfg.initial_backoff_s = 0.01;
    HttpBackend backend(cfg);
    PromptRequest req;
    req.user_text = "hello";
    GenerationResult result = backend.generate(model, req);
    CHECK(result.text == "stub says remote-model");
    CHECK(result.input_tokens == 12);   // provider-reported usage, not local count
    CHECK(result.output_tokens == 3);
    CHECK(result.usd == doctest::Approx(12 * 1000.0 / 1e6 + 3 * 2000.0 / 1e6));
    CHECK(hits.load() == 2);  // one failure, one success

    // endpoint-less models are rejected before any network traffic
    ModelSpec local;
    local.model_id = "no-endpoint";
    CHECK_THROWS_AS(backend.generate(local, req), BackendError);

    server.stop();
    server_thread.join();
}

TEST_CASE("http backend gives up after max_attempts") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        hits.fetch_add(1);
        res.status = 503;
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ModelSpec model;
    model.model_id = "remote-model";
    model.endpoint = "http://127.0.0.1:" + std::to_string(port);
    HttpBackendConfig cfg;
    cfg.initial_backoff_s = 0.01;
    cfg.max_attempts = 3;
    HttpBackend backend(cfg);
    PromptRequest req;
    req.user_text = "hello";
    CHECK_THROWS_AS(backend.generate(model, req), BackendError);
    CHECK(hits.load() == 3);

    server.stop();
    server_thread.join();
}

namespace {

std::vector<LabeledSample> email_samples() {
    std::vector<LabeledSample> samples;
    const char* senders[] = {"kenneth.lay@enron.com", "jeff.skilling@enron.com",
                             "andrew.fastow@enron.com"};
    const char* subjects[] = {"Q3 projections", "Board retreat agenda", "LJM partnership"};
    for (int i = 0; i < 3; i++) {
        LabeledSample s;
        s.input.source_id = "email_" + std::to_string(i);
        s.input.values = {{"contents", std::string("From: ") + senders[i] +
                                           "\nSubject: " + subjects[i] +
                                           "\n\nPlease review before Friday."}};
        s.expected = Value{{"sender", senders[i]}, {"subject", subjects[i]}};
        samples.push_back(s);
    }
    return samples;
}

}  // namespace

TEST_CASE("synthesized converter extracts headers with validation 1.0 and zero calls") {
    MockModelTable table;
    table.set_answer("*", "synthesize", "sender", "*",
                     Value{{"input_field", "contents"}, {"pattern", "From: (\\S+)"}});
    table.set_answer("*", "synthesize", "subject", "*",
                     Value{{"input_field", "contents"}, {"pattern", "Subject: (.*)"}});
    MockBackend backend(table);
    ModelRegistry models = ModelRegistry::mock_defaults();

    std::vector<FieldSpec> targets{string_field("sender"), string_field("subject")};
    auto samples = email_samples();
    SynthesizedConverter conv = synthesize_converter("01_convert_Email", samples, targets,
                                                     {"contents"}, backend,
                                                     models.get("mock-champion"));
    CHECK(conv.validation_score == doctest::Approx(1.0));
    REQUIRE(conv.rules.size() == 2);

    // applying the converter is pure computation: no backend traffic
    backend.reset_calls();
    Record fresh;
    fresh.source_id = "email_9";
    fresh.values = {{"contents", "From: sherron.watkins@enron.com\nSubject: Accounting "
                                 "concerns\n\nWe may have a problem."}};
    Value out = conv.apply(fresh);
    CHECK(out["sender"] == "sherron.watkins@enron.com");
    CHECK(out["subject"] == "Accounting concerns");
    CHECK(backend.calls() == 0);
}

TEST_CASE("synthesis degrades to score zero without usable patterns or samples") {
    MockModelTable garbage;  // default behavior yields no parseable pattern
    MockBackend backend(garbage);
    ModelRegistry models = ModelRegistry::mock_defaults();
    std::vector<FieldSpec> targets{string_field("sender")};

    SynthesizedConverter conv = synthesize_converter(
        "op", email_samples(), targets, {"contents"}, backend, models.get("mock-champion"));
    CHECK(conv.validation_score == doctest::Approx(0.0));

    // fewer than two samples: no synthesis attempt at all
    backend.reset_calls();
    SynthesizedConverter empty = synthesize_converter(
        "op", {email_samples()[0]}, targets, {"contents"}, backend,
        models.get("mock-champion"));
    CHECK(empty.validation_score == 0.0);
    CHECK(empty.rules.empty());
    CHECK(backend.calls() == 0);

    // an invalid regex never throws; the field is simply absent
    ExtractionRule bad{"sender", "contents", "([unclosed", FieldKind::string()};
    Record rec;
    rec.values = {{"contents", "From: a@b.c"}};
    CHECK_FALSE(bad.apply(rec).has_value());
}

TEST_CASE("extraction rules and converter stores round-trip through json") {
    ExtractionRule rule{"price", "contents", "\\$(\\d+)", FieldKind::number()};
    ExtractionRule back = ExtractionRule::from_json(rule.to_json());
    CHECK(back.field == "price");
    CHECK(back.input_field == "contents");
    CHECK(back.pattern == "\\$(\\d+)");
    CHECK(back.kind.to_string() == "number");

    Record rec;
    rec.values = {{"contents", "listed at $750000 today"}};
    auto v = back.apply(rec);
    REQUIRE(v.has_value());
    CHECK(*v == 750000.0);
    // no match: absent, not an error
    rec.values["contents"] = "price on request";
    CHECK_FALSE(back.apply(rec).has_value());

    SynthesizedConverter conv;
    conv.op_id = "02_convert_Listing";
    conv.rules = {rule};
    conv.validation_score = 0.75;
    ConverterStore store;
    store.put(conv);
    ConverterStore loaded = ConverterStore::from_json(store.to_json());
    const SynthesizedConverter* got = loaded.get("02_convert_Listing");
    REQUIRE(got != nullptr);
    CHECK(got->validation_score == doctest::Approx(0.75));
    REQUIRE(got->rules.size() == 1);
    CHECK(got->rules[0].pattern == "\\$(\\d+)");
    CHECK(loaded.get("missing") == nullptr);
}
