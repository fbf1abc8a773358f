#include "sempipe/synthesis.hpp"

#include <regex>
#include <sstream>

#include "sempipe/prompts.hpp"

namespace sempipe {

std::optional<Value> ExtractionRule::apply(const Record& record) const {
    if (pattern.empty() || !record.has(input_field)) return std::nullopt;
    const Value& v = record.values.at(input_field);
    if (!v.is_string()) return std::nullopt;
    try {
        std::regex re(pattern);
        std::smatch m;
        const std::string text = v.get<std::string>();
        if (!std::regex_search(text, m, re)) return std::nullopt;
        // capture group 1 when present, else the whole match
        std::string captured = m.size() > 1 && m[1].matched ? m[1].str() : m[0].str();
        return cast_to_kind(Value(captured), kind);
    } catch (const std::regex_error&) {
        return std::nullopt;
    }
}

Value ExtractionRule::to_json() const {
    return Value{{"field", field},
                 {"input_field", input_field},
                 {"pattern", pattern},
                 {"kind", kind.to_string()}};
}

ExtractionRule ExtractionRule::from_json(const Value& doc) {
    ExtractionRule rule;
    rule.field = doc.at("field").get<std::string>();
    rule.input_field = doc.at("input_field").get<std::string>();
    rule.pattern = doc.at("pattern").get<std::string>();
    rule.kind = FieldKind::parse(doc.at("kind").get<std::string>());
    return rule;
}

Value SynthesizedConverter::apply(const Record& record) const {
    Value out = Value::object();
    for (const ExtractionRule& rule : rules)
        if (auto v = rule.apply(record)) out[rule.field] = *v;
    return out;
}

Value SynthesizedConverter::to_json() const {
    Value rs = Value::array();
    for (const ExtractionRule& r : rules) rs.push_back(r.to_json());
    return Value{{"op_id", op_id}, {"rules", rs}, {"validation_score", validation_score}};
}

SynthesizedConverter SynthesizedConverter::from_json(const Value& doc) {
    SynthesizedConverter conv;
    conv.op_id = doc.at("op_id").get<std::string>();
    conv.validation_score = doc.at("validation_score").get<double>();
    for (const Value& r : doc.at("rules")) conv.rules.push_back(ExtractionRule::from_json(r));
    return conv;
}

namespace {

// The synthesis prompt shows each sample's inputs and the labeled output and
// asks for one single-capture regular expression per target field, as a JSON
// object {field: {"input_field": ..., "pattern": ...}}.
PromptRequest build_synthesis_prompt(const std::string& op_id,
                                     const std::vector<LabeledSample>& samples,
                                     const std::vector<FieldSpec>& target_fields,
                                     const std::vector<std::string>& input_fields) {
    PromptRequest req;
    req.system_text =
        "You write extraction rules. For each requested field, supply a regular "
        "expression with exactly one capture group that extracts the field's value "
        "from one named input field. Answer with one JSON object mapping each field "
        "name to {\"input_field\": name, \"pattern\": regex} and nothing else.";
    std::ostringstream user;
    user << "Labeled examples:\n";
    for (size_t i = 0; i < samples.size(); i++) {
        user << "--- example " << (i + 1) << " ---\n";
        for (const std::string& name : input_fields)
            if (samples[i].input.has(name) && samples[i].input.values.at(name).is_string())
                user << name << ": " << samples[i].input.values.at(name).get<std::string>()
                     << "\n";
        user << "expected: " << samples[i].expected.dump() << "\n";
    }
    user << "\nFields to extract:\n";
    for (const FieldSpec& f : target_fields)
        user << "- " << f.name << " (" << f.kind.to_string() << "): " << f.description << "\n";
    req.user_text = user.str();
    req.meta.op_id = op_id;
    req.meta.op_kind = "synthesize";
    for (const FieldSpec& f : target_fields) req.meta.fields.push_back(f.name);
    if (!samples.empty()) req.meta.source_id = samples.front().input.source_id;
    return req;
}

const FieldSpec* find_field(const std::vector<FieldSpec>& fields, const std::string& name) {
    for (const FieldSpec& f : fields)
        if (f.name == name) return &f;
    return nullptr;
}

}  // namespace

SynthesizedConverter synthesize_converter(
    const std::string& op_id, const std::vector<LabeledSample>& samples,
    const std::vector<FieldSpec>& target_fields, const std::vector<std::string>& input_fields,
    Backend& backend, const ModelSpec& model) {
    SynthesizedConverter conv;
    conv.op_id = op_id;
    if (samples.size() < 2) return conv;
    for (const FieldSpec& f : target_fields)
        conv.rules.push_back({f.name, input_fields.empty() ? "" : input_fields.front(), "",
                              f.kind});

    PromptRequest req = build_synthesis_prompt(op_id, samples, target_fields, input_fields);
    std::string text;
    try {
        text = backend.generate(model, req).text;
    } catch (const BackendError&) {
        return conv;
    }
    auto parsed = extract_first_json(text);
    if (!parsed || !parsed->is_object()) return conv;

    for (ExtractionRule& rule : conv.rules) {
        if (!parsed->contains(rule.field)) continue;
        const Value& entry = parsed->at(rule.field);
        if (entry.is_string()) {
            rule.pattern = entry.get<std::string>();
        } else if (entry.is_object() && entry.contains("pattern")) {
            rule.pattern = entry.at("pattern").get<std::string>();
            if (entry.contains("input_field"))
                rule.input_field = entry.at("input_field").get<std::string>();
        }
    }
    conv.validation_score = validate_converter(conv, samples, target_fields);
    return conv;
}

double validate_converter(const SynthesizedConverter& converter,
                          const std::vector<LabeledSample>& samples,
                          const std::vector<FieldSpec>& target_fields) {
    if (samples.empty()) return 0.0;
    size_t exact = 0;
    for (const LabeledSample& sample : samples) {
        Value got = converter.apply(sample.input);
        // cast the label through the target kinds so "0.60" and 0.6 compare equal
        Value want = Value::object();
        for (const auto& [name, v] : sample.expected.items()) {
            const FieldSpec* spec = find_field(target_fields, name);
            if (!spec) continue;
            if (auto cast = cast_to_kind(v, spec->kind)) want[name] = *cast;
            else want[name] = v;
        }
        if (got == want) exact++;
    }
    return static_cast<double>(exact) / static_cast<double>(samples.size());
}

void ConverterStore::put(SynthesizedConverter converter) {
    converters_[converter.op_id] = std::move(converter);
}

const SynthesizedConverter* ConverterStore::get(const std::string& op_id) const {
    auto it = converters_.find(op_id);
    return it == converters_.end() ? nullptr : &it->second;
}

Value ConverterStore::to_json() const {
    Value arr = Value::array();
    for (const auto& [_, conv] : converters_) arr.push_back(conv.to_json());
    return Value{{"converters", arr}};
}

ConverterStore ConverterStore::from_json(const Value& doc) {
    ConverterStore store;
    for (const Value& c : doc.at("converters"))
        store.put(SynthesizedConverter::from_json(c));
    return store;
}

}  // namespace sempipe
