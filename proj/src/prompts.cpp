#include "sempipe/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "sempipe/tokens.hpp"

namespace sempipe {

std::string reduce_input(const std::string& text, double budget) {
    if (budget >= 1.0) return text;
    auto toks = tokenize(text);
    auto keep = static_cast<size_t>(
        std::ceil(budget * static_cast<double>(toks.size())));
    if (keep >= toks.size()) return text;
    std::ostringstream out;
    for (size_t i = 0; i < keep; i++) {
        if (i) out << ' ';
        out << toks[i];
    }
    return out.str();
}

namespace {

const char* kConvertSystem =
    "You extract structured fields from documents. Answer with exactly one JSON "
    "object and nothing else.";
const char* kConvertManySystem =
    "You extract structured rows from documents. Answer with exactly one JSON "
    "array of objects and nothing else.";
const char* kFilterSystem =
    "You are a precise classifier. Answer with a single word: true or false.";

// Labeled key-value text for the record's input fields. String values are
// budget-reduced; bytes-bearing fields become image payloads instead.
void marshal_inputs(const Record& record, const std::vector<std::string>& input_fields,
                    const std::map<std::string, FieldKind>& input_kinds, double token_budget,
                    std::ostringstream& text, std::vector<std::string>& images) {
    for (const std::string& name : input_fields) {
        if (!record.has(name)) continue;
        const Value& v = record.values.at(name);
        auto kind_it = input_kinds.find(name);
        bool is_bytes = kind_it != input_kinds.end() && kind_it->second.contains_bytes();
        if (is_bytes) {
            if (v.is_string()) images.push_back(v.get<std::string>());
            else if (v.is_array())
                for (const Value& img : v)
                    if (img.is_string()) images.push_back(img.get<std::string>());
            continue;
        }
        text << name << ": ";
        if (v.is_string()) text << reduce_input(v.get<std::string>(), token_budget);
        else text << v.dump();
        text << "\n";
    }
}

void describe_targets(const std::vector<FieldSpec>& fields, std::ostringstream& text) {
    for (const FieldSpec& f : fields)
        text << "- " << f.name << " (" << f.kind.to_string() << "): " << f.description << "\n";
}

}  // namespace

PromptRequest marshal_bonded_prompt(const Record& record,
                                    const std::vector<FieldSpec>& target_fields,
                                    const std::vector<std::string>& input_fields,
                                    const std::map<std::string, FieldKind>& input_kinds,
                                    bool one_to_many, double token_budget) {
    PromptRequest req;
    req.system_text = one_to_many ? kConvertManySystem : kConvertSystem;
    std::ostringstream user;
    user << "Input data:\n";
    marshal_inputs(record, input_fields, input_kinds, token_budget, user, req.image_payloads);
    user << "\nCompute the following fields:\n";
    describe_targets(target_fields, user);
    if (one_to_many)
        user << "\nRespond with a JSON array; each element is an object with one key per "
                "field above.\n";
    else
        user << "\nRespond with one JSON object with one key per field above.\n";
    req.user_text = user.str();
    req.meta.op_kind = "convert";
    req.meta.one_to_many = one_to_many;
    req.meta.source_id = record.source_id;
    for (const FieldSpec& f : target_fields) req.meta.fields.push_back(f.name);
    return req;
}

PromptRequest marshal_field_prompt(const Record& record, const FieldSpec& target_field,
                                   const std::vector<std::string>& input_fields,
                                   const std::map<std::string, FieldKind>& input_kinds,
                                   double token_budget) {
    return marshal_bonded_prompt(record, {target_field}, input_fields, input_kinds,
                                 /*one_to_many=*/false, token_budget);
}

PromptRequest marshal_filter_prompt(const Record& record, const std::string& predicate,
                                    const std::vector<std::string>& input_fields,
                                    const std::map<std::string, FieldKind>& input_kinds,
                                    double token_budget) {
    PromptRequest req;
    req.system_text = kFilterSystem;
    std::ostringstream user;
    user << "Input data:\n";
    marshal_inputs(record, input_fields, input_kinds, token_budget, user, req.image_payloads);
    user << "\nDoes the input satisfy this condition?\n" << predicate
         << "\n\nAnswer true or false.\n";
    req.user_text = user.str();
    req.max_output_tokens = 4;
    req.meta.op_kind = "filter";
    req.meta.predicate = predicate;
    req.meta.source_id = record.source_id;
    return req;
}

std::optional<Value> extract_first_json(const std::string& text) {
    for (size_t i = 0; i < text.size(); i++) {
        char open = text[i];
        if (open != '{' && open != '[') continue;
        char close = open == '{' ? '}' : ']';
        int depth = 0;
        bool in_string = false, escaped = false;
        for (size_t j = i; j < text.size(); j++) {
            char c = text[j];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == open) depth++;
            else if (c == close) {
                depth--;
                if (depth == 0) {
                    Value parsed = Value::parse(text.substr(i, j - i + 1), nullptr, false);
                    if (!parsed.is_discarded()) return parsed;
                    break;  // malformed at this start; try the next one
                }
            }
        }
    }
    return std::nullopt;
}

namespace {

// Casts the fields of one candidate object; nullopt when a required target
// field is missing or uncastable.
std::optional<Value> cast_object(const Value& obj, const std::vector<FieldSpec>& fields) {
    if (!obj.is_object()) return std::nullopt;
    Value out = Value::object();
    for (const FieldSpec& f : fields) {
        if (!obj.contains(f.name) || obj.at(f.name).is_null()) {
            if (f.required) return std::nullopt;
            continue;
        }
        auto cast = cast_to_kind(obj.at(f.name), f.kind);
        if (!cast) {
            if (f.required) return std::nullopt;
            continue;
        }
        out[f.name] = *cast;
    }
    return out;
}

}  // namespace

ParseResult parse_structured_response(const std::string& text,
                                      const std::vector<FieldSpec>& target_fields,
                                      bool one_to_many) {
    ParseResult result;
    auto parsed = extract_first_json(text);
    if (!parsed) {
        result.error = "no structured object found in response";
        return result;
    }
    if (one_to_many) {
        Value arr = parsed->is_array() ? *parsed : Value::array({*parsed});
        for (const Value& obj : arr) {
            auto cast = cast_object(obj, target_fields);
            if (!cast) {
                result.error = "row missing a required field";
                result.objects.clear();
                return result;
            }
            result.objects.push_back(*cast);
        }
        result.ok = true;
        return result;
    }
    const Value& obj = parsed->is_array() ? (parsed->empty() ? *parsed : (*parsed)[0]) : *parsed;
    auto cast = cast_object(obj, target_fields);
    if (!cast) {
        result.error = "response missing a required field";
        return result;
    }
    result.objects.push_back(*cast);
    result.ok = true;
    return result;
}

std::optional<Value> parse_field_response(const std::string& text, const FieldSpec& field) {
    if (auto parsed = extract_first_json(text)) {
        if (parsed->is_object() && parsed->contains(field.name))
            return cast_to_kind(parsed->at(field.name), field.kind);
        if (!parsed->is_object() && !parsed->is_array())
            return cast_to_kind(*parsed, field.kind);
    }
    // bare value: trim and cast
    std::string trimmed = text;
    auto b = trimmed.find_first_not_of(" \t\r\n");
    auto e = trimmed.find_last_not_of(" \t\r\n");
    if (b == std::string::npos) return std::nullopt;
    trimmed = trimmed.substr(b, e - b + 1);
    return cast_to_kind(Value(trimmed), field.kind);
}

bool parse_boolean_verdict(const std::string& text) {
    std::string s;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else if (!s.empty())
            break;  // first word only
    }
    return s == "true" || s == "yes" || s == "1";
}

}  // namespace sempipe
