#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sempipe/backend.hpp"
#include "sempipe/record.hpp"
#include "sempipe/schema.hpp"

namespace sempipe {

/// Prefix truncation: retain the first ceil(budget * token_count) whitespace
/// tokens. Budget 1.0 returns the text unchanged.
std::string reduce_input(const std::string& text, double budget);

/// One prompt requesting all target fields together as a single structured
/// object (a list of objects for oneToMany). Input fields are marshaled as
/// labeled key-value text; string inputs are budget-reduced; bytes inputs
/// become image payloads.
PromptRequest marshal_bonded_prompt(const Record& record,
                                    const std::vector<FieldSpec>& target_fields,
                                    const std::vector<std::string>& input_fields,
                                    const std::map<std::string, FieldKind>& input_kinds,
                                    bool one_to_many, double token_budget);

/// Per-field variant: one prompt for a single target field.
PromptRequest marshal_field_prompt(const Record& record, const FieldSpec& target_field,
                                   const std::vector<std::string>& input_fields,
                                   const std::map<std::string, FieldKind>& input_kinds,
                                   double token_budget);

/// Filter prompt demanding a single true/false verdict.
PromptRequest marshal_filter_prompt(const Record& record, const std::string& predicate,
                                    const std::vector<std::string>& input_fields,
                                    const std::map<std::string, FieldKind>& input_kinds,
                                    double token_budget);

struct ParseResult {
    bool ok = false;
    std::vector<Value> objects;  // one object, or several for oneToMany
    std::string error;
};

/// Extracts the first well-formed structured object (or list) from the text,
/// applies kind casts, and fails when a required target field is missing.
/// Parse failure is a value, not an exception: the caller falls back to
/// per-field prompts and ultimately drops the record.
ParseResult parse_structured_response(const std::string& text,
                                      const std::vector<FieldSpec>& target_fields,
                                      bool one_to_many);

/// Single-field response: accepts {"field": value} or the bare value text.
std::optional<Value> parse_field_response(const std::string& text, const FieldSpec& field);

/// Verdict normalization; any response not parseable as a boolean counts as
/// false (the record is dropped).
bool parse_boolean_verdict(const std::string& text);

// First balanced JSON object or array embedded in free text, if any.
std::optional<Value> extract_first_json(const std::string& text);

}  // namespace sempipe
