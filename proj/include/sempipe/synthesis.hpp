#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sempipe/backend.hpp"
#include "sempipe/record.hpp"
#include "sempipe/schema.hpp"

namespace sempipe {

/// One synthesized extraction rule: a regular expression with a single capture
/// group applied to a named input field, followed by a cast to the target
/// kind. No match (or an unusable pattern) yields an absent field.
struct ExtractionRule {
    std::string field;  // target field this rule produces
    std::string input_field;
    std::string pattern;  // empty when synthesis produced nothing usable
    FieldKind kind;

    std::optional<Value> apply(const Record& record) const;
    Value to_json() const;
    static ExtractionRule from_json(const Value& doc);
};

/// A synthesized converter for one logical operator: one rule per generated
/// field, plus the validation score measured against the labeling model's
/// outputs on the synthesis samples.
struct SynthesizedConverter {
    std::string op_id;
    std::vector<ExtractionRule> rules;
    double validation_score = 0.0;

    // Applies every rule; absent fields are simply omitted.
    Value apply(const Record& record) const;
    Value to_json() const;
    static SynthesizedConverter from_json(const Value& doc);
};

/// A labeled synthesis sample: the operator's input record and the output
/// object produced for it by the labeling (champion) model.
struct LabeledSample {
    Record input;
    Value expected;  // object of generated fields
};

/// Asks the backend for one extraction pattern per target field, then scores
/// the resulting rules against the samples. Requires at least two samples;
/// fewer yield an empty converter with score 0.
SynthesizedConverter synthesize_converter(
    const std::string& op_id, const std::vector<LabeledSample>& samples,
    const std::vector<FieldSpec>& target_fields, const std::vector<std::string>& input_fields,
    Backend& backend, const ModelSpec& model);

/// Fraction of samples where applying the converter reproduces the expected
/// object exactly (after casting both sides through the target kinds).
double validate_converter(const SynthesizedConverter& converter,
                          const std::vector<LabeledSample>& samples,
                          const std::vector<FieldSpec>& target_fields);

/// Per-operator storage for synthesized converters, so the executor can run a
/// code_synth plan without re-synthesizing.
class ConverterStore {
public:
    void put(SynthesizedConverter converter);
    const SynthesizedConverter* get(const std::string& op_id) const;
    bool has(const std::string& op_id) const { return get(op_id) != nullptr; }

    Value to_json() const;
    static ConverterStore from_json(const Value& doc);

private:
    std::map<std::string, SynthesizedConverter> converters_;
};

}  // namespace sempipe
