#pragma once

#include <stdexcept>
#include <string>

namespace sempipe {

enum class Strategy { Hardcoded, Udf, LlmBondedWithFallback, LlmPerField, CodeSynth };

inline std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Hardcoded: return "hardcoded";
        case Strategy::Udf: return "udf";
        case Strategy::LlmBondedWithFallback: return "bonded_with_fallback";
        case Strategy::LlmPerField: return "per_field";
        case Strategy::CodeSynth: return "code_synth";
    }
    return "hardcoded";
}

inline Strategy strategy_from_string(const std::string& s) {
    if (s == "hardcoded") return Strategy::Hardcoded;
    if (s == "udf") return Strategy::Udf;
    if (s == "bonded_with_fallback") return Strategy::LlmBondedWithFallback;
    if (s == "per_field") return Strategy::LlmPerField;
    if (s == "code_synth") return Strategy::CodeSynth;
    throw std::invalid_argument("unknown strategy '" + s + "'");
}

inline bool is_llm_strategy(Strategy s) {
    return s == Strategy::LlmBondedWithFallback || s == Strategy::LlmPerField;
}

}  // namespace sempipe
