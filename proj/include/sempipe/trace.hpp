#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sempipe/logical_plan.hpp"
#include "sempipe/strategy.hpp"
#include "sempipe/value.hpp"

namespace sempipe {

enum class Outcome { Emitted, Dropped, Error };

/// One (record, operator) execution event.
struct TraceEntry {
    std::string op_id;
    OpKind op_kind = OpKind::Scan;
    Cardinality cardinality = Cardinality::OneToOne;
    Strategy strategy = Strategy::Hardcoded;
    std::string model_id;  // empty for non-LLM strategies
    double token_budget = 1.0;

    std::string source_id;
    double latency_s = 0.0;
    double usd = 0.0;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    Outcome outcome = Outcome::Emitted;
    std::int64_t emitted = 1;  // records produced (0 when dropped, >1 for oneToMany)

    // Generated field values (object, or array of objects for oneToMany);
    // retained so operator quality can be scored against the champion.
    Value output_values;
};

struct ExecutionTrace {
    std::vector<TraceEntry> entries;

    double total_usd() const;
    double total_latency_s() const;

    struct OpTotals {
        std::int64_t inputs = 0;
        std::int64_t emitted = 0;
        std::int64_t dropped = 0;
        std::int64_t errored = 0;
        double usd = 0.0;
        double latency_s = 0.0;
    };
    OpTotals totals_for(const std::string& op_id) const;
};

}  // namespace sempipe
