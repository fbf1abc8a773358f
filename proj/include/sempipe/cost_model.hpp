#pragma once

#include <map>
#include <string>
#include <vector>

#include "sempipe/physical_plan.hpp"
#include "sempipe/stats.hpp"
#include "sempipe/trace.hpp"

namespace sempipe {

struct PlanEstimate {
    std::string plan_fingerprint;
    double est_runtime_s = 0.0;
    double est_usd = 0.0;
    double est_quality = 1.0;
};

struct Policy {
    enum class Kind { MaxQualityAtFixedCost, MaxQualityAtFixedRuntime, MinCostAtFixedQuality };
    Kind kind = Kind::MinCostAtFixedQuality;
    double threshold = 0.8;  // max_usd | max_s | min_quality

    std::string to_string() const;
    // Parses "max-quality-at-cost=<usd>", "max-quality-at-runtime=<seconds>",
    // "min-cost-at-quality=<fraction>".
    static Policy parse(const std::string& text);
};

/// Per-operator outputs of one sampled run, keyed by originating source_id.
struct OpOutputs {
    bool is_filter = false;
    std::map<std::string, bool> decisions;  // filters: keep/drop per source_id
    std::map<std::string, Value> outputs;   // converts: generated fields per source_id
};

/// Champion agreement in [0,1]. Filters: agreement rate on keep/drop.
/// Converts: mean over records and fields of field score (exact match for
/// number/boolean, token-level F1 for strings). Records present on only one
/// side count as full mismatch.
double score_quality_vs_champion(const OpOutputs& candidate, const OpOutputs& champion,
                                 const std::vector<FieldSpec>& target_fields);

/// Folds sentinel traces into a stats table. Quality is scored against the
/// champion trace; the champion's own keys score 1.0 by definition.
StatsTable aggregate_stats(const std::vector<std::pair<PhysicalPlan, ExecutionTrace>>& runs,
                           const PhysicalPlan& champion_plan,
                           const ExecutionTrace& champion_trace,
                           const SchemaRegistry& schemas);

struct EstimateConfig {
    int workers = 1;  // 1 = serial
    // quality multiplier applied when borrowing budget-1.0 sentinel stats
    std::map<double, double> budget_quality_prior{{0.1, 0.7}, {0.5, 0.9}, {0.9, 0.97}, {1.0, 1.0}};
};

PlanEstimate estimate(const PhysicalPlan& plan, const StatsTable& stats,
                      std::int64_t input_count, const ModelRegistry& models,
                      const EstimateConfig& config = {});

/// Plans not dominated in (runtime, usd, quality). All-equal ties survive.
std::vector<PlanEstimate> pareto_frontier(const std::vector<PlanEstimate>& estimates);

struct ChoiceResult {
    PlanEstimate chosen;
    bool constraint_met = true;
};

/// Policy-optimal frontier member. When no plan meets the constraint, returns
/// the plan minimizing constraint violation with constraint_met = false.
/// Deterministic tie-break: lower usd, then lower runtime, then fingerprint.
ChoiceResult choose(const std::vector<PlanEstimate>& frontier, const Policy& policy);

}  // namespace sempipe
