#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sempipe/logical_plan.hpp"
#include "sempipe/model_registry.hpp"
#include "sempipe/stats.hpp"
#include "sempipe/strategy.hpp"

namespace sempipe {

struct PhysicalOpConfig {
    std::string logical_op_id;
    Strategy strategy = Strategy::Hardcoded;
    std::optional<std::string> model_id;
    double token_budget = 1.0;

    std::string canonical() const;
};

struct PhysicalPlan {
    LogicalPlan logical;
    std::vector<PhysicalOpConfig> configs;  // one per logical operator, same order

    std::string fingerprint() const;
    // Fingerprint of the plan prefix [0, length); backend identity goes into
    // cache keys because different backends yield different results.
    std::string prefix_fingerprint(size_t length, const std::string& backend_identity) const;

    const PhysicalOpConfig& config_for(const std::string& op_id) const;
};

// Empty string when valid, else a description of the violated invariant.
std::string validate_physical(const PhysicalPlan& plan);

struct ParamSpace {
    std::vector<std::string> model_ids;
    std::vector<Strategy> strategies{Strategy::LlmBondedWithFallback, Strategy::LlmPerField,
                                     Strategy::CodeSynth};
    std::vector<double> token_budgets{0.1, 0.5, 0.9, 1.0};
};

/// Cartesian expansion of (strategy, model, budget) choices over every
/// LLM-requiring operator of every logical plan. UDF/hardcoded operators are
/// fixed; vision-dependent converts are restricted to vision-tier models.
/// Output deduplicated by fingerprint and sorted by fingerprint.
std::vector<PhysicalPlan> enumerate_physical(const std::vector<LogicalPlan>& logical_plans,
                                             const ParamSpace& space,
                                             const ModelRegistry& models,
                                             const SchemaRegistry& schemas);

/// Three hard-coded plans (all-cheap / all-mid / all-champion, bonded, budget
/// 1.0) over the user-declared operator order; collapses to one plan when the
/// plan has no LLM-requiring operators. Vision-dependent operators are bound
/// to the configured vision model in every sentinel.
std::vector<PhysicalPlan> make_sentinels(const LogicalPlan& plan, const ModelRegistry& models,
                                         const SchemaRegistry& schemas);

/// Removes fingerprint duplicates, invariant violators, and plans that assign
/// a model with sampled quality 0 on an operator. Sentinels always survive.
std::vector<PhysicalPlan> naive_eliminate(const std::vector<PhysicalPlan>& candidates,
                                          const StatsTable& stats,
                                          const std::vector<PhysicalPlan>& sentinels);

// True when code synthesis can implement the convert at `op_index`: a oneToOne
// textual convert whose generated fields are all string or number.
bool code_synth_admissible(const LogicalPlan& plan, size_t op_index,
                           const SchemaRegistry& schemas);

// True when the operator's depends_on includes a bytes-bearing field.
bool is_vision_dependent(const LogicalPlan& plan, size_t op_index, const SchemaRegistry& schemas);

// Fields a convert at this position must generate: target's effective fields
// not already available.
std::vector<FieldSpec> fields_to_generate(const LogicalPlan& plan, size_t op_index,
                                          const SchemaRegistry& schemas);

// Kinds of the fields available before the operator at `index`.
std::map<std::string, FieldKind> field_kinds_before(const LogicalPlan& plan, size_t index,
                                                    const SchemaRegistry& schemas);

}  // namespace sempipe
