#include "sempipe/physical_plan.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "sempipe/fingerprint.hpp"

namespace sempipe {

std::string PhysicalOpConfig::canonical() const {
    std::ostringstream ss;
    ss << logical_op_id << '|' << to_string(strategy) << '|' << model_id.value_or("") << '|'
       << token_budget;
    return ss.str();
}

std::string PhysicalPlan::fingerprint() const {
    return prefix_fingerprint(logical.operators.size(), "");
}

std::string PhysicalPlan::prefix_fingerprint(size_t length,
                                             const std::string& backend_identity) const {
    Fnv1a h;
    h.update(backend_identity);
    for (size_t i = 0; i < length && i < logical.operators.size(); i++) {
        h.update(logical.operators[i].canonical());
        h.update(configs[i].canonical());
    }
    return h.hex();
}

const PhysicalOpConfig& PhysicalPlan::config_for(const std::string& op_id) const {
    for (const PhysicalOpConfig& c : configs)
        if (c.logical_op_id == op_id) return c;
    throw PlanError("no physical config for operator '" + op_id + "'");
}

std::string validate_physical(const PhysicalPlan& plan) {
    if (plan.configs.size() != plan.logical.operators.size())
        return "config count does not match operator count";
    for (size_t i = 0; i < plan.configs.size(); i++) {
        const LogicalOperator& op = plan.logical.operators[i];
        const PhysicalOpConfig& cfg = plan.configs[i];
        if (cfg.logical_op_id != op.op_id) return "config order does not match operator order";
        if (cfg.token_budget <= 0.0 || cfg.token_budget > 1.0)
            return "token budget out of range on " + op.op_id;
        if (cfg.strategy == Strategy::Hardcoded || cfg.strategy == Strategy::Udf) {
            if (cfg.model_id) return "non-LLM strategy must not carry a model on " + op.op_id;
            if (cfg.token_budget != 1.0)
                return "non-LLM strategy must use token budget 1.0 on " + op.op_id;
        }
        if (is_llm_strategy(cfg.strategy) && !cfg.model_id)
            return "LLM strategy requires a model on " + op.op_id;
        if (cfg.strategy == Strategy::CodeSynth && cfg.token_budget != 1.0)
            return "code_synth must use token budget 1.0 on " + op.op_id;
        if (op.is_llm_requiring() && cfg.strategy == Strategy::Hardcoded &&
            op.kind == OpKind::Filter)
            return "textual filter cannot be hardcoded on " + op.op_id;
        if (!op.udf.empty() && cfg.strategy != Strategy::Udf)
            return "UDF operator must use the udf strategy on " + op.op_id;
    }
    return {};
}

std::map<std::string, FieldKind> field_kinds_before(const LogicalPlan& plan, size_t index,
                                                    const SchemaRegistry& schemas) {
    std::map<std::string, FieldKind> kinds;
    for (size_t i = 0; i < index && i < plan.operators.size(); i++) {
        const LogicalOperator& op = plan.operators[i];
        if (op.kind == OpKind::Scan || op.kind == OpKind::Convert) {
            for (const FieldSpec& f : schemas.effective_fields(op.target_schema))
                kinds.insert_or_assign(f.name, f.kind);
        } else if (op.kind == OpKind::Project) {
            std::set<std::string> kept(op.columns.begin(), op.columns.end());
            for (auto it = kinds.begin(); it != kinds.end();)
                it = kept.count(it->first) ? std::next(it) : kinds.erase(it);
        } else if (op.kind == OpKind::GroupBy || op.kind == OpKind::Aggregate) {
            std::map<std::string, FieldKind> next;
            for (const std::string& g : op.group_fields) {
                auto it = kinds.find(g);
                next.emplace(g, it != kinds.end() ? it->second : FieldKind::string());
            }
            next.emplace(op.agg_field.empty() ? op.agg_function
                                              : op.agg_function + "_" + op.agg_field,
                         FieldKind::number());
            kinds = std::move(next);
        }
    }
    return kinds;
}

bool is_vision_dependent(const LogicalPlan& plan, size_t op_index,
                         const SchemaRegistry& schemas) {
    const LogicalOperator& op = plan.operators[op_index];
    auto kinds = field_kinds_before(plan, op_index, schemas);
    for (const std::string& field : op.depends_on) {
        auto it = kinds.find(field);
        if (it != kinds.end() && it->second.contains_bytes()) return true;
    }
    return false;
}

std::vector<FieldSpec> fields_to_generate(const LogicalPlan& plan, size_t op_index,
                                          const SchemaRegistry& schemas) {
    const LogicalOperator& op = plan.operators[op_index];
    auto kinds = field_kinds_before(plan, op_index, schemas);
    std::vector<FieldSpec> out;
    for (const FieldSpec& f : schemas.effective_fields(op.target_schema))
        if (!kinds.count(f.name)) out.push_back(f);
    return out;
}

namespace {

// Fixed (non-varying) config for a non-LLM operator.
PhysicalOpConfig fixed_config(const LogicalOperator& op) {
    PhysicalOpConfig cfg;
    cfg.logical_op_id = op.op_id;
    cfg.strategy = op.udf.empty() ? Strategy::Hardcoded : Strategy::Udf;
    return cfg;
}

}  // namespace

bool code_synth_admissible(const LogicalPlan& plan, size_t op_index,
                           const SchemaRegistry& schemas) {
    const LogicalOperator& op = plan.operators[op_index];
    if (op.kind != OpKind::Convert || !op.udf.empty()) return false;
    if (op.cardinality == Cardinality::OneToMany) return false;
    if (is_vision_dependent(plan, op_index, schemas)) return false;
    auto targets = fields_to_generate(plan, op_index, schemas);
    if (targets.empty()) return false;
    for (const FieldSpec& f : targets) {
        if (f.kind.base != FieldKind::Base::String && f.kind.base != FieldKind::Base::Number)
            return false;
    }
    return true;
}

std::vector<PhysicalPlan> enumerate_physical(const std::vector<LogicalPlan>& logical_plans,
                                             const ParamSpace& space,
                                             const ModelRegistry& models,
                                             const SchemaRegistry& schemas) {
    if (space.model_ids.empty() || space.strategies.empty() || space.token_budgets.empty())
        throw PlanError("physical parameter space must not be empty");

    std::vector<PhysicalPlan> out;
    std::set<std::string> seen;

    for (const LogicalPlan& plan : logical_plans) {
        // per-operator choice lists
        std::vector<std::vector<PhysicalOpConfig>> choices;
        for (size_t i = 0; i < plan.operators.size(); i++) {
            const LogicalOperator& op = plan.operators[i];
            if (!op.is_llm_requiring()) {
                choices.push_back({fixed_config(op)});
                continue;
            }
            if (op.kind == OpKind::Convert && fields_to_generate(plan, i, schemas).empty()) {
                choices.push_back({fixed_config(op)});
                continue;
            }
            const bool vision = is_vision_dependent(plan, i, schemas);
            std::vector<PhysicalOpConfig> opts;
            for (Strategy strategy : space.strategies) {
                if (strategy == Strategy::Hardcoded || strategy == Strategy::Udf) continue;
                if (strategy == Strategy::CodeSynth) {
                    if (!code_synth_admissible(plan, i, schemas)) continue;
                    PhysicalOpConfig cfg;
                    cfg.logical_op_id = op.op_id;
                    cfg.strategy = Strategy::CodeSynth;
                    cfg.model_id = models.champion().model_id;  // synthesis model
                    cfg.token_budget = 1.0;
                    opts.push_back(cfg);
                    continue;
                }
                for (const std::string& model_id : space.model_ids) {
                    const ModelSpec& m = models.get(model_id);
                    if (vision != (m.tier == ModelTier::Vision)) continue;
                    for (double budget : space.token_budgets) {
                        PhysicalOpConfig cfg;
                        cfg.logical_op_id = op.op_id;
                        cfg.strategy = strategy;
                        cfg.model_id = model_id;
                        cfg.token_budget = budget;
                        opts.push_back(cfg);
                    }
                }
            }
            if (opts.empty())
                throw PlanError("no admissible physical option for operator " + op.op_id);
            choices.push_back(std::move(opts));
        }

        // cartesian product
        std::vector<size_t> idx(choices.size(), 0);
        while (true) {
            PhysicalPlan candidate;
            candidate.logical = plan;
            for (size_t i = 0; i < choices.size(); i++)
                candidate.configs.push_back(choices[i][idx[i]]);
            std::string fp = candidate.fingerprint();
            if (seen.insert(fp).second) out.push_back(std::move(candidate));

            size_t k = choices.size();
            bool advanced = false;
            while (k > 0) {
                k--;
                if (++idx[k] < choices[k].size()) { advanced = true; break; }
                idx[k] = 0;
            }
            if (!advanced) break;
        }
    }

    std::vector<std::pair<std::string, size_t>> keyed(out.size());
    for (size_t i = 0; i < out.size(); i++) keyed[i] = {out[i].fingerprint(), i};
    std::sort(keyed.begin(), keyed.end());
    std::vector<PhysicalPlan> sorted;
    sorted.reserve(out.size());
    for (const auto& [fp, i] : keyed) sorted.push_back(std::move(out[i]));
    return sorted;
}

std::vector<PhysicalPlan> make_sentinels(const LogicalPlan& plan, const ModelRegistry& models,
                                         const SchemaRegistry& schemas) {
    bool has_llm = false, has_vision = false;
    for (size_t i = 0; i < plan.operators.size(); i++) {
        if (plan.operators[i].is_llm_requiring() &&
            !(plan.operators[i].kind == OpKind::Convert &&
              fields_to_generate(plan, i, schemas).empty())) {
            has_llm = true;
            if (is_vision_dependent(plan, i, schemas)) has_vision = true;
        }
    }

    std::optional<ModelSpec> vision = models.vision_model();
    if (has_vision && !vision) throw ModelError("plan needs a vision-tier model, none configured");

    auto build = [&](const ModelSpec& model) {
        PhysicalPlan p;
        p.logical = plan;
        for (size_t i = 0; i < plan.operators.size(); i++) {
            const LogicalOperator& op = plan.operators[i];
            if (!op.is_llm_requiring() ||
                (op.kind == OpKind::Convert && fields_to_generate(plan, i, schemas).empty())) {
                p.configs.push_back(fixed_config(op));
                continue;
            }
            PhysicalOpConfig cfg;
            cfg.logical_op_id = op.op_id;
            cfg.strategy = Strategy::LlmBondedWithFallback;
            cfg.model_id = is_vision_dependent(plan, i, schemas) ? vision->model_id
                                                                 : model.model_id;
            cfg.token_budget = 1.0;
            p.configs.push_back(cfg);
        }
        return p;
    };

    std::vector<PhysicalPlan> out;
    if (!has_llm) {
        out.push_back(build(models.champion()));  // degenerate: one hard-coded plan
        return out;
    }
    for (ModelTier tier : {ModelTier::Cheap, ModelTier::Mid, ModelTier::Champion}) {
        auto model = models.of_tier(tier);
        if (!model) throw ModelError("sentinels need a " + to_string(tier) + "-tier model");
        out.push_back(build(*model));
    }
    return out;
}

std::vector<PhysicalPlan> naive_eliminate(const std::vector<PhysicalPlan>& candidates,
                                          const StatsTable& stats,
                                          const std::vector<PhysicalPlan>& sentinels) {
    std::set<std::string> sentinel_fps;
    for (const PhysicalPlan& s : sentinels) sentinel_fps.insert(s.fingerprint());

    std::vector<PhysicalPlan> out;
    std::set<std::string> seen;
    for (const PhysicalPlan& plan : candidates) {
        std::string fp = plan.fingerprint();
        if (seen.count(fp)) continue;
        if (!sentinel_fps.count(fp)) {
            if (!validate_physical(plan).empty()) continue;
            bool zero_quality = false;
            for (const PhysicalOpConfig& cfg : plan.configs) {
                if (cfg.model_id && is_llm_strategy(cfg.strategy) &&
                    stats.has_zero_quality(cfg.logical_op_id, *cfg.model_id)) {
                    zero_quality = true;
                    break;
                }
            }
            if (zero_quality) continue;
        }
        seen.insert(fp);
        out.push_back(plan);
    }
    // sentinels are always members of the surviving set
    for (const PhysicalPlan& s : sentinels) {
        if (!seen.count(s.fingerprint())) {
            seen.insert(s.fingerprint());
            out.push_back(s);
        }
    }
    return out;
}

}  // namespace sempipe
