#include "sempipe/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "sempipe/tokens.hpp"

namespace sempipe {

std::string Policy::to_string() const {
    switch (kind) {
        case Kind::MaxQualityAtFixedCost:
            return "max-quality-at-cost=" + std::to_string(threshold);
        case Kind::MaxQualityAtFixedRuntime:
            return "max-quality-at-runtime=" + std::to_string(threshold);
        case Kind::MinCostAtFixedQuality:
            return "min-cost-at-quality=" + std::to_string(threshold);
    }
    return "";
}

Policy Policy::parse(const std::string& text) {
    auto eq = text.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("policy needs '=<threshold>'");
    std::string name = text.substr(0, eq);
    double threshold = std::stod(text.substr(eq + 1));
    Policy p;
    p.threshold = threshold;
    if (name == "max-quality-at-cost") p.kind = Kind::MaxQualityAtFixedCost;
    else if (name == "max-quality-at-runtime") p.kind = Kind::MaxQualityAtFixedRuntime;
    else if (name == "min-cost-at-quality") p.kind = Kind::MinCostAtFixedQuality;
    else throw std::invalid_argument("unknown policy '" + name + "'");
    if (p.threshold <= 0) throw std::invalid_argument("policy threshold must be positive");
    if (p.kind == Kind::MinCostAtFixedQuality && p.threshold > 1.0)
        throw std::invalid_argument("min_quality must be in (0,1]");
    return p;
}

namespace {

double token_f1(const std::string& a, const std::string& b) {
    auto ta = tokenize(a);
    auto tb = tokenize(b);
    if (ta.empty() && tb.empty()) return 1.0;
    if (ta.empty() || tb.empty()) return 0.0;
    std::map<std::string, int> counts;
    for (const auto& t : ta) counts[t]++;
    int overlap = 0;
    for (const auto& t : tb) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            it->second--;
            overlap++;
        }
    }
    if (overlap == 0) return 0.0;
    double precision = static_cast<double>(overlap) / static_cast<double>(tb.size());
    double recall = static_cast<double>(overlap) / static_cast<double>(ta.size());
    return 2.0 * precision * recall / (precision + recall);
}

double field_score(const Value& cand, const Value& champ, const FieldKind& kind) {
    switch (kind.base) {
        case FieldKind::Base::String:
            if (!cand.is_string() || !champ.is_string()) return cand == champ ? 1.0 : 0.0;
            return token_f1(champ.get<std::string>(), cand.get<std::string>());
        case FieldKind::Base::Number:
        case FieldKind::Base::Boolean:
        case FieldKind::Base::Bytes:
        case FieldKind::Base::List:
            return cand == champ ? 1.0 : 0.0;
    }
    return 0.0;
}

// Mean field score of one generated object against the champion's.
double object_score(const Value& cand, const Value& champ,
                    const std::vector<FieldSpec>& fields) {
    if (fields.empty()) return cand == champ ? 1.0 : 0.0;
    double sum = 0.0;
    for (const FieldSpec& f : fields) {
        bool cand_has = cand.is_object() && cand.contains(f.name) && !cand.at(f.name).is_null();
        bool champ_has = champ.is_object() && champ.contains(f.name) && !champ.at(f.name).is_null();
        if (!cand_has && !champ_has) {
            sum += 1.0;
        } else if (cand_has && champ_has) {
            sum += field_score(cand.at(f.name), champ.at(f.name), f.kind);
        }
        // one-sided: full mismatch, contributes 0
    }
    return sum / static_cast<double>(fields.size());
}

double record_convert_score(const Value& cand, const Value& champ,
                            const std::vector<FieldSpec>& fields) {
    if (cand.is_array() || champ.is_array()) {
        // oneToMany: align row objects by index; length mismatch scores 0 for extras
        const Value ca = cand.is_array() ? cand : Value::array({cand});
        const Value ch = champ.is_array() ? champ : Value::array({champ});
        size_t n = std::max(ca.size(), ch.size());
        if (n == 0) return 1.0;
        double sum = 0.0;
        for (size_t i = 0; i < std::min(ca.size(), ch.size()); i++)
            sum += object_score(ca[i], ch[i], fields);
        return sum / static_cast<double>(n);
    }
    return object_score(cand, champ, fields);
}

}  // namespace

double score_quality_vs_champion(const OpOutputs& candidate, const OpOutputs& champion,
                                 const std::vector<FieldSpec>& target_fields) {
    if (candidate.is_filter) {
        std::set<std::string> ids;
        for (const auto& [id, _] : candidate.decisions) ids.insert(id);
        for (const auto& [id, _] : champion.decisions) ids.insert(id);
        if (ids.empty()) return 1.0;
        int agree = 0;
        for (const std::string& id : ids) {
            auto c = candidate.decisions.find(id);
            auto h = champion.decisions.find(id);
            if (c != candidate.decisions.end() && h != champion.decisions.end() &&
                c->second == h->second)
                agree++;
            // absent from one side: full mismatch
        }
        return static_cast<double>(agree) / static_cast<double>(ids.size());
    }

    std::set<std::string> ids;
    for (const auto& [id, _] : candidate.outputs) ids.insert(id);
    for (const auto& [id, _] : champion.outputs) ids.insert(id);
    if (ids.empty()) return 1.0;
    double sum = 0.0;
    for (const std::string& id : ids) {
        auto c = candidate.outputs.find(id);
        auto h = champion.outputs.find(id);
        if (c == candidate.outputs.end() || h == champion.outputs.end()) continue;  // mismatch, 0
        sum += record_convert_score(c->second, h->second, target_fields);
    }
    return sum / static_cast<double>(ids.size());
}

namespace {

struct Accumulator {
    std::int64_t inputs = 0;
    std::int64_t emitted = 0;
    double latency = 0.0;
    double usd = 0.0;
    OpKind op_kind = OpKind::Scan;
    Cardinality cardinality = Cardinality::OneToOne;
    OpOutputs outputs;
};

OpOutputs champion_outputs_for(const ExecutionTrace& champion_trace, const std::string& op_id,
                               bool is_filter) {
    OpOutputs out;
    out.is_filter = is_filter;
    for (const TraceEntry& e : champion_trace.entries) {
        if (e.op_id != op_id) continue;
        if (is_filter) out.decisions[e.source_id] = (e.outcome == Outcome::Emitted);
        else if (e.outcome == Outcome::Emitted) out.outputs[e.source_id] = e.output_values;
    }
    return out;
}

}  // namespace

StatsTable aggregate_stats(const std::vector<std::pair<PhysicalPlan, ExecutionTrace>>& runs,
                           const PhysicalPlan& champion_plan,
                           const ExecutionTrace& champion_trace,
                           const SchemaRegistry& schemas) {
    if (champion_trace.entries.empty() && !runs.empty())
        throw std::runtime_error("champion trace is empty; quality reference required");

    std::map<StatKey, Accumulator> acc;
    for (const auto& [plan, trace] : runs) {
        for (const TraceEntry& e : trace.entries) {
            StatKey key{e.op_id, e.strategy, e.model_id, e.token_budget};
            Accumulator& a = acc[key];
            a.inputs++;
            a.latency += e.latency_s;
            a.usd += e.usd;
            a.op_kind = e.op_kind;
            a.cardinality = e.cardinality;
            if (e.outcome == Outcome::Emitted) a.emitted += e.emitted;
            if (e.op_kind == OpKind::Filter) {
                a.outputs.is_filter = true;
                a.outputs.decisions[e.source_id] = (e.outcome == Outcome::Emitted);
            } else if (e.op_kind == OpKind::Convert && e.outcome == Outcome::Emitted) {
                a.outputs.outputs[e.source_id] = e.output_values;
            }
        }
    }

    // target fields per convert op, from the champion plan's declared order
    std::map<std::string, std::vector<FieldSpec>> targets;
    for (size_t i = 0; i < champion_plan.logical.operators.size(); i++) {
        const LogicalOperator& op = champion_plan.logical.operators[i];
        if (op.kind == OpKind::Convert)
            targets[op.op_id] = fields_to_generate(champion_plan.logical, i, schemas);
    }

    StatsTable table;
    for (const auto& [key, a] : acc) {
        OperatorStats s;
        s.n_samples = a.inputs;
        if (a.inputs > 0) {
            s.mean_latency_s = a.latency / static_cast<double>(a.inputs);
            s.mean_usd = a.usd / static_cast<double>(a.inputs);
            double ratio = static_cast<double>(a.emitted) / static_cast<double>(a.inputs);
            if (a.op_kind == OpKind::Filter) s.selectivity = ratio;
            else if (a.op_kind == OpKind::Convert) {
                if (a.cardinality == Cardinality::OneToMany) s.fanout = ratio;
                else s.selectivity = std::min(ratio, 1.0);
            }
        }
        const LogicalOperator* op = champion_plan.logical.find(key.op_id);
        bool llm_backed = is_llm_strategy(key.strategy) || key.strategy == Strategy::CodeSynth;
        if (op && llm_backed) {
            const PhysicalOpConfig& champ_cfg = champion_plan.config_for(key.op_id);
            StatKey champ_key{key.op_id, champ_cfg.strategy,
                              champ_cfg.model_id.value_or(""), champ_cfg.token_budget};
            if (key == champ_key) {
                s.quality = 1.0;  // champion is the reference
            } else {
                bool is_filter = op->kind == OpKind::Filter;
                OpOutputs champ = champion_outputs_for(champion_trace, key.op_id, is_filter);
                auto it = targets.find(key.op_id);
                s.quality = score_quality_vs_champion(
                    a.outputs, champ, it != targets.end() ? it->second : std::vector<FieldSpec>{});
            }
        }
        table.set(key, s);
    }
    return table;
}

namespace {

double quality_prior(const std::map<double, double>& priors, double budget) {
    auto it = priors.find(budget);
    if (it != priors.end()) return it->second;
    // interpolate between surrounding grid points
    auto hi = priors.upper_bound(budget);
    if (hi == priors.begin()) return hi->second;
    if (hi == priors.end()) return std::prev(hi)->second;
    auto lo = std::prev(hi);
    double t = (budget - lo->first) / (hi->first - lo->first);
    return lo->second + t * (hi->second - lo->second);
}

}  // namespace

PlanEstimate estimate(const PhysicalPlan& plan, const StatsTable& stats,
                      std::int64_t input_count, const ModelRegistry& models,
                      const EstimateConfig& config) {
    PlanEstimate est;
    est.plan_fingerprint = plan.fingerprint();

    double card = static_cast<double>(input_count);
    for (size_t i = 0; i < plan.logical.operators.size(); i++) {
        const LogicalOperator& op = plan.logical.operators[i];
        const PhysicalOpConfig& cfg = plan.configs[i];
        if (op.kind == OpKind::Scan) continue;

        StatKey key{op.op_id, cfg.strategy, cfg.model_id.value_or(""), cfg.token_budget};
        auto found = stats.get(key);
        double quality_scale = 1.0;
        if (!found && (is_llm_strategy(cfg.strategy))) {
            // borrow the matching-tier sentinel's budget-1.0 stats
            ModelTier tier = models.get(*cfg.model_id).tier;
            std::string sentinel_model = *cfg.model_id;
            if (auto m = models.of_tier(tier); m && tier != ModelTier::Vision)
                sentinel_model = m->model_id;
            StatKey borrowed{op.op_id, Strategy::LlmBondedWithFallback, sentinel_model, 1.0};
            found = stats.get(borrowed);
            if (found) {
                OperatorStats s = *found;
                s.mean_usd *= cfg.token_budget;
                s.mean_latency_s *= cfg.token_budget;  // input-side latency scaling
                found = s;
                quality_scale = quality_prior(config.budget_quality_prior, cfg.token_budget);
            } else {
                // The tier's sentinel never reached this operator (everything
                // was dropped upstream). Cost from the champion's stats; the
                // model's quality here is unobserved, so score it zero rather
                // than guess.
                StatKey champ_key{op.op_id, Strategy::LlmBondedWithFallback,
                                  models.champion().model_id, 1.0};
                if (auto champ = stats.get(champ_key)) {
                    OperatorStats s = *champ;
                    s.mean_usd *= cfg.token_budget;
                    s.mean_latency_s *= cfg.token_budget;
                    s.quality = 0.0;
                    found = s;
                }
            }
        }
        if (!found && cfg.strategy == Strategy::CodeSynth) {
            // no converter was synthesized for this operator: free but useless
            OperatorStats s;
            s.quality = 0.0;
            s.mean_usd = 0.0;
            s.mean_latency_s = 0.0;
            found = s;
        }
        if (!found && op.is_llm_requiring() && cfg.strategy != Strategy::Hardcoded)
            throw std::runtime_error("no stats for operator " + op.op_id + " with strategy " +
                                     to_string(cfg.strategy));

        OperatorStats s = found.value_or(OperatorStats{});
        if (std::isnan(s.mean_latency_s) || std::isnan(s.mean_usd) || s.mean_latency_s < 0 ||
            s.mean_usd < 0)
            throw std::runtime_error("invalid stats for operator " + op.op_id);

        double n_in = card;
        if (config.workers > 1)
            est.est_runtime_s +=
                std::ceil(n_in / static_cast<double>(config.workers)) * s.mean_latency_s;
        else
            est.est_runtime_s += n_in * s.mean_latency_s;
        est.est_usd += n_in * s.mean_usd;

        bool llm_backed = is_llm_strategy(cfg.strategy) || cfg.strategy == Strategy::CodeSynth;
        if (llm_backed && op.is_llm_requiring())
            est.est_quality *= std::clamp(s.quality * quality_scale, 0.0, 1.0);

        switch (op.kind) {
            case OpKind::Filter: card *= s.selectivity; break;
            case OpKind::Convert:
                card *= (op.cardinality == Cardinality::OneToMany) ? s.fanout : s.selectivity;
                break;
            case OpKind::Limit: card = std::min(card, static_cast<double>(op.limit_n)); break;
            case OpKind::Aggregate: card = 1.0; break;
            default: break;
        }
    }
    if (!std::isfinite(est.est_runtime_s) || !std::isfinite(est.est_usd) ||
        !std::isfinite(est.est_quality))
        throw std::runtime_error("non-finite plan estimate");
    return est;
}

namespace {

bool dominates(const PlanEstimate& q, const PlanEstimate& p) {
    if (q.est_runtime_s > p.est_runtime_s || q.est_usd > p.est_usd ||
        q.est_quality < p.est_quality)
        return false;
    return q.est_runtime_s < p.est_runtime_s || q.est_usd < p.est_usd ||
           q.est_quality > p.est_quality;
}

}  // namespace

std::vector<PlanEstimate> pareto_frontier(const std::vector<PlanEstimate>& estimates) {
    // Sort so that any dominator of p precedes p, then sweep against the kept
    // prefix only.
    std::vector<size_t> order(estimates.size());
    for (size_t i = 0; i < order.size(); i++) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const PlanEstimate& x = estimates[a];
        const PlanEstimate& y = estimates[b];
        if (x.est_runtime_s != y.est_runtime_s) return x.est_runtime_s < y.est_runtime_s;
        if (x.est_usd != y.est_usd) return x.est_usd < y.est_usd;
        if (x.est_quality != y.est_quality) return x.est_quality > y.est_quality;
        return a < b;
    });
    std::vector<bool> keep(estimates.size(), false);
    std::vector<size_t> kept;
    for (size_t idx : order) {
        bool dominated = false;
        for (size_t k : kept) {
            if (dominates(estimates[k], estimates[idx])) {
                dominated = true;
                break;
            }
        }
        if (!dominated) {
            keep[idx] = true;
            kept.push_back(idx);
        }
    }
    std::vector<PlanEstimate> out;
    for (size_t i = 0; i < estimates.size(); i++)
        if (keep[i]) out.push_back(estimates[i]);
    return out;
}

ChoiceResult choose(const std::vector<PlanEstimate>& frontier, const Policy& policy) {
    if (frontier.empty()) throw std::runtime_error("cannot choose from an empty frontier");

    auto tie_break_less = [](const PlanEstimate& a, const PlanEstimate& b) {
        if (a.est_usd != b.est_usd) return a.est_usd < b.est_usd;
        if (a.est_runtime_s != b.est_runtime_s) return a.est_runtime_s < b.est_runtime_s;
        return a.plan_fingerprint < b.plan_fingerprint;
    };

    auto satisfies = [&](const PlanEstimate& e) {
        switch (policy.kind) {
            case Policy::Kind::MaxQualityAtFixedCost: return e.est_usd <= policy.threshold;
            case Policy::Kind::MaxQualityAtFixedRuntime:
                return e.est_runtime_s <= policy.threshold;
            case Policy::Kind::MinCostAtFixedQuality: return e.est_quality >= policy.threshold;
        }
        return false;
    };

    // objective: "better" comparison among satisfying plans
    auto better = [&](const PlanEstimate& a, const PlanEstimate& b) {
        switch (policy.kind) {
            case Policy::Kind::MaxQualityAtFixedCost:
            case Policy::Kind::MaxQualityAtFixedRuntime:
                if (a.est_quality != b.est_quality) return a.est_quality > b.est_quality;
                break;
            case Policy::Kind::MinCostAtFixedQuality:
                if (a.est_usd != b.est_usd) return a.est_usd < b.est_usd;
                break;
        }
        return tie_break_less(a, b);
    };

    const PlanEstimate* best = nullptr;
    for (const PlanEstimate& e : frontier) {
        if (!satisfies(e)) continue;
        if (!best || better(e, *best)) best = &e;
    }
    if (best) return {*best, true};

    // constraint unmet: minimize violation
    auto violation = [&](const PlanEstimate& e) {
        switch (policy.kind) {
            case Policy::Kind::MaxQualityAtFixedCost: return e.est_usd - policy.threshold;
            case Policy::Kind::MaxQualityAtFixedRuntime:
                return e.est_runtime_s - policy.threshold;
            case Policy::Kind::MinCostAtFixedQuality: return policy.threshold - e.est_quality;
        }
        return 0.0;
    };
    for (const PlanEstimate& e : frontier) {
        if (!best || violation(e) < violation(*best) ||
            (violation(e) == violation(*best) && tie_break_less(e, *best)))
            best = &e;
    }
    return {*best, false};
}

}  // namespace sempipe
