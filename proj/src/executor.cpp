#include "sempipe/executor.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "sempipe/fingerprint.hpp"
#include "sempipe/prompts.hpp"
#include "sempipe/tokens.hpp"

namespace sempipe {

namespace {

std::string strategy_enum_name(Strategy s) {
    switch (s) {
        case Strategy::Hardcoded: return "HARDCODED";
        case Strategy::Udf: return "UDF";
        case Strategy::LlmBondedWithFallback: return "BONDED_WITH_FALLBACK";
        case Strategy::LlmPerField: return "PER_FIELD";
        case Strategy::CodeSynth: return "CODE_SYNTH";
    }
    return "UNKNOWN";
}

std::string format_budget(double budget) {
    std::ostringstream ss;
    ss << budget;
    return ss.str();
}

Value merge_values(const Value& base, const Value& extra) {
    Value out = base;
    for (const auto& [k, v] : extra.items()) out[k] = v;
    return out;
}

}  // namespace

std::string plan_listing(const PhysicalPlan& plan) {
    std::ostringstream out;
    for (size_t i = 0; i < plan.logical.operators.size(); i++) {
        const LogicalOperator& op = plan.logical.operators[i];
        const PhysicalOpConfig& cfg = plan.configs[i];
        out << ' ' << i << ". " << to_string(op.kind);
        if (op.kind == OpKind::Scan)
            out << " -> " << op.target_schema << " [" << op.dataset_id << "]";
        else if (op.kind == OpKind::Convert)
            out << " -> " << op.target_schema;
        else if (op.kind == OpKind::Filter)
            out << " [" << (op.udf.empty() ? op.predicate : "udf:" + op.udf) << "]";
        else if (op.kind == OpKind::Limit)
            out << " [" << op.limit_n << "]";
        out << "\n";
        if (cfg.strategy != Strategy::Hardcoded || op.kind == OpKind::Convert) {
            if (cfg.model_id) out << "    Using " << *cfg.model_id << "\n";
            out << "    Token budget: " << format_budget(cfg.token_budget) << "\n";
            out << "    Query strategy: QueryStrategy." << strategy_enum_name(cfg.strategy)
                << "\n";
        }
    }
    return out.str();
}

/// Precomputed per-operator execution context.
struct Engine::Stage {
    const LogicalOperator* op = nullptr;
    const PhysicalOpConfig* cfg = nullptr;
    std::optional<ModelSpec> model;
    std::vector<std::string> input_fields;
    std::map<std::string, FieldKind> input_kinds;
    std::vector<FieldSpec> targets;  // fields a convert must generate
    bool one_to_many = false;
};

namespace {

TraceEntry base_entry(const Engine::Stage& stage, const Record& record) {
    TraceEntry e;
    e.op_id = stage.op->op_id;
    e.op_kind = stage.op->kind;
    e.cardinality = stage.op->cardinality;
    e.strategy = stage.cfg->strategy;
    e.model_id = stage.cfg->model_id.value_or("");
    e.token_budget = stage.cfg->token_budget;
    e.source_id = record.source_id;
    return e;
}

Record with_lineage(Record rec, const Engine::Stage& stage) {
    rec.lineage.emplace_back(stage.op->op_id, stage.cfg->canonical());
    return rec;
}

// All required generated fields present in the object?
bool required_present(const Value& obj, const std::vector<FieldSpec>& targets) {
    for (const FieldSpec& f : targets) {
        if (!f.required) continue;
        if (!obj.is_object() || !obj.contains(f.name) || obj.at(f.name).is_null()) return false;
    }
    return true;
}

std::int64_t prompt_tokens(const PromptRequest& req) {
    return token_count(req.system_text) + token_count(req.user_text) +
           kMockImageTokens * static_cast<std::int64_t>(req.image_payloads.size());
}

}  // namespace

std::vector<Record> Engine::scan_inputs(const LogicalPlan& plan,
                                        std::optional<std::int64_t> limit) const {
    if (plan.operators.empty() || plan.operators[0].kind != OpKind::Scan)
        throw ExecError("plan must start with a scan operator");
    const LogicalOperator& scan_op = plan.operators[0];
    ScanResult res = scan(sources_.get(scan_op.dataset_id), schemas_);
    if (limit && static_cast<std::int64_t>(res.records.size()) > *limit)
        res.records.resize(static_cast<size_t>(*limit));
    return std::move(res.records);
}

std::vector<Record> Engine::apply_record(const Stage& stage, const Record& record,
                                         TraceEntry& entry) {
    entry = base_entry(stage, record);
    const LogicalOperator& op = *stage.op;
    const PhysicalOpConfig& cfg = *stage.cfg;

    auto drop = [&](Outcome outcome) {
        entry.outcome = outcome;
        entry.emitted = 0;
        return std::vector<Record>{};
    };
    auto pass_through = [&]() {
        entry.emitted = 1;
        return std::vector<Record>{with_lineage(record, stage)};
    };

    // non-model dispatch first
    if (op.kind == OpKind::Project) {
        Record out = record;
        Value kept = Value::object();
        for (const std::string& col : op.columns)
            if (record.values.contains(col)) kept[col] = record.values.at(col);
        out.values = std::move(kept);
        entry.emitted = 1;
        return {with_lineage(std::move(out), stage)};
    }
    if (op.kind == OpKind::Filter && cfg.strategy == Strategy::Udf)
        return udfs_.filter(op.udf)(record) ? pass_through() : drop(Outcome::Dropped);
    if (op.kind == OpKind::Convert && cfg.strategy == Strategy::Udf) {
        auto obj = udfs_.convert(op.udf)(record);
        if (!obj) return drop(Outcome::Dropped);
        Record out = record;
        out.schema = op.target_schema;
        out.values = merge_values(record.values, *obj);
        entry.emitted = 1;
        entry.output_values = *obj;
        return {with_lineage(std::move(out), stage)};
    }
    if (op.kind == OpKind::Convert && cfg.strategy == Strategy::Hardcoded) {
        // every target field is already available; just adopt the schema
        Record out = record;
        out.schema = op.target_schema;
        entry.emitted = 1;
        entry.output_values = Value::object();
        return {with_lineage(std::move(out), stage)};
    }
    if (op.kind == OpKind::Convert && cfg.strategy == Strategy::CodeSynth) {
        const SynthesizedConverter* conv = converters_.get(op.op_id);
        if (!conv)
            throw ExecError("no synthesized converter for operator " + op.op_id +
                            "; run sentinel sampling first");
        Value obj = conv->apply(record);
        entry.output_values = obj;
        if (!required_present(obj, stage.targets)) return drop(Outcome::Dropped);
        Record out = record;
        out.schema = op.target_schema;
        out.values = merge_values(record.values, obj);
        entry.emitted = 1;
        return {with_lineage(std::move(out), stage)};
    }

    // model-backed dispatch
    const ModelSpec& model = *stage.model;
    auto run_prompt = [&](PromptRequest req) -> std::optional<GenerationResult> {
        req.model_id = model.model_id;
        req.meta.op_id = op.op_id;
        if (prompt_tokens(req) > model.context_limit_tokens) return std::nullopt;
        GenerationResult gen = backend_.generate(model, req);
        entry.latency_s += gen.latency_s;
        entry.usd += gen.usd;
        entry.input_tokens += gen.input_tokens;
        entry.output_tokens += gen.output_tokens;
        return gen;
    };

    try {
        if (op.kind == OpKind::Filter) {
            auto gen = run_prompt(marshal_filter_prompt(record, op.predicate,
                                                        stage.input_fields, stage.input_kinds,
                                                        cfg.token_budget));
            if (!gen) return drop(Outcome::Error);
            return parse_boolean_verdict(gen->text) ? pass_through() : drop(Outcome::Dropped);
        }

        // convert
        Value obj;
        std::vector<Value> rows;
        bool got = false;
        if (cfg.strategy == Strategy::LlmBondedWithFallback) {
            auto gen = run_prompt(marshal_bonded_prompt(record, stage.targets,
                                                        stage.input_fields, stage.input_kinds,
                                                        stage.one_to_many, cfg.token_budget));
            if (!gen) return drop(Outcome::Error);
            ParseResult parsed =
                parse_structured_response(gen->text, stage.targets, stage.one_to_many);
            if (parsed.ok) {
                rows = std::move(parsed.objects);
                got = true;
            }
        }
        if (!got && !stage.one_to_many &&
            (cfg.strategy == Strategy::LlmPerField ||
             cfg.strategy == Strategy::LlmBondedWithFallback)) {
            // per-field prompts: primary mode for per_field, fallback for bonded
            Value assembled = Value::object();
            for (const FieldSpec& f : stage.targets) {
                auto gen = run_prompt(marshal_field_prompt(record, f, stage.input_fields,
                                                           stage.input_kinds, cfg.token_budget));
                if (!gen) continue;
                if (auto v = parse_field_response(gen->text, f)) assembled[f.name] = *v;
            }
            rows = {assembled};
            got = true;
        }
        if (!got) return drop(Outcome::Dropped);

        std::vector<Record> out;
        Value emitted_rows = Value::array();
        for (Value& row : rows) {
            if (!required_present(row, stage.targets)) continue;
            Record rec = record;
            rec.schema = op.target_schema;
            rec.values = merge_values(record.values, row);
            out.push_back(with_lineage(std::move(rec), stage));
            emitted_rows.push_back(row);
        }
        if (out.empty()) return drop(Outcome::Dropped);
        entry.emitted = static_cast<std::int64_t>(out.size());
        entry.output_values = stage.one_to_many ? emitted_rows : emitted_rows[0];
        return out;
    } catch (const BackendError&) {
        return drop(Outcome::Error);
    }
}

namespace {

// Aggregation over a group of records: count | sum | mean | min | max.
Value aggregate_value(const std::string& fn, const std::string& field,
                      const std::vector<const Record*>& group) {
    if (fn == "count") return static_cast<std::int64_t>(group.size());
    double sum = 0.0;
    double mn = std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    std::int64_t n = 0;
    for (const Record* r : group) {
        if (!r->has(field) || !r->values.at(field).is_number()) continue;
        double v = r->values.at(field).get<double>();
        sum += v;
        mn = std::min(mn, v);
        mx = std::max(mx, v);
        n++;
    }
    if (fn == "sum") return sum;
    if (n == 0) return nullptr;
    if (fn == "mean") return sum / static_cast<double>(n);
    if (fn == "min") return mn;
    if (fn == "max") return mx;
    throw ExecError("unknown aggregate function '" + fn + "'");
}

std::string agg_output_field(const LogicalOperator& op) {
    return op.agg_field.empty() ? op.agg_function : op.agg_function + "_" + op.agg_field;
}

}  // namespace

std::vector<Record> Engine::run_stage(const Stage& stage, const std::vector<Record>& inputs,
                                      const ExecOptions& opts, ExecutionTrace& trace) {
    const LogicalOperator& op = *stage.op;

    // stage-level (grouping) operators
    if (op.kind == OpKind::Limit) {
        std::vector<Record> out;
        for (size_t i = 0; i < inputs.size(); i++) {
            TraceEntry e = base_entry(stage, inputs[i]);
            bool keep = static_cast<std::int64_t>(i) < op.limit_n;
            e.outcome = keep ? Outcome::Emitted : Outcome::Dropped;
            e.emitted = keep ? 1 : 0;
            trace.entries.push_back(e);
            if (keep) out.push_back(with_lineage(inputs[i], stage));
        }
        return out;
    }
    if (op.kind == OpKind::GroupBy || op.kind == OpKind::Aggregate) {
        // group key -> member records, in first-appearance order
        std::vector<std::string> order;
        std::map<std::string, std::vector<const Record*>> groups;
        std::map<std::string, const Record*> first_of;
        for (const Record& r : inputs) {
            Value key = Value::array();
            for (const std::string& g : op.group_fields)
                key.push_back(r.values.contains(g) ? r.values.at(g) : Value(nullptr));
            std::string k = key.dump();
            if (!groups.count(k)) {
                order.push_back(k);
                first_of[k] = &r;
            }
            groups[k].push_back(&r);
        }
        for (const Record& r : inputs) {
            TraceEntry e = base_entry(stage, r);
            // one emitted record per group, attributed to its first member
            Value key = Value::array();
            for (const std::string& g : op.group_fields)
                key.push_back(r.values.contains(g) ? r.values.at(g) : Value(nullptr));
            e.emitted = (first_of.at(key.dump()) == &r) ? 1 : 0;
            e.outcome = e.emitted ? Outcome::Emitted : Outcome::Dropped;
            trace.entries.push_back(e);
        }
        std::vector<Record> out;
        for (const std::string& k : order) {
            const Record* head = first_of.at(k);
            Record rec = *head;
            Value vals = Value::object();
            for (const std::string& g : op.group_fields)
                if (head->values.contains(g)) vals[g] = head->values.at(g);
            vals[agg_output_field(op)] = aggregate_value(op.agg_function, op.agg_field,
                                                         groups.at(k));
            rec.values = std::move(vals);
            out.push_back(with_lineage(std::move(rec), stage));
        }
        if (op.kind == OpKind::Aggregate && out.empty() && !inputs.empty())
            throw ExecError("aggregate produced no output");
        return out;
    }

    // per-record operators
    size_t workers = opts.parallel ? static_cast<size_t>(std::max(1, opts.workers)) : 1;
    if (workers <= 1 || inputs.size() <= 1) {
        std::vector<Record> out;
        for (const Record& r : inputs) {
            TraceEntry e;
            auto produced = apply_record(stage, r, e);
            trace.entries.push_back(std::move(e));
            for (Record& p : produced) out.push_back(std::move(p));
        }
        return out;
    }

    // stage-barrier parallel mode: a worker pool over input slots; outputs are
    // gathered per slot so the result order matches serial execution.
    std::vector<std::vector<Record>> slots(inputs.size());
    std::vector<TraceEntry> entries(inputs.size());
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto work = [&]() {
        while (!failed.load(std::memory_order_relaxed)) {
            size_t i = next.fetch_add(1);
            if (i >= inputs.size()) break;
            try {
                slots[i] = apply_record(stage, inputs[i], entries[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
            }
        }
    };
    std::vector<std::thread> pool;
    for (size_t t = 0; t < std::min(workers, inputs.size()); t++) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);

    std::vector<Record> out;
    for (size_t i = 0; i < inputs.size(); i++) {
        trace.entries.push_back(std::move(entries[i]));
        for (Record& p : slots[i]) out.push_back(std::move(p));
    }
    return out;
}

ExecResult Engine::execute(const PhysicalPlan& plan, const ExecOptions& opts) {
    if (std::string err = validate_physical(plan); !err.empty())
        throw ExecError("invalid physical plan: " + err);
    const LogicalPlan& lp = plan.logical;
    const std::string& dataset = lp.operators[0].dataset_id;
    std::string backend_tag = backend_.identity();
    if (opts.limit_inputs) backend_tag += "#limit=" + std::to_string(*opts.limit_inputs);

    ExecResult result;
    std::vector<Record> records = scan_inputs(lp, opts.limit_inputs);

    size_t resume = 1;
    if (opts.use_cache && cache_) {
        for (size_t len = lp.operators.size(); len >= 2; len--) {
            CacheKey key{dataset, plan.prefix_fingerprint(len, backend_tag)};
            if (auto hit = cache_->get(key)) {
                records = std::move(*hit);
                resume = len;
                result.cached_prefix_ops = len - 1;
                break;
            }
        }
    }

    for (size_t i = resume; i < lp.operators.size(); i++) {
        Stage stage;
        stage.op = &lp.operators[i];
        stage.cfg = &plan.configs[i];
        if (stage.cfg->model_id) stage.model = models_.get(*stage.cfg->model_id);
        stage.input_fields = stage.op->depends_on;
        stage.input_kinds = field_kinds_before(lp, i, schemas_);
        if (stage.op->kind == OpKind::Convert) {
            stage.targets = fields_to_generate(lp, i, schemas_);
            stage.one_to_many = stage.op->cardinality == Cardinality::OneToMany;
        }
        if (opts.capture_inputs) result.op_inputs[stage.op->op_id] = records;
        records = run_stage(stage, records, opts, result.trace);
        if (opts.use_cache && cache_) {
            CacheKey key{dataset, plan.prefix_fingerprint(i + 1, backend_tag)};
            cache_->put(key, records);
        }
    }
    result.records = std::move(records);
    return result;
}

SamplingOutcome Engine::run_sentinels(const LogicalPlan& plan, const SampleConfig& sample) {
    SamplingOutcome outcome;
    {
        std::vector<Record> all = scan_inputs(plan, std::nullopt);
        outcome.input_count = static_cast<std::int64_t>(all.size());
    }
    if (outcome.input_count == 0) throw ExecError("dataset is empty; nothing to sample");
    outcome.sample_count = sample.sample_count(outcome.input_count);

    std::vector<PhysicalPlan> sentinels = make_sentinels(plan, models_, schemas_);
    ExecOptions sopts;
    sopts.limit_inputs = outcome.sample_count;
    sopts.use_cache = false;
    sopts.capture_inputs = true;

    // champion sentinel is built last by construction
    std::vector<std::pair<PhysicalPlan, ExecutionTrace>> runs;
    ExecResult champion_res;
    const PhysicalPlan& champion_plan = sentinels.back();
    for (const PhysicalPlan& sentinel : sentinels) {
        ExecResult res = execute(sentinel, sopts);
        if (&sentinel == &sentinels.back()) champion_res = res;
        outcome.sampling_usd += res.trace.total_usd();
        outcome.sampling_latency_s += res.trace.total_latency_s();
        runs.emplace_back(sentinel, std::move(res.trace));
    }
    const ExecutionTrace& champion_trace = runs.back().second;

    // the champion is the quality reference; a convert that yields nothing on
    // every sampled record leaves nothing to score against
    for (size_t i = 1; i < plan.operators.size(); i++) {
        const LogicalOperator& op = plan.operators[i];
        if (op.kind != OpKind::Convert || !op.is_llm_requiring()) continue;
        auto totals = champion_trace.totals_for(op.op_id);
        if (totals.inputs > 0 && totals.emitted == 0)
            throw ExecError("champion model produced no usable output for operator " +
                            op.op_id + " on any sampled record");
    }

    outcome.stats = aggregate_stats(runs, champion_plan, champion_trace, schemas_);

    // synthesize extraction code from champion-labeled samples
    const ModelSpec& champion_model = models_.champion();
    for (size_t i = 1; i < plan.operators.size(); i++) {
        if (!code_synth_admissible(plan, i, schemas_)) continue;
        const LogicalOperator& op = plan.operators[i];
        auto targets = fields_to_generate(plan, i, schemas_);
        if (targets.empty()) continue;

        std::map<std::string, const Value*> labels;
        for (const TraceEntry& e : champion_trace.entries)
            if (e.op_id == op.op_id && e.outcome == Outcome::Emitted)
                labels[e.source_id] = &e.output_values;

        std::vector<LabeledSample> samples;
        auto inputs_it = champion_res.op_inputs.find(op.op_id);
        if (inputs_it != champion_res.op_inputs.end()) {
            for (const Record& rec : inputs_it->second) {
                auto lab = labels.find(rec.source_id);
                if (lab == labels.end()) continue;
                samples.push_back({rec, *lab->second});
                if (samples.size() >= 10) break;
            }
        }

        SynthesizedConverter conv = synthesize_converter(
            op.op_id, samples, targets, op.depends_on, backend_, champion_model);
        converters_.put(conv);
        outcome.converters.put(conv);

        OperatorStats s;
        s.n_samples = static_cast<std::int64_t>(samples.size());
        s.quality = conv.validation_score;
        std::int64_t kept = 0;
        for (const LabeledSample& sm : samples)
            if (required_present(conv.apply(sm.input), targets)) kept++;
        s.selectivity = samples.empty()
                            ? 0.0
                            : static_cast<double>(kept) / static_cast<double>(samples.size());
        outcome.stats.set({op.op_id, Strategy::CodeSynth, champion_model.model_id, 1.0}, s);
    }
    return outcome;
}

RunReport Engine::optimize_and_run(const LogicalPlan& plan, const OptimizeOptions& opts) {
    RunReport report;
    report.policy = opts.policy;
    const std::string& dataset = plan.operators.empty() ? "" : plan.operators[0].dataset_id;

    // sampling sidecar: a second identical run reuses sampled stats and
    // synthesized converters instead of re-querying the backend
    std::filesystem::path stats_path, side_path;
    bool sidecar = opts.use_cache && cache_;
    if (sidecar) {
        Fnv1a h;
        h.update(plan.fingerprint()).update(dataset).update(backend_.identity());
        for (const ModelSpec& m : models_.models()) h.update(m.to_json().dump());
        h.update(std::to_string(opts.sample.fraction))
            .update(std::to_string(opts.sample.min_samples))
            .update(std::to_string(opts.sample.max_samples));
        stats_path = cache_->directory() / ("sampling_" + h.hex() + ".tsv");
        side_path = cache_->directory() / ("sampling_" + h.hex() + ".json");
        if (std::filesystem::exists(stats_path) && std::filesystem::exists(side_path)) {
            try {
                SamplingOutcome cached;
                cached.stats = StatsTable::load(stats_path);
                std::ifstream in(side_path);
                Value doc = Value::parse(in);
                cached.converters = ConverterStore::from_json(doc.at("converters"));
                cached.sampling_usd = doc.at("sampling_usd").get<double>();
                cached.sampling_latency_s = doc.at("sampling_latency_s").get<double>();
                cached.sample_count = doc.at("sample_count").get<std::int64_t>();
                cached.input_count =
                    static_cast<std::int64_t>(scan_inputs(plan, std::nullopt).size());
                cached.from_cache = true;
                report.sampling = std::move(cached);
            } catch (const std::exception&) {
                report.sampling = SamplingOutcome{};  // corrupted sidecar: resample
            }
        }
    }
    if (!report.sampling.from_cache) {
        report.sampling = run_sentinels(plan, opts.sample);
        if (sidecar) {
            report.sampling.stats.save(stats_path);
            Value doc{{"converters", report.sampling.converters.to_json()},
                      {"sampling_usd", report.sampling.sampling_usd},
                      {"sampling_latency_s", report.sampling.sampling_latency_s},
                      {"sample_count", report.sampling.sample_count}};
            std::ofstream out(side_path);
            out << doc.dump(2) << "\n";
        }
    }
    // adopt the sampling run's converters so code_synth plans can execute
    {
        Value doc = report.sampling.converters.to_json();
        for (const Value& c : doc.at("converters"))
            converters_.put(SynthesizedConverter::from_json(c));
    }

    ReorderingResult reorder = enumerate_reorderings(plan, schemas_);
    report.logical_plan_count = reorder.plans.size();
    report.reordering_truncated = reorder.truncated;

    ParamSpace space = opts.space;
    if (space.model_ids.empty())
        for (const ModelSpec& m : models_.models()) space.model_ids.push_back(m.model_id);

    std::vector<PhysicalPlan> candidates =
        enumerate_physical(reorder.plans, space, models_, schemas_);
    report.physical_candidate_count = candidates.size();

    std::vector<PhysicalPlan> sentinels = make_sentinels(plan, models_, schemas_);
    std::vector<PhysicalPlan> surviving =
        naive_eliminate(candidates, report.sampling.stats, sentinels);
    report.surviving_count = surviving.size();

    EstimateConfig ecfg;
    ecfg.workers = opts.parallel ? opts.workers : 1;
    std::vector<PlanEstimate> estimates;
    std::map<std::string, const PhysicalPlan*> by_fp;
    for (const PhysicalPlan& p : surviving) {
        PlanEstimate e =
            estimate(p, report.sampling.stats, report.sampling.input_count, models_, ecfg);
        by_fp[e.plan_fingerprint] = &p;
        estimates.push_back(std::move(e));
    }

    std::vector<PlanEstimate> frontier = pareto_frontier(estimates);
    report.frontier_size = frontier.size();
    std::set<std::string> frontier_fps;
    for (const PlanEstimate& e : frontier) frontier_fps.insert(e.plan_fingerprint);
    for (const PlanEstimate& e : estimates)
        report.candidates.push_back({e, frontier_fps.count(e.plan_fingerprint) > 0,
                                     plan_listing(*by_fp.at(e.plan_fingerprint))});

    ChoiceResult choice = choose(frontier, opts.policy);
    report.chosen = choice.chosen;
    report.constraint_met = choice.constraint_met;

    const PhysicalPlan& chosen_plan = *by_fp.at(choice.chosen.plan_fingerprint);
    report.chosen_listing = plan_listing(chosen_plan);
    if (!opts.execute_final) return report;

    ExecOptions xopts;
    xopts.parallel = opts.parallel;
    xopts.workers = opts.workers;
    xopts.use_cache = opts.use_cache;
    ExecResult exec = execute(chosen_plan, xopts);
    report.records = std::move(exec.records);
    report.trace = std::move(exec.trace);
    return report;
}

}  // namespace sempipe
