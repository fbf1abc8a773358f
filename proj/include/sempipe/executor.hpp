#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sempipe/backend.hpp"
#include "sempipe/cache.hpp"
#include "sempipe/cost_model.hpp"
#include "sempipe/datasource.hpp"
#include "sempipe/logical_plan.hpp"
#include "sempipe/physical_plan.hpp"
#include "sempipe/stats.hpp"
#include "sempipe/synthesis.hpp"
#include "sempipe/trace.hpp"

namespace sempipe {

struct ExecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExecOptions {
    bool parallel = false;
    int workers = 1;
    // when set, execute only the first N scanned records (sentinel sampling)
    std::optional<std::int64_t> limit_inputs;
    bool use_cache = true;
    // retain each operator's input records (needed for code synthesis)
    bool capture_inputs = false;
};

struct ExecResult {
    std::vector<Record> records;
    ExecutionTrace trace;
    size_t cached_prefix_ops = 0;  // operators whose output came from the cache
    std::map<std::string, std::vector<Record>> op_inputs;  // when capture_inputs
};

/// Result of sentinel sampling: one bonded budget-1.0 run per model tier over
/// a sampled input prefix, folded into a stats table; code-synthesis converters
/// trained from the champion run's outputs.
struct SamplingOutcome {
    StatsTable stats;
    ConverterStore converters;
    double sampling_usd = 0.0;
    double sampling_latency_s = 0.0;
    std::int64_t input_count = 0;   // full dataset size
    std::int64_t sample_count = 0;  // records actually sampled
    bool from_cache = false;
};

struct OptimizeOptions {
    Policy policy;
    SampleConfig sample;
    // empty model_ids = every registered model
    ParamSpace space;
    bool parallel = false;
    int workers = 1;
    bool use_cache = true;
    bool execute_final = true;  // false: plan/estimate/choose only
};

struct CandidateReport {
    PlanEstimate estimate;
    bool on_frontier = false;
    std::string listing;
};

struct RunReport {
    Policy policy;
    bool constraint_met = true;
    PlanEstimate chosen;
    std::string chosen_listing;
    std::vector<CandidateReport> candidates;  // surviving, post-elimination
    size_t logical_plan_count = 0;
    bool reordering_truncated = false;
    size_t physical_candidate_count = 0;
    size_t surviving_count = 0;
    size_t frontier_size = 0;
    SamplingOutcome sampling;
    std::vector<Record> records;
    ExecutionTrace trace;
};

// Human-readable per-operator plan listing.
std::string plan_listing(const PhysicalPlan& plan);

/// Runs physical plans against a backend. Owns nothing: registries, backend
/// and cache are borrowed from the caller and must outlive the engine.
class Engine {
public:
    Engine(SchemaRegistry& schemas, const UdfRegistry& udfs, const DataSourceRegistry& sources,
           const ModelRegistry& models, Backend& backend, ResultCache* cache = nullptr)
        : schemas_(schemas), udfs_(udfs), sources_(sources), models_(models),
          backend_(backend), cache_(cache) {}

    ExecResult execute(const PhysicalPlan& plan, const ExecOptions& opts = {});

    SamplingOutcome run_sentinels(const LogicalPlan& plan, const SampleConfig& sample);

    /// Full pipeline: sample, enumerate logical and physical plans, eliminate,
    /// estimate, pick the policy-optimal frontier plan, run it.
    RunReport optimize_and_run(const LogicalPlan& plan, const OptimizeOptions& opts);

    ConverterStore& converters() { return converters_; }

    struct Stage;  // per-operator execution context

private:
    std::vector<Record> scan_inputs(const LogicalPlan& plan,
                                    std::optional<std::int64_t> limit) const;
    std::vector<Record> run_stage(const Stage& stage, const std::vector<Record>& inputs,
                                  const ExecOptions& opts, ExecutionTrace& trace);
    // per-record dispatch; appends one trace entry, returns produced records
    std::vector<Record> apply_record(const Stage& stage, const Record& record,
                                     TraceEntry& entry);

    SchemaRegistry& schemas_;
    const UdfRegistry& udfs_;
    const DataSourceRegistry& sources_;
    const ModelRegistry& models_;
    Backend& backend_;
    ResultCache* cache_;
    ConverterStore converters_;
};

}  // namespace sempipe
