#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sempipe/strategy.hpp"

namespace sempipe {

struct StatKey {
    std::string op_id;
    Strategy strategy = Strategy::LlmBondedWithFallback;
    std::string model_id;  // empty for udf/hardcoded
    double token_budget = 1.0;

    auto tie() const { return std::tie(op_id, strategy, model_id, token_budget); }
    bool operator<(const StatKey& other) const { return tie() < other.tie(); }
    bool operator==(const StatKey& other) const { return tie() == other.tie(); }
};

struct OperatorStats {
    std::int64_t n_samples = 0;
    double mean_latency_s = 0.0;
    double mean_usd = 0.0;
    double selectivity = 1.0;  // filters, and converts that drop failures
    double fanout = 1.0;       // oneToMany converts: mean outputs per input
    double quality = 1.0;      // champion-agreement score in [0,1]
};

/// Sampled per-operator statistics. Built once after sentinel sampling, then
/// read-only during estimation and execution.
class StatsTable {
public:
    void set(const StatKey& key, const OperatorStats& stats) { table_[key] = stats; }
    std::optional<OperatorStats> get(const StatKey& key) const;
    bool empty() const { return table_.empty(); }
    size_t size() const { return table_.size(); }
    const std::map<StatKey, OperatorStats>& entries() const { return table_; }

    // True when the model produced no parseable output for the operator during
    // sampling (any sampled key for this op/model has quality exactly 0).
    bool has_zero_quality(const std::string& op_id, const std::string& model_id) const;

    std::string fingerprint() const;

    // Delimited text export so runs can be replayed without re-sampling.
    void save(const std::filesystem::path& file) const;
    static StatsTable load(const std::filesystem::path& file);

private:
    std::map<StatKey, OperatorStats> table_;
};

struct SampleConfig {
    double fraction = 0.05;
    std::int64_t min_samples = 3;
    std::int64_t max_samples = 1000;

    std::int64_t sample_count(std::int64_t input_count) const;
};

}  // namespace sempipe
