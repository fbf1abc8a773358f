#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sempipe/datasource.hpp"
#include "sempipe/record.hpp"
#include "sempipe/schema.hpp"

namespace sempipe {

struct PlanError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class OpKind { Scan, Convert, Filter, Project, GroupBy, Limit, Aggregate };
enum class Cardinality { OneToOne, OneToMany };

std::string to_string(OpKind k);
std::string to_string(Cardinality c);

/// One logical operator. Flat representation: which optional fields are
/// meaningful depends on `kind`.
struct LogicalOperator {
    std::string op_id;
    OpKind kind = OpKind::Scan;

    std::string dataset_id;                 // Scan
    std::string target_schema;              // Convert
    Cardinality cardinality = Cardinality::OneToOne;  // Convert
    std::string predicate;                  // Filter (natural-language text)
    std::string udf;                        // Filter/Convert: named UDF
    std::vector<std::string> depends_on;    // resolved at compile time
    bool implicit_depends = false;          // depends_on was not user-declared
    std::vector<std::string> columns;       // Project
    std::vector<std::string> group_fields;  // GroupBy
    std::string agg_function;               // GroupBy/Aggregate: count|sum|mean|min|max
    std::string agg_field;                  // optional for count
    std::int64_t limit_n = 0;               // Limit

    bool is_barrier() const {
        return kind == OpKind::Project || kind == OpKind::GroupBy ||
               kind == OpKind::Limit || kind == OpKind::Aggregate;
    }
    // Operators whose default implementation requires a model call.
    bool is_llm_requiring() const {
        return (kind == OpKind::Filter && udf.empty()) ||
               (kind == OpKind::Convert && udf.empty());
    }

    std::string canonical() const;  // stable serialization for fingerprints
    Value to_json() const;
};

struct LogicalPlan {
    std::vector<LogicalOperator> operators;
    std::string fingerprint() const;

    const LogicalOperator* find(const std::string& op_id) const;
};

/// Named user-defined functions the planner can reference. Filter UDFs decide
/// keep/drop; convert UDFs return the generated field map (or nullopt to drop
/// the record).
class UdfRegistry {
public:
    using FilterFn = std::function<bool(const Record&)>;
    using ConvertFn = std::function<std::optional<Value>(const Record&)>;

    UdfRegistry();  // ships the builtin real-estate filters

    void add_filter(const std::string& name, FilterFn fn) { filters_[name] = std::move(fn); }
    void add_convert(const std::string& name, ConvertFn fn) { converts_[name] = std::move(fn); }
    bool has_filter(const std::string& name) const { return filters_.count(name) > 0; }
    bool has_convert(const std::string& name) const { return converts_.count(name) > 0; }
    const FilterFn& filter(const std::string& name) const;
    const ConvertFn& convert(const std::string& name) const;

private:
    std::map<std::string, FilterFn> filters_;
    std::map<std::string, ConvertFn> converts_;
};

/// Compiles a pipeline description document into one canonical logical plan in
/// user-declared operator order. Schemas declared in the document are
/// registered into `schemas`.
LogicalPlan compile(const Value& pipeline, SchemaRegistry& schemas, const UdfRegistry& udfs,
                    const DataSourceRegistry& sources);

struct DependencyViolation {
    std::string op_id;
    std::string field;
    std::string message;
};

std::vector<DependencyViolation> validate_dependencies(const LogicalPlan& plan,
                                                       const SchemaRegistry& schemas);

// Field names available to the operator at position `index` (i.e. produced by
// operators before it).
std::set<std::string> available_fields_before(const LogicalPlan& plan, size_t index,
                                              const SchemaRegistry& schemas);

struct ReorderingResult {
    std::vector<LogicalPlan> plans;  // includes the input plan
    bool truncated = false;          // enumeration hit the cap
};

inline constexpr size_t kReorderingCap = 5000;

/// Every total ordering of the plan's converts and filters that keeps Scan
/// first, keeps barrier operators in place, and satisfies all depends_on
/// constraints. Deterministic generation order (lexicographic by op_id).
ReorderingResult enumerate_reorderings(const LogicalPlan& plan, const SchemaRegistry& schemas,
                                       size_t cap = kReorderingCap);

}  // namespace sempipe
