#include "sempipe/logical_plan.hpp"

#include <algorithm>
#include <sstream>

#include "sempipe/fingerprint.hpp"

namespace sempipe {

std::string to_string(OpKind k) {
    switch (k) {
        case OpKind::Scan: return "scan";
        case OpKind::Convert: return "convert";
        case OpKind::Filter: return "filter";
        case OpKind::Project: return "project";
        case OpKind::GroupBy: return "groupby";
        case OpKind::Limit: return "limit";
        case OpKind::Aggregate: return "aggregate";
    }
    return "scan";
}

std::string to_string(Cardinality c) {
    return c == Cardinality::OneToOne ? "oneToOne" : "oneToMany";
}

std::string LogicalOperator::canonical() const {
    std::ostringstream ss;
    ss << op_id << '|' << to_string(kind) << '|' << dataset_id << '|' << target_schema << '|'
       << to_string(cardinality) << '|' << predicate << '|' << udf << '|';
    for (const auto& d : depends_on) ss << d << ',';
    ss << '|';
    for (const auto& c : columns) ss << c << ',';
    ss << '|';
    for (const auto& g : group_fields) ss << g << ',';
    ss << '|' << agg_function << '|' << agg_field << '|' << limit_n;
    return ss.str();
}

Value LogicalOperator::to_json() const {
    Value j{{"op_id", op_id}, {"kind", to_string(kind)}};
    switch (kind) {
        case OpKind::Scan: j["dataset"] = dataset_id; break;
        case OpKind::Convert:
            j["schema"] = target_schema;
            j["cardinality"] = to_string(cardinality);
            if (!udf.empty()) j["udf"] = udf;
            break;
        case OpKind::Filter:
            if (!udf.empty()) j["udf"] = udf;
            else j["predicate"] = predicate;
            break;
        case OpKind::Project: j["columns"] = columns; break;
        case OpKind::GroupBy:
            j["group_fields"] = group_fields;
            j["function"] = agg_function;
            if (!agg_field.empty()) j["field"] = agg_field;
            break;
        case OpKind::Limit: j["n"] = limit_n; break;
        case OpKind::Aggregate:
            j["function"] = agg_function;
            if (!agg_field.empty()) j["field"] = agg_field;
            break;
    }
    if (!depends_on.empty() && !implicit_depends) j["depends_on"] = depends_on;
    return j;
}

std::string LogicalPlan::fingerprint() const {
    Fnv1a h;
    for (const LogicalOperator& op : operators) h.update(op.canonical());
    return h.hex();
}

const LogicalOperator* LogicalPlan::find(const std::string& op_id) const {
    for (const LogicalOperator& op : operators)
        if (op.op_id == op_id) return &op;
    return nullptr;
}

UdfRegistry::UdfRegistry() {
    // Builtin real-estate filters. Deterministic stand-ins for the geo / price
    // predicates: the neighborhood list approximates the two-mile radius.
    add_filter("within_two_miles_of_mit", [](const Record& r) {
        if (!r.has("address")) return false;
        const std::string addr = r.values.at("address").get<std::string>();
        for (const char* area : {"Cambridge", "Kendall", "Somerville", "Beacon Hill", "Back Bay"})
            if (addr.find(area) != std::string::npos) return true;
        return false;
    });
    add_filter("in_price_range", [](const Record& r) {
        if (!r.has("price") || !r.values.at("price").is_number()) return false;
        double price = r.values.at("price").get<double>();
        return price >= 500000.0 && price <= 2000000.0;
    });
}

const UdfRegistry::FilterFn& UdfRegistry::filter(const std::string& name) const {
    auto it = filters_.find(name);
    if (it == filters_.end()) throw PlanError("unknown filter UDF '" + name + "'");
    return it->second;
}

const UdfRegistry::ConvertFn& UdfRegistry::convert(const std::string& name) const {
    auto it = converts_.find(name);
    if (it == converts_.end()) throw PlanError("unknown convert UDF '" + name + "'");
    return it->second;
}

namespace {

std::vector<std::string> parse_depends_on(const Value& j) {
    if (!j.contains("depends_on")) return {};
    const Value& d = j.at("depends_on");
    if (d.is_string()) return {d.get<std::string>()};
    std::vector<std::string> out;
    for (const Value& v : d) out.push_back(v.get<std::string>());
    return out;
}

std::string make_op_id(size_t index, const LogicalOperator& op) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%02zu", index);
    std::string id = std::string(buf) + "_" + to_string(op.kind);
    if (op.kind == OpKind::Convert) id += "_" + op.target_schema;
    return id;
}

}  // namespace

std::set<std::string> available_fields_before(const LogicalPlan& plan, size_t index,
                                              const SchemaRegistry& schemas) {
    std::set<std::string> fields;
    // note: scan's base schema is resolved at compile time into depends-free
    // availability via the Convert target / dataset schema recorded on the op
    for (size_t i = 0; i < index && i < plan.operators.size(); i++) {
        const LogicalOperator& op = plan.operators[i];
        switch (op.kind) {
            case OpKind::Scan:
                for (const FieldSpec& f : schemas.effective_fields(op.target_schema))
                    fields.insert(f.name);
                break;
            case OpKind::Convert:
                for (const FieldSpec& f : schemas.effective_fields(op.target_schema))
                    fields.insert(f.name);
                break;
            case OpKind::Filter:
            case OpKind::Limit:
                break;
            case OpKind::Project: {
                std::set<std::string> kept(op.columns.begin(), op.columns.end());
                std::set<std::string> next;
                for (const auto& f : fields)
                    if (kept.count(f)) next.insert(f);
                fields = std::move(next);
                break;
            }
            case OpKind::GroupBy: {
                std::set<std::string> next(op.group_fields.begin(), op.group_fields.end());
                next.insert(op.agg_field.empty() ? op.agg_function
                                                 : op.agg_function + "_" + op.agg_field);
                fields = std::move(next);
                break;
            }
            case OpKind::Aggregate: {
                fields = {op.agg_field.empty() ? op.agg_function
                                               : op.agg_function + "_" + op.agg_field};
                break;
            }
        }
    }
    return fields;
}

LogicalPlan compile(const Value& pipeline, SchemaRegistry& schemas, const UdfRegistry& udfs,
                    const DataSourceRegistry& sources) {
    for (const Value& sj : pipeline.value("schemas", Value::array())) {
        if (!schemas.contains(sj.at("name").get<std::string>())) schemas.define_from_json(sj);
    }

    if (!pipeline.contains("dataset")) throw PlanError("pipeline is missing 'dataset'");
    const std::string dataset_id = pipeline.at("dataset").get<std::string>();
    const DataSourceDescriptor& source = sources.get(dataset_id);
    if (!schemas.contains(source.base_schema))
        throw PlanError("dataset '" + dataset_id + "' references unknown schema '" +
                        source.base_schema + "'");

    LogicalPlan plan;
    LogicalOperator scan_op;
    scan_op.kind = OpKind::Scan;
    scan_op.dataset_id = dataset_id;
    scan_op.target_schema = source.base_schema;  // fields the scan makes available
    scan_op.op_id = make_op_id(0, scan_op);
    plan.operators.push_back(scan_op);

    size_t index = 1;
    for (const Value& oj : pipeline.value("ops", Value::array())) {
        LogicalOperator op;
        const std::string kind = oj.at("kind").get<std::string>();
        if (kind == "convert") {
            op.kind = OpKind::Convert;
            op.target_schema = oj.at("schema").get<std::string>();
            if (!schemas.contains(op.target_schema))
                throw PlanError("convert references unknown schema '" + op.target_schema + "'");
            op.cardinality = oj.value("cardinality", std::string("oneToOne")) == "oneToMany"
                                 ? Cardinality::OneToMany
                                 : Cardinality::OneToOne;
            op.udf = oj.value("udf", std::string{});
            if (!op.udf.empty() && !udfs.has_convert(op.udf))
                throw PlanError("convert references unknown UDF '" + op.udf + "'");
        } else if (kind == "filter") {
            op.kind = OpKind::Filter;
            op.udf = oj.value("udf", std::string{});
            op.predicate = oj.value("predicate", std::string{});
            if (!op.udf.empty() && !udfs.has_filter(op.udf))
                throw PlanError("filter references unknown UDF '" + op.udf + "'");
            if (op.udf.empty() && op.predicate.empty())
                throw PlanError("filter needs a predicate or a udf");
        } else if (kind == "project") {
            op.kind = OpKind::Project;
            for (const Value& c : oj.at("columns")) op.columns.push_back(c.get<std::string>());
        } else if (kind == "groupby") {
            op.kind = OpKind::GroupBy;
            for (const Value& g : oj.at("group_fields"))
                op.group_fields.push_back(g.get<std::string>());
            op.agg_function = oj.value("function", std::string("count"));
            op.agg_field = oj.value("field", std::string{});
        } else if (kind == "limit") {
            op.kind = OpKind::Limit;
            op.limit_n = oj.at("n").get<std::int64_t>();
        } else if (kind == "aggregate") {
            op.kind = OpKind::Aggregate;
            op.agg_function = oj.value("function", std::string("count"));
            op.agg_field = oj.value("field", std::string{});
        } else {
            throw PlanError("unknown operator kind '" + kind + "'");
        }
        op.depends_on = parse_depends_on(oj);
        op.op_id = make_op_id(index++, op);
        plan.operators.push_back(std::move(op));
    }

    // Implicit dependency rule: a convert or filter without declared
    // depends_on depends on all fields available at its declared position.
    for (size_t i = 1; i < plan.operators.size(); i++) {
        LogicalOperator& op = plan.operators[i];
        if ((op.kind == OpKind::Convert || op.kind == OpKind::Filter) && op.depends_on.empty()) {
            auto avail = available_fields_before(plan, i, schemas);
            op.depends_on.assign(avail.begin(), avail.end());
            op.implicit_depends = true;
        }
    }

    auto violations = validate_dependencies(plan, schemas);
    if (!violations.empty()) throw PlanError("dependency violation: " + violations[0].message);
    return plan;
}

std::vector<DependencyViolation> validate_dependencies(const LogicalPlan& plan,
                                                       const SchemaRegistry& schemas) {
    std::vector<DependencyViolation> out;
    if (plan.operators.empty() || plan.operators[0].kind != OpKind::Scan) {
        out.push_back({"", "", "plan must start with exactly one scan"});
        return out;
    }
    for (size_t i = 1; i < plan.operators.size(); i++) {
        const LogicalOperator& op = plan.operators[i];
        if (op.kind == OpKind::Scan) {
            out.push_back({op.op_id, "", "plan has more than one scan"});
            continue;
        }
        auto avail = available_fields_before(plan, i, schemas);
        for (const std::string& field : op.depends_on) {
            if (!avail.count(field))
                out.push_back({op.op_id, field,
                               "operator " + op.op_id + " depends on field '" + field +
                                   "' which is not produced upstream"});
        }
    }
    return out;
}

namespace {

struct Segment {
    size_t begin = 0;  // index range [begin, end) of convert/filter run
    size_t end = 0;
};

// All linear extensions of the precedence order over segment ops, generated by
// picking the lexicographically-smallest eligible op_id first.
void extend(const std::vector<const LogicalOperator*>& ops,
            const std::vector<std::vector<size_t>>& preds, std::vector<size_t>& placed,
            std::vector<bool>& used, std::vector<std::vector<size_t>>& out, size_t cap) {
    if (out.size() >= cap) return;
    if (placed.size() == ops.size()) {
        out.push_back(placed);
        return;
    }
    std::vector<size_t> eligible;
    for (size_t i = 0; i < ops.size(); i++) {
        if (used[i]) continue;
        bool ok = true;
        for (size_t p : preds[i])
            if (!used[p]) { ok = false; break; }
        if (ok) eligible.push_back(i);
    }
    std::sort(eligible.begin(), eligible.end(),
              [&](size_t a, size_t b) { return ops[a]->op_id < ops[b]->op_id; });
    for (size_t i : eligible) {
        used[i] = true;
        placed.push_back(i);
        extend(ops, preds, placed, used, out, cap);
        placed.pop_back();
        used[i] = false;
        if (out.size() >= cap) return;
    }
}

}  // namespace

ReorderingResult enumerate_reorderings(const LogicalPlan& plan, const SchemaRegistry& schemas,
                                       size_t cap) {
    // Split into maximal runs of converts/filters; barriers and scan stay put.
    std::vector<Segment> segments;
    size_t i = 1;  // operator 0 is the scan
    while (i < plan.operators.size()) {
        const LogicalOperator& op = plan.operators[i];
        if (op.kind == OpKind::Convert || op.kind == OpKind::Filter) {
            Segment seg{i, i + 1};
            while (seg.end < plan.operators.size() &&
                   (plan.operators[seg.end].kind == OpKind::Convert ||
                    plan.operators[seg.end].kind == OpKind::Filter))
                seg.end++;
            segments.push_back(seg);
            i = seg.end;
        } else {
            i++;
        }
    }

    // Per-segment linear extensions.
    std::vector<std::vector<std::vector<size_t>>> seg_orders;
    for (const Segment& seg : segments) {
        std::vector<const LogicalOperator*> ops;
        for (size_t k = seg.begin; k < seg.end; k++) ops.push_back(&plan.operators[k]);

        auto before = available_fields_before(plan, seg.begin, schemas);
        // produced(C) = target's effective fields not already available before the segment
        std::vector<std::set<std::string>> produced(ops.size());
        for (size_t k = 0; k < ops.size(); k++) {
            if (ops[k]->kind != OpKind::Convert) continue;
            for (const FieldSpec& f : schemas.effective_fields(ops[k]->target_schema))
                if (!before.count(f.name)) produced[k].insert(f.name);
        }
        std::vector<std::vector<size_t>> preds(ops.size());
        for (size_t k = 0; k < ops.size(); k++) {
            for (const std::string& field : ops[k]->depends_on) {
                if (before.count(field)) continue;
                for (size_t p = 0; p < ops.size(); p++)
                    if (p != k && produced[p].count(field)) preds[k].push_back(p);
            }
        }
        std::vector<std::vector<size_t>> orders;
        std::vector<size_t> placed;
        std::vector<bool> used(ops.size(), false);
        extend(ops, preds, placed, used, orders, cap);
        seg_orders.push_back(std::move(orders));
    }

    ReorderingResult result;
    // Cross product over segments, capped.
    std::vector<size_t> choice(segments.size(), 0);
    bool done = segments.empty();
    while (true) {
        LogicalPlan candidate;
        candidate.operators = plan.operators;
        for (size_t s = 0; s < segments.size(); s++) {
            const auto& order = seg_orders[s][choice[s]];
            for (size_t k = 0; k < order.size(); k++)
                candidate.operators[segments[s].begin + k] =
                    plan.operators[segments[s].begin + order[k]];
        }
        result.plans.push_back(std::move(candidate));
        if (result.plans.size() >= cap) {
            // truncated iff more combinations remain
            size_t total = 1;
            for (const auto& o : seg_orders) total *= o.size();
            result.truncated = result.plans.size() < total;
            for (const auto& o : seg_orders)
                if (o.size() >= cap) result.truncated = true;
            break;
        }
        if (done) break;
        // advance mixed-radix counter
        size_t s = segments.size();
        while (s > 0) {
            s--;
            if (++choice[s] < seg_orders[s].size()) break;
            choice[s] = 0;
            if (s == 0) { done = true; }
        }
        if (done) break;
    }
    if (segments.empty() && result.plans.empty()) result.plans.push_back(plan);
    return result;
}

}  // namespace sempipe
