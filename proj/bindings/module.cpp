#include <memory>
#include <optional>
#include <string>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sempipe/executor.hpp"
#include "sempipe/prompts.hpp"
#include "sempipe/tokens.hpp"

namespace py = pybind11;
using namespace sempipe;

namespace {

// nlohmann <-> Python conversion
Value to_value(const py::handle& obj) {
    if (obj.is_none()) return Value(nullptr);
    if (py::isinstance<py::bool_>(obj)) return Value(obj.cast<bool>());
    if (py::isinstance<py::int_>(obj)) return Value(obj.cast<std::int64_t>());
    if (py::isinstance<py::float_>(obj)) return Value(obj.cast<double>());
    if (py::isinstance<py::str>(obj)) return Value(obj.cast<std::string>());
    if (py::isinstance<py::dict>(obj)) {
        Value out = Value::object();
        for (const auto& item : obj.cast<py::dict>())
            out[item.first.cast<std::string>()] = to_value(item.second);
        return out;
    }
    if (py::isinstance<py::list>(obj) || py::isinstance<py::tuple>(obj)) {
        Value out = Value::array();
        for (const auto& item : obj.cast<py::sequence>()) out.push_back(to_value(item));
        return out;
    }
    throw py::type_error("cannot convert python object to a pipeline value");
}

py::object to_python(const Value& v) {
    switch (v.type()) {
        case Value::value_t::null: return py::none();
        case Value::value_t::boolean: return py::bool_(v.get<bool>());
        case Value::value_t::number_integer: return py::int_(v.get<std::int64_t>());
        case Value::value_t::number_unsigned: return py::int_(v.get<std::uint64_t>());
        case Value::value_t::number_float: return py::float_(v.get<double>());
        case Value::value_t::string: return py::str(v.get<std::string>());
        case Value::value_t::array: {
            py::list out;
            for (const Value& e : v) out.append(to_python(e));
            return out;
        }
        case Value::value_t::object: {
            py::dict out;
            for (const auto& [k, e] : v.items()) out[py::str(k)] = to_python(e);
            return out;
        }
        default: return py::none();
    }
}

py::dict estimate_dict(const PlanEstimate& e) {
    py::dict out;
    out["fingerprint"] = e.plan_fingerprint;
    out["est_usd"] = e.est_usd;
    out["est_runtime_s"] = e.est_runtime_s;
    out["est_quality"] = e.est_quality;
    return out;
}

/// Owns every registry plus the backend and cache, so Python callers deal
/// with a single object and no lifetime questions.
class Session {
public:
    Session(const std::string& backend, py::object mock_table, py::object models_path,
            py::object cache_dir) {
        models_ = models_path.is_none() ? ModelRegistry::mock_defaults()
                                        : ModelRegistry::load(models_path.cast<std::string>());
        if (backend == "mock") {
            MockModelTable table;
            if (!mock_table.is_none()) {
                if (py::isinstance<py::str>(mock_table))
                    table = MockModelTable::load(mock_table.cast<std::string>());
                else
                    table = MockModelTable::from_json(to_value(mock_table));
            }
            auto mock = std::make_unique<MockBackend>(std::move(table));
            mock_ = mock.get();
            backend_ = std::move(mock);
        } else if (backend == "http") {
            backend_ = std::make_unique<HttpBackend>();
        } else {
            throw py::value_error("backend must be 'mock' or 'http'");
        }
        if (!cache_dir.is_none())
            cache_ = std::make_unique<ResultCache>(cache_dir.cast<std::string>());
    }

    void register_datasource(const std::string& id, const std::string& kind,
                             const std::string& location, const std::string& schema) {
        DataSourceDescriptor desc;
        desc.dataset_id = id;
        desc.kind = source_kind_from_string(kind);
        desc.location = location;
        desc.base_schema = schema;
        sources_.register_datasource(desc);
    }

    std::string compile_fingerprint(py::dict pipeline) {
        return compile_plan(pipeline).fingerprint();
    }

    py::dict run(py::dict pipeline, const std::string& policy, double sample_fraction,
                 bool parallel, int workers, std::vector<std::string> model_ids,
                 std::vector<double> budgets, bool execute) {
        LogicalPlan plan = compile_plan(pipeline);
        Engine engine(schemas_, udfs_, sources_, models_, *backend_, cache_.get());
        OptimizeOptions opts;
        opts.policy = Policy::parse(policy);
        opts.sample.fraction = sample_fraction;
        opts.parallel = parallel;
        opts.workers = workers;
        opts.use_cache = cache_ != nullptr;
        opts.execute_final = execute;
        opts.space.model_ids = std::move(model_ids);
        if (!budgets.empty()) opts.space.token_budgets = std::move(budgets);
        RunReport report = engine.optimize_and_run(plan, opts);

        py::dict out;
        out["policy"] = report.policy.to_string();
        out["constraint_met"] = report.constraint_met;
        out["chosen"] = estimate_dict(report.chosen);
        out["chosen_listing"] = report.chosen_listing;
        out["logical_plans"] = report.logical_plan_count;
        out["physical_candidates"] = report.physical_candidate_count;
        out["frontier_size"] = report.frontier_size;
        out["sampled"] = report.sampling.sample_count;
        out["sampling_cached"] = report.sampling.from_cache;
        out["sampling_usd"] = report.sampling.sampling_usd;
        py::list frontier;
        for (const CandidateReport& c : report.candidates)
            if (c.on_frontier) frontier.append(estimate_dict(c.estimate));
        out["frontier"] = frontier;
        py::list records;
        for (const Record& r : report.records) records.append(to_python(r.to_json()));
        out["records"] = records;
        out["total_usd"] = report.trace.total_usd();
        return out;
    }

    std::int64_t mock_calls() const {
        if (!mock_) throw py::value_error("session is not using the mock backend");
        return mock_->calls();
    }
    void reset_mock_calls() {
        if (!mock_) throw py::value_error("session is not using the mock backend");
        mock_->reset_calls();
    }

private:
    LogicalPlan compile_plan(py::dict pipeline) {
        return compile(to_value(pipeline), schemas_, udfs_, sources_);
    }

    SchemaRegistry schemas_;
    UdfRegistry udfs_;
    DataSourceRegistry sources_;
    ModelRegistry models_;
    std::unique_ptr<Backend> backend_;
    MockBackend* mock_ = nullptr;
    std::unique_ptr<ResultCache> cache_;
};

}  // namespace

PYBIND11_MODULE(_sempipe, m) {
    m.doc() = "declarative optimizer and executor for semantic analytics pipelines";

    m.def("token_count", [](const std::string& text) { return token_count(text); },
          py::arg("text"), "whitespace token count used for budget math");
    m.def("reduce_input", &reduce_input, py::arg("text"), py::arg("budget"),
          "retain the first ceil(budget * tokens) whitespace tokens");

    m.def(
        "pareto_frontier",
        [](py::list candidates) {
            std::vector<PlanEstimate> all;
            for (const auto& item : candidates) {
                py::dict d = item.cast<py::dict>();
                PlanEstimate e;
                e.plan_fingerprint = d["fingerprint"].cast<std::string>();
                e.est_usd = d["est_usd"].cast<double>();
                e.est_runtime_s = d["est_runtime_s"].cast<double>();
                e.est_quality = d["est_quality"].cast<double>();
                all.push_back(e);
            }
            py::list out;
            for (const PlanEstimate& e : pareto_frontier(all)) out.append(estimate_dict(e));
            return out;
        },
        py::arg("candidates"),
        "non-dominated subset in (est_runtime_s, est_usd, est_quality)");

    py::class_<Session>(m, "Session")
        .def(py::init<const std::string&, py::object, py::object, py::object>(),
             py::arg("backend") = "mock", py::arg("mock_table") = py::none(),
             py::arg("models") = py::none(), py::arg("cache_dir") = py::none())
        .def("register_datasource", &Session::register_datasource, py::arg("id"),
             py::arg("kind"), py::arg("location"), py::arg("schema") = "TextFile")
        .def("compile", &Session::compile_fingerprint, py::arg("pipeline"),
             "compile a pipeline and return its logical-plan fingerprint")
        .def("run", &Session::run, py::arg("pipeline"),
             py::arg("policy") = "min-cost-at-quality=0.8",
             py::arg("sample_fraction") = 0.05, py::arg("parallel") = false,
             py::arg("workers") = 1, py::arg("models") = std::vector<std::string>{},
             py::arg("budgets") = std::vector<double>{}, py::arg("execute") = true,
             "optimize the pipeline under the policy and execute the chosen plan")
        .def("mock_calls", &Session::mock_calls)
        .def("reset_mock_calls", &Session::reset_mock_calls);
}
