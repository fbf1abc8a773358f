#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sempipe/backend.hpp"
#include "sempipe/cache.hpp"
#include "sempipe/executor.hpp"

namespace fs = std::filesystem;
using namespace sempipe;

namespace {

struct CommonArgs {
    std::string pipeline_path;
    std::string policy_text = "min-cost-at-quality=0.8";
    std::string backend_name = "mock";
    std::string mock_table_path;
    std::string models_path;
    std::string registry_path = "sempipe_sources.ini";
    std::string cache_dir = ".sempipe_cache";
    std::string output_path;
    double sample_fraction = 0.05;
    std::int64_t min_samples = 3;
    std::int64_t max_samples = 1000;
    int workers = 1;
    bool parallel = false;
    bool no_cache = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--pipeline", args.pipeline_path, "pipeline description file (JSON)")
        ->required();
    cmd->add_option("--policy", args.policy_text,
                    "max-quality-at-cost=<usd> | max-quality-at-runtime=<s> | "
                    "min-cost-at-quality=<fraction>");
    cmd->add_option("--backend", args.backend_name, "mock | http");
    cmd->add_option("--mock-table", args.mock_table_path, "mock answer table (JSON)");
    cmd->add_option("--models", args.models_path, "model registry file (JSON)");
    cmd->add_option("--registry", args.registry_path, "datasource registry file");
    cmd->add_option("--cache-dir", args.cache_dir, "result cache directory");
    cmd->add_option("--output", args.output_path, "write result records here (JSON lines)");
    cmd->add_option("--sample-fraction", args.sample_fraction, "sentinel sampling fraction");
    cmd->add_option("--min-samples", args.min_samples, "sampling floor");
    cmd->add_option("--max-samples", args.max_samples, "sampling ceiling");
    cmd->add_option("--workers", args.workers, "worker threads for parallel execution")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--parallel", args.parallel, "stage-parallel execution");
    cmd->add_flag("--no-cache", args.no_cache, "bypass the result cache");
}

struct Session {
    SchemaRegistry schemas;
    UdfRegistry udfs;
    DataSourceRegistry sources;
    ModelRegistry models;
    std::unique_ptr<Backend> backend;
    std::unique_ptr<ResultCache> cache;
    LogicalPlan plan;
};

Session open_session(const CommonArgs& args) {
    Session s;
    s.sources = DataSourceRegistry(args.registry_path);
    s.models = args.models_path.empty() ? ModelRegistry::mock_defaults()
                                        : ModelRegistry::load(args.models_path);
    if (args.backend_name == "mock") {
        MockModelTable table;
        if (!args.mock_table_path.empty()) table = MockModelTable::load(args.mock_table_path);
        s.backend = std::make_unique<MockBackend>(std::move(table));
    } else if (args.backend_name == "http") {
        s.backend = std::make_unique<HttpBackend>();
    } else {
        throw std::invalid_argument("unknown backend '" + args.backend_name + "'");
    }
    if (!args.no_cache) s.cache = std::make_unique<ResultCache>(args.cache_dir);

    std::ifstream in(args.pipeline_path);
    if (!in) throw std::runtime_error("cannot read pipeline file: " + args.pipeline_path);
    Value doc = Value::parse(in);  // throws with line/column on malformed input
    s.plan = compile(doc, s.schemas, s.udfs, s.sources);
    return s;
}

OptimizeOptions optimize_options(const CommonArgs& args, bool execute_final) {
    OptimizeOptions opts;
    opts.policy = Policy::parse(args.policy_text);
    opts.sample.fraction = args.sample_fraction;
    opts.sample.min_samples = args.min_samples;
    opts.sample.max_samples = args.max_samples;
    opts.parallel = args.parallel;
    opts.workers = args.workers;
    opts.use_cache = !args.no_cache;
    opts.execute_final = execute_final;
    return opts;
}

void print_report_header(const RunReport& report) {
    std::cout << "policy: " << report.policy.to_string() << "\n"
              << "inputs: " << report.sampling.input_count
              << "  sampled: " << report.sampling.sample_count
              << (report.sampling.from_cache ? " (cached)" : "") << "\n"
              << "sampling cost: $" << report.sampling.sampling_usd << "  ("
              << report.sampling.sampling_latency_s << " s)\n"
              << "logical plans: " << report.logical_plan_count
              << (report.reordering_truncated ? " (truncated)" : "") << "\n"
              << "physical candidates: " << report.physical_candidate_count
              << "  surviving: " << report.surviving_count
              << "  frontier: " << report.frontier_size << "\n";
}

void print_chosen(const RunReport& report) {
    std::cout << "chosen plan " << report.chosen.plan_fingerprint
              << "  est: $" << report.chosen.est_usd << ", " << report.chosen.est_runtime_s
              << " s, quality " << report.chosen.est_quality
              << (report.constraint_met ? "" : "  [constraint unmet]") << "\n"
              << report.chosen_listing;
}

int write_outputs(const RunReport& report, const std::string& output_path) {
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!output_path.empty()) {
        file.open(output_path);
        if (!file) {
            std::cerr << "error: cannot write " << output_path << "\n";
            return 1;
        }
        out = &file;
    }
    for (const Record& r : report.records) *out << r.to_json().dump() << "\n";
    std::cout << "output records: " << report.records.size() << "\n";
    return 0;
}

int cmd_register(const std::string& registry_path, const std::string& id,
                 const std::string& kind, const std::string& location,
                 const std::string& schema) {
    DataSourceRegistry registry{fs::path(registry_path)};
    DataSourceDescriptor desc;
    desc.dataset_id = id;
    desc.kind = source_kind_from_string(kind);
    desc.location = location;
    desc.base_schema = schema;
    registry.register_datasource(desc);
    std::cout << "registered " << id << " (" << kind << ") at " << location << "\n";
    return 0;
}

int cmd_run(const CommonArgs& args) {
    Session s = open_session(args);
    Engine engine(s.schemas, s.udfs, s.sources, s.models, *s.backend, s.cache.get());
    RunReport report = engine.optimize_and_run(s.plan, optimize_options(args, true));
    print_report_header(report);
    print_chosen(report);
    if (int rc = write_outputs(report, args.output_path); rc != 0) return rc;
    return report.constraint_met ? 0 : 2;
}

int cmd_explain(const CommonArgs& args) {
    Session s = open_session(args);
    Engine engine(s.schemas, s.udfs, s.sources, s.models, *s.backend, s.cache.get());
    RunReport report = engine.optimize_and_run(s.plan, optimize_options(args, false));
    print_report_header(report);
    for (const CandidateReport& c : report.candidates) {
        if (!c.on_frontier) continue;
        std::cout << "frontier " << c.estimate.plan_fingerprint << "  est: $"
                  << c.estimate.est_usd << ", " << c.estimate.est_runtime_s << " s, quality "
                  << c.estimate.est_quality << "\n";
    }
    print_chosen(report);
    return report.constraint_met ? 0 : 2;
}

int cmd_plans(const CommonArgs& args) {
    Session s = open_session(args);
    Engine engine(s.schemas, s.udfs, s.sources, s.models, *s.backend, s.cache.get());
    RunReport report = engine.optimize_and_run(s.plan, optimize_options(args, false));
    print_report_header(report);
    Value out = Value::array();
    for (const CandidateReport& c : report.candidates) {
        out.push_back(Value{{"fingerprint", c.estimate.plan_fingerprint},
                            {"est_usd", c.estimate.est_usd},
                            {"est_runtime_s", c.estimate.est_runtime_s},
                            {"est_quality", c.estimate.est_quality},
                            {"on_frontier", c.on_frontier},
                            {"listing", c.listing}});
    }
    if (!args.output_path.empty()) {
        std::ofstream file(args.output_path);
        file << out.dump(2) << "\n";
        std::cout << "wrote " << out.size() << " candidates to " << args.output_path << "\n";
    } else {
        std::cout << out.dump(2) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"declarative optimizer and executor for semantic analytics pipelines"};
    app.require_subcommand(1);

    // register
    std::string reg_registry = "sempipe_sources.ini", reg_id, reg_kind = "text_dir",
                reg_location, reg_schema = "TextFile";
    CLI::App* reg = app.add_subcommand("register", "register a datasource");
    reg->add_option("--id", reg_id, "dataset identifier")->required();
    reg->add_option("--kind", reg_kind, "text_dir | group_dir | file");
    reg->add_option("--location", reg_location, "path to the data")->required();
    reg->add_option("--schema", reg_schema, "base schema of scanned records");
    reg->add_option("--registry", reg_registry, "datasource registry file");

    CommonArgs run_args, explain_args, plans_args;
    CLI::App* run = app.add_subcommand("run", "optimize and execute a pipeline");
    add_common(run, run_args);
    CLI::App* explain = app.add_subcommand("explain", "sample and plan without executing");
    add_common(explain, explain_args);
    CLI::App* plans = app.add_subcommand("plans", "dump the full candidate set with estimates");
    add_common(plans, plans_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (reg->parsed())
            return cmd_register(reg_registry, reg_id, reg_kind, reg_location, reg_schema);
        if (run->parsed()) return cmd_run(run_args);
        if (explain->parsed()) return cmd_explain(explain_args);
        if (plans->parsed()) return cmd_plans(plans_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
