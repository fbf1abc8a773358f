#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "sempipe/cost_model.hpp"

using namespace sempipe;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    SchemaRegistry schemas;
    UdfRegistry udfs;
    DataSourceRegistry sources;
    ModelRegistry models = ModelRegistry::mock_defaults();
    fs::path dir;

    Fixture() {
        dir = fs::temp_directory_path() / "sempipe_cost_fixture";
        fs::remove_all(dir);
        fs::create_directories(dir / "data");
        std::ofstream(dir / "data" / "a.txt") << "hello";
        sources.register_datasource({"docs", SourceKind::TextDir, dir / "data", "TextFile"});
        schemas.define_schema("Email", "TextFile",
                              {{"subject", "subject line", true, FieldKind::string()},
                               {"sender", "sender address", true, FieldKind::string()}});
    }
    ~Fixture() { fs::remove_all(dir); }

    PhysicalPlan filter_convert_plan() {
        Value pipeline{
            {"dataset", "docs"},
            {"ops",
             Value::array({Value{{"kind", "filter"},
                                 {"predicate", "mentions fraud"},
                                 {"depends_on", {"contents"}}},
                           Value{{"kind", "convert"},
                                 {"schema", "Email"},
                                 {"depends_on", {"contents"}}}})}};
        LogicalPlan lp = compile(pipeline, schemas, udfs, sources);
        return make_sentinels(lp, models, schemas)[0];  // all-cheap bonded 1.0
    }
};

// O(n^2) pairwise-dominance oracle, structured independently of the library's
// sorted sweep.
std::vector<PlanEstimate> frontier_oracle(const std::vector<PlanEstimate>& all) {
    auto dominates = [](const PlanEstimate& q, const PlanEstimate& p) {
        bool no_worse = q.est_runtime_s <= p.est_runtime_s && q.est_usd <= p.est_usd &&
                        q.est_quality >= p.est_quality;
        bool better = q.est_runtime_s < p.est_runtime_s || q.est_usd < p.est_usd ||
                      q.est_quality > p.est_quality;
        return no_worse && better;
    };
    std::vector<PlanEstimate> out;
    for (const PlanEstimate& p : all) {
        bool dominated = false;
        for (const PlanEstimate& q : all)
            if (dominates(q, p)) { dominated = true; break; }
        if (!dominated) out.push_back(p);
    }
    return out;
}

std::multiset<std::string> fps(const std::vector<PlanEstimate>& v) {
    std::multiset<std::string> out;
    for (const auto& e : v) out.insert(e.plan_fingerprint);
    return out;
}

}  // namespace

TEST_CASE("policy parsing") {
    Policy p = Policy::parse("min-cost-at-quality=0.8");
    CHECK(p.kind == Policy::Kind::MinCostAtFixedQuality);
    CHECK(p.threshold == 0.8);
    CHECK(Policy::parse("max-quality-at-cost=2.5").kind ==
          Policy::Kind::MaxQualityAtFixedCost);
    CHECK(Policy::parse("max-quality-at-runtime=60").kind ==
          Policy::Kind::MaxQualityAtFixedRuntime);
    CHECK_THROWS_AS(Policy::parse("min-cost-at-quality"), std::invalid_argument);
    CHECK_THROWS_AS(Policy::parse("frobnicate=1"), std::invalid_argument);
    CHECK_THROWS_AS(Policy::parse("min-cost-at-quality=1.5"), std::invalid_argument);
    CHECK_THROWS_AS(Policy::parse("max-quality-at-cost=-1"), std::invalid_argument);
}

TEST_CASE("estimator reproduces the worked example exactly") {
    Fixture f;
    PhysicalPlan plan = f.filter_convert_plan();

    StatsTable stats;
    OperatorStats filt;
    filt.n_samples = 5;
    filt.mean_usd = 0.001;
    filt.mean_latency_s = 0.1;
    filt.selectivity = 0.5;
    filt.quality = 1.0;
    stats.set({"01_filter", Strategy::LlmBondedWithFallback, "mock-cheap", 1.0}, filt);

    OperatorStats conv;
    conv.n_samples = 5;
    conv.mean_usd = 0.01;
    conv.mean_latency_s = 1.0;
    conv.quality = 1.0;
    stats.set({"02_convert_Email", Strategy::LlmBondedWithFallback, "mock-cheap", 1.0}, conv);

    PlanEstimate est = estimate(plan, stats, 100, f.models);
    // 100 x $0.001 + 50 x $0.01 = $0.60; 100 x 0.1s + 50 x 1s = 60s
    CHECK(est.est_usd == doctest::Approx(0.60).epsilon(1e-12));
    CHECK(est.est_runtime_s == doctest::Approx(60.0).epsilon(1e-12));
    CHECK(est.est_quality == doctest::Approx(1.0));

    // linearity at 2x input
    PlanEstimate twice = estimate(plan, stats, 200, f.models);
    CHECK(twice.est_usd == doctest::Approx(2 * est.est_usd));
    CHECK(twice.est_runtime_s == doctest::Approx(2 * est.est_runtime_s));

    // parallel runtime uses ceil(n / workers) batches
    EstimateConfig par;
    par.workers = 32;
    PlanEstimate pe = estimate(plan, stats, 100, f.models, par);
    CHECK(pe.est_runtime_s ==
          doctest::Approx(std::ceil(100.0 / 32) * 0.1 + std::ceil(50.0 / 32) * 1.0));
    CHECK(pe.est_usd == doctest::Approx(est.est_usd));  // cost unchanged by parallelism

    // missing stats for an LLM op is an error
    StatsTable empty;
    CHECK_THROWS(estimate(plan, empty, 100, f.models));
}

TEST_CASE("estimator borrows sentinel stats for unsampled budgets with a quality prior") {
    Fixture f;
    PhysicalPlan plan = f.filter_convert_plan();

    StatsTable stats;
    OperatorStats filt;
    filt.n_samples = 5;
    filt.mean_usd = 0.001;
    filt.mean_latency_s = 0.1;
    filt.selectivity = 0.5;
    filt.quality = 0.9;
    stats.set({"01_filter", Strategy::LlmBondedWithFallback, "mock-cheap", 1.0}, filt);
    OperatorStats conv;
    conv.n_samples = 5;
    conv.mean_usd = 0.01;
    conv.mean_latency_s = 1.0;
    conv.quality = 1.0;
    stats.set({"02_convert_Email", Strategy::LlmBondedWithFallback, "mock-cheap", 1.0}, conv);

    PhysicalPlan reduced = plan;
    reduced.configs[1].token_budget = 0.5;
    PlanEstimate est = estimate(reduced, stats, 100, f.models);
    // filter cost scales by the budget; convert unchanged
    CHECK(est.est_usd == doctest::Approx(100 * 0.001 * 0.5 + 50 * 0.01));
    // quality multiplies by the 0.5-budget prior (0.9)
    CHECK(est.est_quality == doctest::Approx(0.9 * 0.9 * 1.0));

    // full-budget per_field borrows bonded stats without a quality penalty
    PhysicalPlan per_field = plan;
    per_field.configs[2].strategy = Strategy::LlmPerField;
    PlanEstimate pf = estimate(per_field, stats, 100, f.models);
    CHECK(pf.est_quality == doctest::Approx(0.9));
}

TEST_CASE("convert scoring: exact field 5/5 plus 0.6-mean token-F1 field gives 0.8") {
    std::vector<FieldSpec> fields{
        {"subject", "subject line", true, FieldKind::string()},
        {"sender", "sender address", true, FieldKind::string()}};

    OpOutputs champion, candidate;
    // sender matches exactly on all 5 records; subject token-F1 scores
    // {1, 1, 1, 0, 0} for a mean of 0.6
    const char* subj_champ[5] = {"board meeting", "fraud alert", "q3 numbers",
                                 "totally different", "another mismatch"};
    const char* subj_cand[5] = {"board meeting", "fraud alert", "q3 numbers",
                                "nothing shared here", "zero overlap text"};
    for (int i = 0; i < 5; i++) {
        std::string id = "r" + std::to_string(i);
        champion.outputs[id] = Value{{"sender", "a@b.c"}, {"subject", subj_champ[i]}};
        candidate.outputs[id] = Value{{"sender", "a@b.c"}, {"subject", subj_cand[i]}};
    }
    double q = score_quality_vs_champion(candidate, champion, fields);
    CHECK(q == doctest::Approx(0.8));
}

TEST_CASE("filter scoring counts one-sided records as mismatches") {
    OpOutputs champion, candidate;
    champion.is_filter = candidate.is_filter = true;
    champion.decisions = {{"a", true}, {"b", false}, {"c", true}, {"d", true}};
    candidate.decisions = {{"a", true}, {"b", true}, {"c", true}};  // d missing
    // agree on a and c; disagree on b; d one-sided -> 2/4
    CHECK(score_quality_vs_champion(candidate, champion, {}) == doctest::Approx(0.5));
}

TEST_CASE("oneToMany convert scoring aligns rows by index") {
    std::vector<FieldSpec> fields{{"name", "person name", true, FieldKind::string()}};
    OpOutputs champion, candidate;
    champion.outputs["a"] = Value::array({Value{{"name", "alice"}}, Value{{"name", "bob"}}});
    candidate.outputs["a"] =
        Value::array({Value{{"name", "alice"}}, Value{{"name", "bob"}}, Value{{"name", "eve"}}});
    // 2 matching rows of max-length 3
    CHECK(score_quality_vs_champion(candidate, champion, fields) ==
          doctest::Approx(2.0 / 3.0));
}

TEST_CASE("pareto frontier equals the pairwise oracle on 1000 random triples") {
    std::mt19937 rng(20240817);
    // coarse grids create ties and duplicates on purpose
    std::uniform_int_distribution<int> runtime(0, 19), usd(0, 19), quality(0, 9);
    std::vector<PlanEstimate> all;
    for (int i = 0; i < 1000; i++) {
        PlanEstimate e;
        e.plan_fingerprint = "p" + std::to_string(i);
        e.est_runtime_s = runtime(rng) * 0.5;
        e.est_usd = usd(rng) * 0.25;
        e.est_quality = quality(rng) * 0.1;
        all.push_back(e);
    }
    CHECK(fps(pareto_frontier(all)) == fps(frontier_oracle(all)));

    // all-equal ties survive together
    std::vector<PlanEstimate> ties(3);
    for (int i = 0; i < 3; i++) {
        ties[i].plan_fingerprint = "t" + std::to_string(i);
        ties[i].est_runtime_s = 1;
        ties[i].est_usd = 1;
        ties[i].est_quality = 0.5;
    }
    CHECK(pareto_frontier(ties).size() == 3);
}

TEST_CASE("choose matches exhaustive search across 200 random candidate sets") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> ur(0.0, 10.0);
    std::uniform_real_distribution<double> uq(0.0, 1.0);

    for (int trial = 0; trial < 200; trial++) {
        std::vector<PlanEstimate> set;
        int n = 1 + static_cast<int>(ur(rng));
        for (int i = 0; i < n; i++) {
            PlanEstimate e;
            e.plan_fingerprint = "s" + std::to_string(trial) + "_" + std::to_string(i);
            e.est_runtime_s = ur(rng);
            e.est_usd = ur(rng);
            e.est_quality = uq(rng);
            set.push_back(e);
        }
        Policy policies[3] = {
            {Policy::Kind::MaxQualityAtFixedCost, ur(rng) + 0.01},
            {Policy::Kind::MaxQualityAtFixedRuntime, ur(rng) + 0.01},
            {Policy::Kind::MinCostAtFixedQuality, uq(rng) + 0.001},
        };
        for (const Policy& policy : policies) {
            ChoiceResult got = choose(set, policy);

            auto satisfies = [&](const PlanEstimate& e) {
                if (policy.kind == Policy::Kind::MaxQualityAtFixedCost)
                    return e.est_usd <= policy.threshold;
                if (policy.kind == Policy::Kind::MaxQualityAtFixedRuntime)
                    return e.est_runtime_s <= policy.threshold;
                return e.est_quality >= policy.threshold;
            };
            // exhaustive oracle: filter then sort by (objective, usd, runtime, fp)
            std::vector<PlanEstimate> ok;
            for (const auto& e : set)
                if (satisfies(e)) ok.push_back(e);
            bool any = !ok.empty();
            CHECK(got.constraint_met == any);
            if (any) {
                std::sort(ok.begin(), ok.end(), [&](const auto& a, const auto& b) {
                    if (policy.kind == Policy::Kind::MinCostAtFixedQuality) {
                        if (a.est_usd != b.est_usd) return a.est_usd < b.est_usd;
                    } else if (a.est_quality != b.est_quality) {
                        return a.est_quality > b.est_quality;
                    }
                    if (a.est_usd != b.est_usd) return a.est_usd < b.est_usd;
                    if (a.est_runtime_s != b.est_runtime_s)
                        return a.est_runtime_s < b.est_runtime_s;
                    return a.plan_fingerprint < b.plan_fingerprint;
                });
                CHECK(got.chosen.plan_fingerprint == ok.front().plan_fingerprint);
                CHECK(satisfies(got.chosen));
            } else {
                // minimal violation
                auto violation = [&](const PlanEstimate& e) {
                    if (policy.kind == Policy::Kind::MaxQualityAtFixedCost)
                        return e.est_usd - policy.threshold;
                    if (policy.kind == Policy::Kind::MaxQualityAtFixedRuntime)
                        return e.est_runtime_s - policy.threshold;
                    return policy.threshold - e.est_quality;
                };
                for (const auto& e : set)
                    CHECK(violation(got.chosen) <= violation(e) + 1e-12);
            }
        }
    }
    CHECK_THROWS(choose({}, Policy{}));
}

TEST_CASE("aggregate_stats folds traces into per-key statistics") {
    Fixture f;
    PhysicalPlan cheap = f.filter_convert_plan();
    PhysicalPlan champ = cheap;
    for (size_t i = 1; i < champ.configs.size(); i++) champ.configs[i].model_id = "mock-champion";

    auto filter_entry = [&](const PhysicalPlan& p, const std::string& src, bool keep,
                            double usd) {
        TraceEntry e;
        e.op_id = "01_filter";
        e.op_kind = OpKind::Filter;
        e.strategy = Strategy::LlmBondedWithFallback;
        e.model_id = *p.configs[1].model_id;
        e.token_budget = 1.0;
        e.source_id = src;
        e.usd = usd;
        e.latency_s = 0.2;
        e.outcome = keep ? Outcome::Emitted : Outcome::Dropped;
        e.emitted = keep ? 1 : 0;
        return e;
    };
    auto convert_entry = [&](const PhysicalPlan& p, const std::string& src,
                             const std::string& subject) {
        TraceEntry e;
        e.op_id = "02_convert_Email";
        e.op_kind = OpKind::Convert;
        e.strategy = Strategy::LlmBondedWithFallback;
        e.model_id = *p.configs[2].model_id;
        e.token_budget = 1.0;
        e.source_id = src;
        e.usd = 0.01;
        e.latency_s = 1.0;
        e.outcome = Outcome::Emitted;
        e.emitted = 1;
        e.output_values = Value{{"subject", subject}, {"sender", "x@y.z"}};
        return e;
    };

    ExecutionTrace champ_trace;
    ExecutionTrace cheap_trace;
    // champion keeps a and b, drops c; cheap agrees on a, disagrees on b and c
    champ_trace.entries = {filter_entry(champ, "a", true, 0.03),
                           filter_entry(champ, "b", true, 0.03),
                           filter_entry(champ, "c", false, 0.03),
                           convert_entry(champ, "a", "board meeting"),
                           convert_entry(champ, "b", "fraud alert")};
    cheap_trace.entries = {filter_entry(cheap, "a", true, 0.001),
                           filter_entry(cheap, "b", false, 0.001),
                           filter_entry(cheap, "c", true, 0.001),
                           convert_entry(cheap, "a", "board meeting"),
                           convert_entry(cheap, "c", "wrong one")};

    StatsTable stats = aggregate_stats({{cheap, cheap_trace}, {champ, champ_trace}}, champ,
                                       champ_trace, f.schemas);

    auto champ_filter =
        stats.get({"01_filter", Strategy::LlmBondedWithFallback, "mock-champion", 1.0});
    REQUIRE(champ_filter.has_value());
    CHECK(champ_filter->selectivity == doctest::Approx(2.0 / 3.0));
    CHECK(champ_filter->quality == doctest::Approx(1.0));  // champion is the reference
    CHECK(champ_filter->mean_usd == doctest::Approx(0.03));
    CHECK(champ_filter->n_samples == 3);

    auto cheap_filter =
        stats.get({"01_filter", Strategy::LlmBondedWithFallback, "mock-cheap", 1.0});
    REQUIRE(cheap_filter.has_value());
    CHECK(cheap_filter->quality == doctest::Approx(1.0 / 3.0));  // agrees only on a

    auto cheap_conv =
        stats.get({"02_convert_Email", Strategy::LlmBondedWithFallback, "mock-cheap", 1.0});
    REQUIRE(cheap_conv.has_value());
    // union {a, b, c}: a scores 1, b one-sided 0, c one-sided 0
    CHECK(cheap_conv->quality == doctest::Approx(1.0 / 3.0));

    CHECK_FALSE(stats.has_zero_quality("01_filter", "mock-cheap"));
    CHECK_THROWS(aggregate_stats({{cheap, cheap_trace}}, champ, ExecutionTrace{}, f.schemas));
}

TEST_CASE("stats table persists and fingerprints") {
    StatsTable stats;
    OperatorStats s;
    s.n_samples = 7;
    s.mean_latency_s = 0.25;
    s.mean_usd = 0.003;
    s.selectivity = 0.4;
    s.fanout = 2.5;
    s.quality = 0.875;
    stats.set({"01_filter", Strategy::LlmPerField, "mock-mid", 0.5}, s);

    fs::path file = fs::temp_directory_path() / "sempipe_stats_roundtrip.tsv";
    stats.save(file);
    StatsTable loaded = StatsTable::load(file);
    fs::remove(file);

    auto got = loaded.get({"01_filter", Strategy::LlmPerField, "mock-mid", 0.5});
    REQUIRE(got.has_value());
    CHECK(got->n_samples == 7);
    CHECK(got->mean_latency_s == doctest::Approx(0.25));
    CHECK(got->quality == doctest::Approx(0.875));
    CHECK(loaded.fingerprint() == stats.fingerprint());

    StatsTable other;
    CHECK(other.fingerprint() != stats.fingerprint());
}

TEST_CASE("sample_count clamps between floor, ceiling, and population") {
    SampleConfig cfg;  // 5%, min 3, max 1000
    CHECK(cfg.sample_count(1000) == 50);
    CHECK(cfg.sample_count(10) == 3);
    CHECK(cfg.sample_count(2) == 2);     // cannot exceed the population
    CHECK(cfg.sample_count(100000) == 1000);
    CHECK(cfg.sample_count(61) == 4);    // ceil(3.05)
}
