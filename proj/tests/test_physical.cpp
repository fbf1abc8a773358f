#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "sempipe/physical_plan.hpp"

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
        dir = fs::temp_directory_path() / "sempipe_physical_fixture";
        fs::remove_all(dir);
        fs::create_directories(dir / "data");
        std::ofstream(dir / "data" / "a.txt") << "hello";
        sources.register_datasource({"docs", SourceKind::TextDir, dir / "data", "TextFile"});
        schemas.define_schema("Email", "TextFile",
                              {{"subject", "subject line", true, FieldKind::string()},
                               {"sender", "sender address", true, FieldKind::string()}});
        schemas.define_schema("Scored", "Email",
                              {{"urgency", "urgency from 0 to 10", true, FieldKind::number()}});
    }
    ~Fixture() { fs::remove_all(dir); }

    LogicalPlan compile_ops(const Value& ops) {
        Value pipeline{{"dataset", "docs"}, {"ops", ops}};
        return compile(pipeline, schemas, udfs, sources);
    }
};

Value convert_email() {
    return Value{{"kind", "convert"}, {"schema", "Email"}, {"depends_on", {"contents"}}};
}
Value filter_fraud() {
    return Value{{"kind", "filter"}, {"predicate", "mentions fraud"},
                 {"depends_on", {"contents"}}};
}

size_t non_vision_models(const ModelRegistry& reg) {
    size_t n = 0;
    for (const ModelSpec& m : reg.models())
        if (m.tier != ModelTier::Vision) n++;
    return n;
}

}  // namespace

TEST_CASE("physical enumeration count matches the arithmetic oracle") {
    Fixture f;
    LogicalPlan plan = f.compile_ops(Value::array({convert_email(), filter_fraud()}));

    ParamSpace space;
    for (const ModelSpec& m : f.models.models()) space.model_ids.push_back(m.model_id);
    space.strategies = {Strategy::LlmBondedWithFallback, Strategy::LlmPerField};
    space.token_budgets = {1.0};

    auto plans = enumerate_physical({plan}, space, f.models, f.schemas);
    // per LLM op: 2 strategies x 3 non-vision models x 1 budget
    size_t per_op = 2 * non_vision_models(f.models);
    CHECK(plans.size() == per_op * per_op);

    space.token_budgets = {0.1, 0.5, 0.9, 1.0};
    space.strategies = {Strategy::LlmBondedWithFallback, Strategy::LlmPerField,
                        Strategy::CodeSynth};
    plans = enumerate_physical({plan}, space, f.models, f.schemas);
    // convert additionally admits one code_synth config; the filter does not
    size_t per_llm = 2 * non_vision_models(f.models) * 4;
    CHECK(plans.size() == (per_llm + 1) * per_llm);

    // all enumerated plans satisfy the physical invariants
    for (const PhysicalPlan& p : plans) CHECK(validate_physical(p).empty());

    // fingerprints are unique and sorted
    std::set<std::string> fps;
    std::string prev;
    for (const PhysicalPlan& p : plans) {
        std::string fp = p.fingerprint();
        CHECK(fps.insert(fp).second);
        CHECK(prev <= fp);
        prev = fp;
    }
}

TEST_CASE("enumeration deduplicates across logical plans") {
    Fixture f;
    LogicalPlan plan = f.compile_ops(Value::array({filter_fraud()}));
    ParamSpace space;
    space.model_ids = {"mock-cheap"};
    space.strategies = {Strategy::LlmBondedWithFallback};
    space.token_budgets = {1.0};
    auto once = enumerate_physical({plan}, space, f.models, f.schemas);
    auto twice = enumerate_physical({plan, plan}, space, f.models, f.schemas);
    CHECK(once.size() == twice.size());
}

TEST_CASE("validate_physical rejects each invariant violation") {
    Fixture f;
    LogicalPlan plan = f.compile_ops(Value::array({convert_email()}));
    auto sentinels = make_sentinels(plan, f.models, f.schemas);
    PhysicalPlan good = sentinels[0];
    CHECK(validate_physical(good).empty());

    PhysicalPlan bad = good;
    bad.configs[1].model_id.reset();
    CHECK_FALSE(validate_physical(bad).empty());  // LLM strategy needs a model

    bad = good;
    bad.configs[1].token_budget = 1.5;
    CHECK_FALSE(validate_physical(bad).empty());  // budget out of range

    bad = good;
    bad.configs[0].strategy = Strategy::Hardcoded;
    bad.configs[0].model_id = "mock-cheap";
    CHECK_FALSE(validate_physical(bad).empty());  // non-LLM with a model

    bad = good;
    bad.configs[1].strategy = Strategy::CodeSynth;
    bad.configs[1].token_budget = 0.5;
    CHECK_FALSE(validate_physical(bad).empty());  // code_synth must run full budget

    bad = good;
    bad.configs.pop_back();
    CHECK_FALSE(validate_physical(bad).empty());  // arity mismatch
}

TEST_CASE("sentinels are one bonded budget-1.0 plan per tier") {
    Fixture f;
    LogicalPlan plan = f.compile_ops(Value::array({convert_email(), filter_fraud()}));
    auto sentinels = make_sentinels(plan, f.models, f.schemas);
    REQUIRE(sentinels.size() == 3);
    std::vector<std::string> expect{"mock-cheap", "mock-mid", "mock-champion"};
    for (size_t i = 0; i < 3; i++) {
        for (size_t k = 1; k < sentinels[i].configs.size(); k++) {
            const PhysicalOpConfig& cfg = sentinels[i].configs[k];
            CHECK(cfg.strategy == Strategy::LlmBondedWithFallback);
            CHECK(cfg.model_id == expect[i]);
            CHECK(cfg.token_budget == 1.0);
        }
    }
}

TEST_CASE("a plan without llm ops collapses to a single sentinel") {
    Fixture f;
    f.schemas.define_schema("Listing", "TextFile",
                            {{"address", "street address", true, FieldKind::string()}});
    LogicalPlan plan = f.compile_ops(Value::array({Value{{"kind", "limit"}, {"n", 3}}}));
    auto sentinels = make_sentinels(plan, f.models, f.schemas);
    CHECK(sentinels.size() == 1);
    for (const PhysicalOpConfig& cfg : sentinels[0].configs)
        CHECK_FALSE(cfg.model_id.has_value());
}

TEST_CASE("missing tier makes sentinel construction fail") {
    Fixture f;
    ModelRegistry partial;
    partial.add(f.models.get("mock-champion"));
    LogicalPlan plan = f.compile_ops(Value::array({filter_fraud()}));
    CHECK_THROWS_AS(make_sentinels(plan, partial, f.schemas), ModelError);
}

TEST_CASE("vision-dependent converts bind to the vision model") {
    Fixture f;
    f.schemas.define_schema("ListingFiles", std::nullopt,
                            {{"listing", "name", true, FieldKind::string()},
                             {"text_content", "text", true, FieldKind::string()},
                             {"image_contents", "photos", true,
                              FieldKind::list_of(FieldKind::bytes())}});
    f.schemas.define_schema("ImageListing", "ListingFiles",
                            {{"is_modern", "looks modern", true, FieldKind::boolean()}});
    fs::create_directories(f.dir / "groups" / "g1");
    std::ofstream(f.dir / "groups" / "g1" / "a.txt") << "x";
    f.sources.register_datasource(
        {"listings", SourceKind::GroupDir, f.dir / "groups", "ListingFiles"});

    Value pipeline{{"dataset", "listings"},
                   {"ops", Value::array({Value{{"kind", "convert"},
                                               {"schema", "ImageListing"},
                                               {"depends_on", {"image_contents"}}}})}};
    LogicalPlan plan = compile(pipeline, f.schemas, f.udfs, f.sources);
    CHECK(is_vision_dependent(plan, 1, f.schemas));

    auto sentinels = make_sentinels(plan, f.models, f.schemas);
    for (const PhysicalPlan& s : sentinels)
        CHECK(s.configs[1].model_id == std::string("mock-vision"));

    // enumeration only offers vision-tier models for the vision op
    ParamSpace space;
    for (const ModelSpec& m : f.models.models()) space.model_ids.push_back(m.model_id);
    space.strategies = {Strategy::LlmBondedWithFallback, Strategy::CodeSynth};
    space.token_budgets = {1.0};
    auto plans = enumerate_physical({plan}, space, f.models, f.schemas);
    for (const PhysicalPlan& p : plans)
        CHECK(p.configs[1].model_id == std::string("mock-vision"));
    // code_synth is inadmissible for vision converts: bonded x 1 model x 1 budget
    CHECK(plans.size() == 1);
}

TEST_CASE("code_synth admissibility") {
    Fixture f;
    LogicalPlan plan = f.compile_ops(Value::array({convert_email(), filter_fraud()}));
    CHECK(code_synth_admissible(plan, 1, f.schemas));
    CHECK_FALSE(code_synth_admissible(plan, 2, f.schemas));  // filters never qualify

    f.schemas.define_schema("Flagged", "TextFile",
                            {{"is_spam", "spam verdict", true, FieldKind::boolean()}});
    LogicalPlan bool_plan = f.compile_ops(Value::array(
        {Value{{"kind", "convert"}, {"schema", "Flagged"}, {"depends_on", {"contents"}}}}));
    CHECK_FALSE(code_synth_admissible(bool_plan, 1, f.schemas));  // boolean target

    LogicalPlan many = f.compile_ops(Value::array({Value{{"kind", "convert"},
                                                         {"schema", "Email"},
                                                         {"cardinality", "oneToMany"},
                                                         {"depends_on", {"contents"}}}}));
    CHECK_FALSE(code_synth_admissible(many, 1, f.schemas));  // oneToMany
}

TEST_CASE("naive elimination removes zero-quality pairings but keeps sentinels") {
    Fixture f;
    LogicalPlan plan = f.compile_ops(Value::array({filter_fraud()}));
    ParamSpace space;
    for (const ModelSpec& m : f.models.models()) space.model_ids.push_back(m.model_id);
    space.strategies = {Strategy::LlmBondedWithFallback, Strategy::LlmPerField};
    space.token_budgets = {0.5, 1.0};
    auto candidates = enumerate_physical({plan}, space, f.models, f.schemas);
    auto sentinels = make_sentinels(plan, f.models, f.schemas);

    StatsTable stats;
    OperatorStats zero;
    zero.n_samples = 3;
    zero.quality = 0.0;
    stats.set({"01_filter", Strategy::LlmBondedWithFallback, "mock-cheap", 1.0}, zero);

    auto surviving = naive_eliminate(candidates, stats, sentinels);
    size_t cheap_non_sentinel = 0;
    std::set<std::string> sentinel_fps;
    for (const PhysicalPlan& s : sentinels) sentinel_fps.insert(s.fingerprint());
    bool cheap_sentinel_present = false;
    for (const PhysicalPlan& p : surviving) {
        bool uses_cheap = p.configs[1].model_id == std::string("mock-cheap");
        if (uses_cheap && sentinel_fps.count(p.fingerprint())) cheap_sentinel_present = true;
        else if (uses_cheap) cheap_non_sentinel++;
    }
    CHECK(cheap_non_sentinel == 0);       // every non-sentinel cheap plan removed
    CHECK(cheap_sentinel_present);        // the sentinel itself survives
    CHECK(surviving.size() < candidates.size());
}

TEST_CASE("prefix fingerprints depend on backend identity and prefix content") {
    Fixture f;
    LogicalPlan plan = f.compile_ops(Value::array({convert_email(), filter_fraud()}));
    auto sentinels = make_sentinels(plan, f.models, f.schemas);
    const PhysicalPlan& p = sentinels[0];
    CHECK(p.prefix_fingerprint(2, "mock") != p.prefix_fingerprint(2, "http"));
    CHECK(p.prefix_fingerprint(2, "mock") != p.prefix_fingerprint(3, "mock"));
    CHECK(p.prefix_fingerprint(3, "mock") == p.prefix_fingerprint(3, "mock"));
}

TEST_CASE("model registry round-trips and enforces a single champion") {
    Fixture f;
    fs::path file = f.dir / "models.json";
    f.models.save(file);
    ModelRegistry loaded = ModelRegistry::load(file);
    CHECK(loaded.models().size() == f.models.models().size());
    CHECK(loaded.champion().model_id == "mock-champion");

    ModelRegistry dup = loaded;
    ModelSpec second = loaded.champion();
    second.model_id = "another-champion";
    dup.add(second);
    CHECK_THROWS_AS(dup.champion(), ModelError);
}
