#include "sempipe/model_registry.hpp"

#include <fstream>

namespace sempipe {

std::string to_string(ModelTier t) {
    switch (t) {
        case ModelTier::Cheap: return "cheap";
        case ModelTier::Mid: return "mid";
        case ModelTier::Champion: return "champion";
        case ModelTier::Vision: return "vision";
    }
    return "cheap";
}

ModelTier tier_from_string(const std::string& s) {
    if (s == "cheap") return ModelTier::Cheap;
    if (s == "mid") return ModelTier::Mid;
    if (s == "champion") return ModelTier::Champion;
    if (s == "vision") return ModelTier::Vision;
    throw ModelError("unknown model tier '" + s + "'");
}

Value ModelSpec::to_json() const {
    Value j{{"model_id", model_id},
            {"tier", to_string(tier)},
            {"usd_per_million_input_tokens", usd_per_million_input_tokens},
            {"usd_per_million_output_tokens", usd_per_million_output_tokens},
            {"context_limit_tokens", context_limit_tokens},
            {"backend", backend == BackendKind::Mock ? "mock" : "http"}};
    if (!endpoint.empty()) j["endpoint"] = endpoint;
    return j;
}

ModelSpec ModelSpec::from_json(const Value& j) {
    ModelSpec m;
    m.model_id = j.at("model_id").get<std::string>();
    m.tier = tier_from_string(j.at("tier").get<std::string>());
    m.usd_per_million_input_tokens = j.value("usd_per_million_input_tokens", 0.0);
    m.usd_per_million_output_tokens = j.value("usd_per_million_output_tokens", 0.0);
    m.context_limit_tokens = j.value("context_limit_tokens", std::int64_t{128000});
    m.backend = j.value("backend", std::string("mock")) == "http" ? BackendKind::Http
                                                                  : BackendKind::Mock;
    m.endpoint = j.value("endpoint", std::string{});
    if (m.usd_per_million_input_tokens < 0 || m.usd_per_million_output_tokens < 0)
        throw ModelError("model prices must be >= 0");
    if (m.context_limit_tokens <= 0) throw ModelError("context limit must be > 0");
    return m;
}

void ModelRegistry::add(const ModelSpec& spec) {
    if (contains(spec.model_id)) throw ModelError("model '" + spec.model_id + "' already registered");
    models_.push_back(spec);
}

bool ModelRegistry::contains(const std::string& id) const {
    for (const ModelSpec& m : models_)
        if (m.model_id == id) return true;
    return false;
}

const ModelSpec& ModelRegistry::get(const std::string& id) const {
    for (const ModelSpec& m : models_)
        if (m.model_id == id) return m;
    throw ModelError("unknown model '" + id + "'");
}

const ModelSpec& ModelRegistry::champion() const {
    const ModelSpec* found = nullptr;
    for (const ModelSpec& m : models_) {
        if (m.tier != ModelTier::Champion) continue;
        if (found) throw ModelError("more than one champion-tier model configured");
        found = &m;
    }
    if (!found) throw ModelError("no champion-tier model configured");
    return *found;
}

std::optional<ModelSpec> ModelRegistry::of_tier(ModelTier tier) const {
    for (const ModelSpec& m : models_)
        if (m.tier == tier) return m;
    return std::nullopt;
}

void ModelRegistry::validate() const {
    champion();  // throws when missing or duplicated
}

ModelRegistry ModelRegistry::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ModelError("cannot read model registry: " + file.string());
    Value doc = Value::parse(in);
    ModelRegistry reg;
    for (const Value& mj : doc.at("models")) reg.add(ModelSpec::from_json(mj));
    return reg;
}

void ModelRegistry::save(const std::filesystem::path& file) const {
    Value arr = Value::array();
    for (const ModelSpec& m : models_) arr.push_back(m.to_json());
    std::ofstream out(file, std::ios::trunc);
    out << Value{{"models", arr}}.dump(2) << "\n";
}

ModelRegistry ModelRegistry::mock_defaults() {
    ModelRegistry reg;
    reg.add({"mock-cheap", ModelTier::Cheap, 0.5, 1.5, 16000, BackendKind::Mock, ""});
    reg.add({"mock-mid", ModelTier::Mid, 3.0, 9.0, 32000, BackendKind::Mock, ""});
    reg.add({"mock-champion", ModelTier::Champion, 30.0, 60.0, 128000, BackendKind::Mock, ""});
    reg.add({"mock-vision", ModelTier::Vision, 10.0, 30.0, 128000, BackendKind::Mock, ""});
    return reg;
}

}  // namespace sempipe
