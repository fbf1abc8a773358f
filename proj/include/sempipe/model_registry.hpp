#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sempipe/value.hpp"

namespace sempipe {

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ModelTier { Cheap, Mid, Champion, Vision };
enum class BackendKind { Mock, Http };

std::string to_string(ModelTier t);
ModelTier tier_from_string(const std::string& s);

struct ModelSpec {
    std::string model_id;
    ModelTier tier = ModelTier::Cheap;
    double usd_per_million_input_tokens = 0.0;
    double usd_per_million_output_tokens = 0.0;
    std::int64_t context_limit_tokens = 128000;
    BackendKind backend = BackendKind::Mock;
    std::string endpoint;  // http backend base URL

    Value to_json() const;
    static ModelSpec from_json(const Value& j);
};

class ModelRegistry {
public:
    ModelRegistry() = default;

    void add(const ModelSpec& spec);
    bool contains(const std::string& id) const;
    const ModelSpec& get(const std::string& id) const;
    const std::vector<ModelSpec>& models() const { return models_; }

    // Exactly one champion-tier model must be configured per run.
    const ModelSpec& champion() const;
    std::optional<ModelSpec> of_tier(ModelTier tier) const;
    // Vision model paired with a tier's sentinel: the registry's vision model.
    std::optional<ModelSpec> vision_model() const { return of_tier(ModelTier::Vision); }

    void validate() const;

    static ModelRegistry load(const std::filesystem::path& file);
    void save(const std::filesystem::path& file) const;

    static ModelRegistry mock_defaults();  // cheap/mid/champion/vision mock models

private:
    std::vector<ModelSpec> models_;
};

}  // namespace sempipe
