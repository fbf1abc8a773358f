#include "sempipe/record.hpp"

namespace sempipe {

Value Record::to_json() const {
    Value lin = Value::array();
    for (const auto& [op, cfg] : lineage) lin.push_back(Value{{"op", op}, {"config", cfg}});
    return Value{{"schema", schema},
                 {"values", values},
                 {"source_id", source_id},
                 {"source_index", source_index},
                 {"lineage", lin}};
}

Record Record::from_json(const Value& j) {
    Record r;
    r.schema = j.at("schema").get<std::string>();
    r.values = j.at("values");
    r.source_id = j.at("source_id").get<std::string>();
    r.source_index = j.at("source_index").get<std::int64_t>();
    for (const Value& e : j.value("lineage", Value::array()))
        r.lineage.emplace_back(e.at("op").get<std::string>(), e.at("config").get<std::string>());
    return r;
}

std::string validate_record(const Record& rec, const SchemaRegistry& schemas) {
    for (const FieldSpec& f : schemas.effective_fields(rec.schema)) {
        if (!rec.has(f.name)) {
            if (f.required)
                return "missing required field '" + f.name + "' for schema '" + rec.schema + "'";
            continue;
        }
        if (!conforms(rec.values.at(f.name), f.kind))
            return "field '" + f.name + "' does not conform to kind " + f.kind.to_string();
    }
    return {};
}

}  // namespace sempipe
