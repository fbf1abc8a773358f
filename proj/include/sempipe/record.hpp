#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sempipe/schema.hpp"
#include "sempipe/value.hpp"

namespace sempipe {

/// One data object flowing through a plan. Immutable by convention: operators
/// produce new records instead of mutating inputs. source_id / source_index
/// identify the originating base object and never change downstream.
struct Record {
    std::string schema;
    Value values = Value::object();  // field name -> value
    std::string source_id;
    std::int64_t source_index = 0;
    std::vector<std::pair<std::string, std::string>> lineage;  // (op_id, config_id)

    bool has(const std::string& field) const {
        return values.contains(field) && !values.at(field).is_null();
    }

    Value to_json() const;
    static Record from_json(const Value& j);
};

// Checks every required field of the schema is present and kind-conformant.
// Returns an error message, or empty string when valid.
std::string validate_record(const Record& rec, const SchemaRegistry& schemas);

}  // namespace sempipe
