#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sempipe/value.hpp"

namespace sempipe {

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One named, typed field with a natural-language description. The description
/// is the only semantic signal the convert operator receives, so it must be
/// nonempty.
struct FieldSpec {
    std::string name;
    std::string description;
    bool required = true;
    FieldKind kind = FieldKind::string();
};

struct Schema {
    std::string name;
    std::optional<std::string> parent;
    std::vector<FieldSpec> fields;  // own fields only
    std::string doc;
};

/// Registry of schemas with single inheritance. Effective field set of a
/// schema is its parent chain's fields followed by its own, in declaration
/// order. A child may not redeclare a parent field with a different kind.
class SchemaRegistry {
public:
    SchemaRegistry();  // registers builtins: File, TextFile

    const Schema& define_schema(const std::string& name,
                                const std::optional<std::string>& parent,
                                std::vector<FieldSpec> fields, std::string doc = "");

    bool contains(const std::string& name) const { return schemas_.count(name) > 0; }
    const Schema& get(const std::string& name) const;

    // Parent chain fields followed by own fields, in declaration order.
    std::vector<FieldSpec> effective_fields(const std::string& name) const;

    // Fields of `output` (effective) absent by name from `input` (effective),
    // in output declaration order.
    std::vector<FieldSpec> missing_fields(const std::string& input,
                                          const std::string& output) const;

    std::vector<std::string> names() const;

    void define_from_json(const Value& spec);  // one schema object
    Value to_json(const std::string& name) const;

private:
    std::map<std::string, Schema> schemas_;
};

FieldSpec field_spec_from_json(const Value& j);
Value field_spec_to_json(const FieldSpec& f);

}  // namespace sempipe
