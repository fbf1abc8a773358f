#include "sempipe/schema.hpp"

#include <set>
#include <unordered_set>

namespace sempipe {

SchemaRegistry::SchemaRegistry() {
    define_schema("File", std::nullopt,
                  {{"filename", "The name of the file", true, FieldKind::string()}},
                  "A raw input file");
    define_schema("TextFile", "File",
                  {{"contents", "The full text contents of the file", true,
                    FieldKind::string()}},
                  "A plain text file");
}

const Schema& SchemaRegistry::define_schema(const std::string& name,
                                            const std::optional<std::string>& parent,
                                            std::vector<FieldSpec> fields,
                                            std::string doc) {
    if (name.empty()) throw SchemaError("schema name must be nonempty");
    if (schemas_.count(name))
        throw SchemaError("schema '" + name + "' already defined");
    if (parent && !schemas_.count(*parent))
        throw SchemaError("unknown parent schema '" + *parent + "'");
    // parent chain is acyclic by construction: parents must already exist and
    // a schema cannot name itself (it is not yet registered)

    std::map<std::string, FieldKind> inherited;
    if (parent) {
        for (const FieldSpec& f : effective_fields(*parent)) inherited.emplace(f.name, f.kind);
    }
    std::unordered_set<std::string> own;
    for (const FieldSpec& f : fields) {
        if (f.name.empty()) throw SchemaError("field name must be nonempty in schema '" + name + "'");
        if (f.description.empty())
            throw SchemaError("field '" + f.name + "' in schema '" + name +
                              "' must have a description");
        if (!own.insert(f.name).second)
            throw SchemaError("duplicate field '" + f.name + "' in schema '" + name + "'");
        auto it = inherited.find(f.name);
        if (it != inherited.end() && it->second != f.kind)
            throw SchemaError("field '" + f.name + "' in schema '" + name +
                              "' redeclares parent field with kind " + f.kind.to_string() +
                              " (parent has " + it->second.to_string() + ")");
    }
    Schema s{name, parent, std::move(fields), std::move(doc)};
    return schemas_.emplace(name, std::move(s)).first->second;
}

const Schema& SchemaRegistry::get(const std::string& name) const {
    auto it = schemas_.find(name);
    if (it == schemas_.end()) throw SchemaError("unknown schema '" + name + "'");
    return it->second;
}

std::vector<FieldSpec> SchemaRegistry::effective_fields(const std::string& name) const {
    const Schema& s = get(name);
    std::vector<FieldSpec> out;
    if (s.parent) out = effective_fields(*s.parent);
    std::unordered_set<std::string> seen;
    for (const FieldSpec& f : out) seen.insert(f.name);
    for (const FieldSpec& f : s.fields) {
        if (seen.count(f.name)) {
            // redeclaration with identical kind: child spec wins (may refine description)
            for (FieldSpec& existing : out)
                if (existing.name == f.name) existing = f;
        } else {
            out.push_back(f);
        }
    }
    return out;
}

std::vector<FieldSpec> SchemaRegistry::missing_fields(const std::string& input,
                                                      const std::string& output) const {
    std::unordered_set<std::string> have;
    for (const FieldSpec& f : effective_fields(input)) have.insert(f.name);
    std::vector<FieldSpec> out;
    for (const FieldSpec& f : effective_fields(output))
        if (!have.count(f.name)) out.push_back(f);
    return out;
}

std::vector<std::string> SchemaRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : schemas_) out.push_back(name);
    return out;
}

FieldSpec field_spec_from_json(const Value& j) {
    FieldSpec f;
    f.name = j.at("name").get<std::string>();
    f.description = j.value("desc", j.value("description", std::string{}));
    f.required = j.value("required", true);
    f.kind = FieldKind::parse(j.value("kind", std::string("string")));
    return f;
}

Value field_spec_to_json(const FieldSpec& f) {
    return Value{{"name", f.name},
                 {"desc", f.description},
                 {"required", f.required},
                 {"kind", f.kind.to_string()}};
}

void SchemaRegistry::define_from_json(const Value& spec) {
    std::optional<std::string> parent;
    if (spec.contains("parent") && !spec.at("parent").is_null())
        parent = spec.at("parent").get<std::string>();
    std::vector<FieldSpec> fields;
    for (const Value& fj : spec.value("fields", Value::array()))
        fields.push_back(field_spec_from_json(fj));
    define_schema(spec.at("name").get<std::string>(), parent, std::move(fields),
                  spec.value("doc", std::string{}));
}

Value SchemaRegistry::to_json(const std::string& name) const {
    const Schema& s = get(name);
    Value fields = Value::array();
    for (const FieldSpec& f : s.fields) fields.push_back(field_spec_to_json(f));
    Value out{{"name", s.name}, {"fields", fields}, {"doc", s.doc}};
    if (s.parent) out["parent"] = *s.parent;
    return out;
}

}  // namespace sempipe
