#pragma once

#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

namespace sempipe {

// Records and field values are carried as JSON. Bytes payloads are stored as
// base64 strings and interpreted through the field kind.
using Value = nlohmann::json;

struct FieldKind {
    enum class Base { String, Number, Boolean, Bytes, List };

    Base base = Base::String;
    std::shared_ptr<FieldKind> element;  // set iff base == List

    static FieldKind string() { return {Base::String, nullptr}; }
    static FieldKind number() { return {Base::Number, nullptr}; }
    static FieldKind boolean() { return {Base::Boolean, nullptr}; }
    static FieldKind bytes() { return {Base::Bytes, nullptr}; }
    static FieldKind list_of(FieldKind elem) {
        return {Base::List, std::make_shared<FieldKind>(std::move(elem))};
    }

    bool operator==(const FieldKind& other) const;
    bool operator!=(const FieldKind& other) const { return !(*this == other); }

    // True if the kind transitively contains a bytes payload (image data etc.).
    bool contains_bytes() const;

    std::string to_string() const;

    // Parses "string", "number", "boolean", "bytes", "list-of(<kind>)".
    // Throws std::invalid_argument on malformed input.
    static FieldKind parse(const std::string& text);
};

// Checks that a value is representable under the given kind.
bool conforms(const Value& value, const FieldKind& kind);

// Best-effort cast of a value (possibly a string) to the given kind.
// Returns nullopt when the value cannot be interpreted.
std::optional<Value> cast_to_kind(const Value& value, const FieldKind& kind);

std::string base64_encode(const std::string& bytes);
std::optional<std::string> base64_decode(const std::string& text);

}  // namespace sempipe
