#include "sempipe/value.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <stdexcept>

namespace sempipe {

bool FieldKind::operator==(const FieldKind& other) const {
    if (base != other.base) return false;
    if (base != Base::List) return true;
    if (!element || !other.element) return element == other.element;
    return *element == *other.element;
}

bool FieldKind::contains_bytes() const {
    if (base == Base::Bytes) return true;
    if (base == Base::List && element) return element->contains_bytes();
    return false;
}

std::string FieldKind::to_string() const {
    switch (base) {
        case Base::String: return "string";
        case Base::Number: return "number";
        case Base::Boolean: return "boolean";
        case Base::Bytes: return "bytes";
        case Base::List: return "list-of(" + (element ? element->to_string() : "string") + ")";
    }
    return "string";
}

FieldKind FieldKind::parse(const std::string& text) {
    if (text == "string") return string();
    if (text == "number") return number();
    if (text == "boolean" || text == "bool") return boolean();
    if (text == "bytes") return bytes();
    const std::string prefix = "list-of(";
    if (text.rfind(prefix, 0) == 0 && !text.empty() && text.back() == ')') {
        return list_of(parse(text.substr(prefix.size(), text.size() - prefix.size() - 1)));
    }
    throw std::invalid_argument("unknown field kind: '" + text + "'");
}

bool conforms(const Value& value, const FieldKind& kind) {
    switch (kind.base) {
        case FieldKind::Base::String: return value.is_string();
        case FieldKind::Base::Number: return value.is_number();
        case FieldKind::Base::Boolean: return value.is_boolean();
        case FieldKind::Base::Bytes: return value.is_string();
        case FieldKind::Base::List:
            if (!value.is_array()) return false;
            if (!kind.element) return true;
            return std::all_of(value.begin(), value.end(),
                               [&](const Value& v) { return conforms(v, *kind.element); });
    }
    return false;
}

std::optional<Value> cast_to_kind(const Value& value, const FieldKind& kind) {
    if (conforms(value, kind)) return value;
    switch (kind.base) {
        case FieldKind::Base::String:
        case FieldKind::Base::Bytes:
            if (value.is_number_integer()) return Value(std::to_string(value.get<long long>()));
            if (value.is_number()) return Value(std::to_string(value.get<double>()));
            if (value.is_boolean()) return Value(value.get<bool>() ? "true" : "false");
            return std::nullopt;
        case FieldKind::Base::Number: {
            if (!value.is_string()) return std::nullopt;
            std::string s = value.get<std::string>();
            // strip surrounding spaces and currency noise ("$1,200.50" -> 1200.50)
            std::string cleaned;
            for (char c : s) {
                if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' ||
                    c == '+' || c == 'e' || c == 'E')
                    cleaned.push_back(c);
            }
            if (cleaned.empty()) return std::nullopt;
            try {
                size_t pos = 0;
                double d = std::stod(cleaned, &pos);
                if (pos != cleaned.size()) return std::nullopt;
                return Value(d);
            } catch (const std::exception&) {
                return std::nullopt;
            }
        }
        case FieldKind::Base::Boolean: {
            if (!value.is_string()) return std::nullopt;
            std::string s = value.get<std::string>();
            std::transform(s.begin(), s.end(), s.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            s.erase(std::remove_if(s.begin(), s.end(),
                                   [](unsigned char c) { return !std::isalnum(c); }),
                    s.end());
            if (s == "true" || s == "yes" || s == "1") return Value(true);
            if (s == "false" || s == "no" || s == "0") return Value(false);
            return std::nullopt;
        }
        case FieldKind::Base::List: {
            if (!value.is_array() || !kind.element) return std::nullopt;
            Value out = Value::array();
            for (const Value& v : value) {
                auto cast = cast_to_kind(v, *kind.element);
                if (!cast) return std::nullopt;
                out.push_back(*cast);
            }
            return out;
        }
    }
    return std::nullopt;
}

namespace {
constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(const std::string& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 2 < bytes.size()) {
        unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                     (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                     static_cast<unsigned char>(bytes[i + 2]);
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back(kB64Alphabet[v & 63]);
        i += 3;
    }
    size_t rem = bytes.size() - i;
    if (rem == 1) {
        unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out += "==";
    } else if (rem == 2) {
        unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                     (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::optional<std::string> base64_decode(const std::string& text) {
    std::array<int, 256> rev;
    rev.fill(-1);
    for (int i = 0; i < 64; i++) rev[static_cast<unsigned char>(kB64Alphabet[i])] = i;
    std::string out;
    int buffer = 0, bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        int v = rev[static_cast<unsigned char>(c)];
        if (v < 0) return std::nullopt;
        buffer = (buffer << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((buffer >> bits) & 0xFF));
        }
    }
    return out;
}

}  // namespace sempipe
