#pragma once

#include <sstream>
#include <string>
#include <vector>

namespace sempipe {

// Whitespace-delimited tokens. The internal token measure for budget math and
// mock cost accounting; provider-reported counts are recorded separately by
// the http backend.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

inline std::int64_t token_count(const std::string& text) {
    return static_cast<std::int64_t>(tokenize(text).size());
}

}  // namespace sempipe
