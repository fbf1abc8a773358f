#pragma once

#include <cstdint>
#include <string>

namespace sempipe {

// Stable 64-bit FNV-1a. Used for plan fingerprints and cache keys; must not
// change across builds, so std::hash is deliberately not used.
class Fnv1a {
public:
    Fnv1a& update(const std::string& data) {
        for (unsigned char c : data) {
            state_ ^= c;
            state_ *= 0x100000001b3ULL;
        }
        // field separator so update("a").update("b") != update("ab")
        state_ ^= 0x1f;
        state_ *= 0x100000001b3ULL;
        return *this;
    }

    std::uint64_t value() const { return state_; }
    std::string hex() const;

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string fingerprint_of(const std::string& data);

}  // namespace sempipe
