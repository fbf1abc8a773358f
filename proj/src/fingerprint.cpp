#include "sempipe/fingerprint.hpp"

#include <array>

namespace sempipe {

std::string Fnv1a::hex() const {
    static const char* digits = "0123456789abcdef";
    std::array<char, 16> buf;
    std::uint64_t v = state_;
    for (int i = 15; i >= 0; i--) {
        buf[i] = digits[v & 0xF];
        v >>= 4;
    }
    return std::string(buf.data(), buf.size());
}

std::string fingerprint_of(const std::string& data) {
    Fnv1a h;
    h.update(data);
    return h.hex();
}

}  // namespace sempipe
