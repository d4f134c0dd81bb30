#include "disarm/common.hpp"

#include <cctype>
#include <cmath>

namespace disarm {

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

uint64_t derive_seed(uint64_t base, std::string_view tag) {
    Rng r(base ^ fnv1a64(tag));
    return r.next_u64();
}

std::string normalize_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            if (!out.empty()) pending_space = true;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view s) {
    const std::string norm = normalize_text(s);
    std::vector<std::string> tokens;
    size_t i = 0;
    while (i < norm.size()) {
        size_t j = norm.find(' ', i);
        if (j == std::string::npos) j = norm.size();
        std::string_view tok(norm.data() + i, j - i);
        // Strip non-alphanumeric edges ("biden!" and "biden" are one token).
        while (!tok.empty() && !std::isalnum(static_cast<unsigned char>(tok.front()))) tok.remove_prefix(1);
        while (!tok.empty() && !std::isalnum(static_cast<unsigned char>(tok.back()))) tok.remove_suffix(1);
        if (!tok.empty()) tokens.emplace_back(tok);
        i = j + 1;
    }
    return tokens;
}

}  // namespace disarm
