#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace disarm {

// Error hierarchy shared by all modules. The CLI maps ConfigError to exit
// code 2 and everything else derived from Error to exit code 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape mismatch between conforming tensors.
struct DimensionError : Error {
    using Error::Error;
};

// A stated precondition or invariant was violated (missing bias, low-rank
// bound, non-finite values, ...).
struct ContractError : Error {
    using Error::Error;
};

// Bad external input: unreadable file, malformed manifest, missing fixture.
struct InputError : Error {
    using Error::Error;
};

// Bad run configuration: unknown keys, unresolvable paths, unknown adapters.
struct ConfigError : Error {
    using Error::Error;
};

uint64_t fnv1a64(std::string_view s);

// Deterministic RNG built on splitmix64. Integer path is exact on every
// platform; uniform_signed() stays in exact float arithmetic so stub
// encoders are bitwise reproducible wherever float32 is IEEE-754.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform float in [-1, 1); exact arithmetic (integer scale + power-of-two
    // divide), no libm.
    float uniform_signed() {
        const auto bits = static_cast<int64_t>(next_u64() >> 39);  // 25 bits
        return static_cast<float>(bits - (1ll << 24)) * 0x1.0p-24f;
    }

    // Zero-mean unit-variance Gaussian (Box-Muller, cached spare).
    double gaussian();

  private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// All subsystem seeds are derived from the single run seed.
uint64_t derive_seed(uint64_t base, std::string_view tag);

// Lowercase (ASCII), collapse whitespace runs to single spaces, strip.
std::string normalize_text(std::string_view s);

// normalize_text + whitespace split + strip non-alphanumeric token edges.
std::vector<std::string> tokenize(std::string_view s);

}  // namespace disarm
