#pragma once

#include <cstdint>
#include <string_view>

namespace unrec {

// Deterministic seeded random stream. Substreams are derived from the root
// seed by hashing a label (and optional index), never by consuming state, so
// two substreams with different labels are independent of the order in which
// they are created or used. The generator is fully pinned here (splitmix64
// state transitions) so draws are bit-identical across compilers.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    RngStream substream(std::string_view label) const;
    RngStream substream(std::string_view label, std::uint64_t index) const;

    // Next 64 raw bits.
    std::uint64_t raw();

    // Uniform on [0, 1).
    double uniform();

    // Uniform integer on [0, n). Requires n > 0.
    std::uint64_t uniform_int(std::uint64_t n);

    // Gaussian via Box-Muller (two uniforms per draw, no cached spare).
    double normal(double mean, double stddev);

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

}  // namespace unrec
