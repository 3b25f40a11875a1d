#include "unrec/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace unrec {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed), state_(seed) {
    // Warm the state so seed 0 and seed 1 diverge immediately.
    (void)splitmix64(state_);
}

RngStream RngStream::substream(std::string_view label) const {
    std::uint64_t h = fnv1a(kFnvOffset, &seed_, sizeof(seed_));
    h = fnv1a(h, label.data(), label.size());
    return RngStream(h);
}

RngStream RngStream::substream(std::string_view label, std::uint64_t index) const {
    std::uint64_t h = fnv1a(kFnvOffset, &seed_, sizeof(seed_));
    h = fnv1a(h, label.data(), label.size());
    h = fnv1a(h, &index, sizeof(index));
    return RngStream(h);
}

std::uint64_t RngStream::raw() { return splitmix64(state_); }

double RngStream::uniform() {
    return static_cast<double>(raw() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
    // Rejection sampling on the top bits keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = raw();
    } while (x >= limit);
    return x % n;
}

double RngStream::normal(double mean, double stddev) {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
}

}  // namespace unrec
