#include "solarxai/random.hpp"

#include <cmath>
#include <numbers>

namespace solarxai {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage) noexcept {
    // FNV-1a over the label, then mixed with the parent seed.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : stage) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return mix64(mix64(seed) ^ h);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix64(mix64(seed) ^ mix64(index ^ 0xD1B54A32D192ED03ULL));
}

std::uint64_t CounterRng::below(std::uint64_t n) noexcept {
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) {
        v = next_u64();
    }
    return v % n;
}

double CounterRng::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

} // namespace solarxai
