#include "tnnswap/rng.hpp"

#include <cmath>
#include <numbers>

namespace tnnswap {

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kW0;
        k[1] += kW1;
    }
    return c;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

namespace {

// One Philox block feeds a Box-Muller pair; coordinates 2c and 2c+1 share it.
std::array<double, 2> normal_pair(const RngSpec& rng, std::uint32_t path, std::uint32_t step, std::uint32_t pair) {
    const auto w = philox4x32({step, path, pair, rng.stream},
                              {static_cast<std::uint32_t>(rng.seed), static_cast<std::uint32_t>(rng.seed >> 32)});
    const std::uint64_t a = (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
    const std::uint64_t b = (static_cast<std::uint64_t>(w[2]) << 32) | w[3];
    constexpr double kInv53 = 1.0 / 9007199254740992.0;
    const double u1 = static_cast<double>((a >> 11) + 1) * kInv53;  // (0, 1]
    const double u2 = static_cast<double>(b >> 11) * kInv53;        // [0, 1)
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

} // namespace

double RngSpec::normal(std::uint32_t path, std::uint32_t step, std::uint32_t coord) const {
    return normal_pair(*this, path, step, coord / 2)[coord % 2];
}

void RngSpec::fill_normals(std::uint32_t path, std::uint32_t step, std::span<double> out) const {
    for (std::size_t i = 0; i < out.size(); i += 2) {
        const auto z = normal_pair(*this, path, step, static_cast<std::uint32_t>(i / 2));
        out[i] = z[0];
        if (i + 1 < out.size()) out[i + 1] = z[1];
    }
}

std::uint64_t PhiloxStream::next_u64() {
    if (used_ >= 4) {
        block_ = philox4x32({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                             0xA5A5A5A5u, stream_},
                            {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
        ++counter_;
        used_ = 0;
    }
    const std::uint64_t v = (static_cast<std::uint64_t>(block_[used_]) << 32) | block_[used_ + 1];
    used_ += 2;
    return v;
}

double PhiloxStream::uniform() { return static_cast<double>(next_u64() >> 11) / 9007199254740992.0; }

double PhiloxStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) / 9007199254740992.0;
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

} // namespace tnnswap
