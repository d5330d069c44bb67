#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace tnnswap {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// Output is a pure function of (counter, key), so any draw can be computed
/// independently of the order in which others are generated.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer; used to derive child seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed plus stream id. Draw (path, step, coordinate) of a stream is fixed
/// by these two numbers alone.
struct RngSpec {
    std::uint64_t seed = 0;
    std::uint32_t stream = 0;

    /// Independent seed for run `index` of a run set.
    static std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
        return splitmix64(master ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
    }

    /// Standard normal for (path, step, coordinate).
    double normal(std::uint32_t path, std::uint32_t step, std::uint32_t coord) const;

    /// out[i] = normal(path, step, i) for every i, sharing Box-Muller pairs.
    void fill_normals(std::uint32_t path, std::uint32_t step, std::span<double> out) const;
};

/// Sequential draws over a Philox counter; for initialization and other
/// places where random access is not needed.
class PhiloxStream {
public:
    PhiloxStream(std::uint64_t seed, std::uint32_t stream) : seed_(seed), stream_(stream) {}

    std::uint64_t next_u64();
    /// Uniform on [0, 1).
    double uniform();
    double normal();

private:
    std::uint64_t seed_;
    std::uint32_t stream_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int used_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace tnnswap
