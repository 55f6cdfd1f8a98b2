#pragma once

#include "zoneliq/model.hpp"

#include <cmath>
#include <random>

namespace zoneliq {

// Seeded substream generator. Paths, populations and pilot runs each get
// their own (seed, stream) pair so batches can run concurrently and still
// reproduce bit-for-bit regardless of thread count.
class PathRng {
public:
    explicit PathRng(const RngSpec& spec) : PathRng(spec.seed, spec.stream_id) {}

    PathRng(std::uint64_t seed, std::uint64_t stream) {
        std::seed_seq seq{
            static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
            static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        eng_.seed(seq);
    }

    double uniform() {  // (0, 1), never returns 0
        return std::generate_canonical<double, 53>(eng_) + 5e-324;
    }

    double normal() { return normal_(eng_); }

    double exponential() { return -std::log(uniform()); }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> normal_;
};

} // namespace zoneliq
