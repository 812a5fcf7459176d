#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Core>

// Counter-based random number generation (Philox4x32-10).
//
// Every random quantity in the library is drawn from a named stream so that
// designs, true parameters, responses, projections, and index shuffles are
// independent given one master seed:
//
//   key     = master seed (64 bits)
//   counter = [block_lo, block_hi, substream, stream_id]
//
// Identical (seed, stream, substream) always reproduces the same sequence,
// on any platform: the uniform, normal, Poisson and multinomial transforms
// below avoid std::<distribution> types, whose output is unspecified.

namespace trakbench::rng {

enum class StreamId : uint32_t {
    kGeneric = 0,
    kDesign = 1,
    kTrueBeta = 2,
    kResponses = 3,
    kProjection = 4,
    kTestDesign = 5,
    kTestResponses = 6,
    kIndexShuffle = 7,
};

namespace detail {

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
    uint64_t prod = static_cast<uint64_t>(a) * static_cast<uint64_t>(b);
    hi = static_cast<uint32_t>(prod >> 32);
    lo = static_cast<uint32_t>(prod);
}

// One block of Philox4x32 with 10 rounds.
inline std::array<uint32_t, 4> philox4x32_10(std::array<uint32_t, 4> ctr,
                                             std::array<uint32_t, 2> key) {
    constexpr uint32_t kMul0 = 0xD2511F53u;
    constexpr uint32_t kMul1 = 0xCD9E8D57u;
    constexpr uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace detail

// Derives an independent master seed, e.g. one per trial.
inline uint64_t derive_seed(uint64_t master, uint64_t salt) {
    return detail::splitmix64(master ^ detail::splitmix64(salt));
}

class Stream {
  public:
    Stream(uint64_t seed, StreamId stream, uint32_t substream = 0)
        : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
          prefix_{substream, static_cast<uint32_t>(stream)} {}

    uint32_t next_u32() {
        if (buffer_pos_ == 4) {
            buffer_ = detail::philox4x32_10(
                {static_cast<uint32_t>(block_), static_cast<uint32_t>(block_ >> 32),
                 prefix_[0], prefix_[1]},
                key_);
            ++block_;
            buffer_pos_ = 0;
        }
        return buffer_[buffer_pos_++];
    }

    uint64_t next_u64() {
        uint64_t lo = next_u32();
        uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // Uniform on (0, 1]; never returns 0 so log() stays finite.
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; generates pairs, caches the spare.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    Eigen::VectorXd normal_vector(Eigen::Index len) {
        Eigen::VectorXd out(len);
        for (Eigen::Index i = 0; i < len; ++i) out(i) = normal();
        return out;
    }

    // Row-major fill keeps the draw order independent of downstream storage.
    Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd out(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal();
        return out;
    }

    bool bernoulli(double prob) { return uniform01() <= prob; }

    // Product method; means here are O(1)-ish, chunking keeps exp() in range.
    long poisson(double mean) {
        if (!(mean >= 0.0)) throw std::invalid_argument("poisson: mean must be >= 0");
        long total = 0;
        while (mean > 30.0) {
            total += poisson_small(30.0);
            mean -= 30.0;
        }
        return total + poisson_small(mean);
    }

    // Index into a probability vector (entries sum to 1); returns 0-based index.
    template <typename Derived>
    int categorical(const Eigen::DenseBase<Derived>& probs) {
        double u = uniform01();
        double cum = 0.0;
        for (Eigen::Index j = 0; j < probs.size(); ++j) {
            cum += probs(j);
            if (u <= cum) return static_cast<int>(j);
        }
        return static_cast<int>(probs.size() - 1);
    }

  private:
    long poisson_small(double mean) {
        double limit = std::exp(-mean);
        long count = -1;
        double prod = 1.0;
        do {
            prod *= uniform01();
            ++count;
        } while (prod > limit);
        return count;
    }

    std::array<uint32_t, 2> key_;
    std::array<uint32_t, 2> prefix_;  // {substream, stream id}
    uint64_t block_ = 0;
    std::array<uint32_t, 4> buffer_{};
    int buffer_pos_ = 4;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace trakbench::rng
