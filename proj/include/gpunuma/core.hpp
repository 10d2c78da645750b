#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpunuma {

using GpuId = int;
using SessionId = int;
using ProcessId = int;
using VAddr = std::uint64_t;
using Cycles = std::uint64_t;

class SimError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public SimError {
public:
    using SimError::SimError;
};

class OutOfMemory : public SimError {
public:
    using SimError::SimError;
};

class PermissionError : public SimError {
public:
    using SimError::SimError;
};

// Peer access request between GPUs that are not a single NVLink hop apart.
class NoNvlinkPath : public SimError {
public:
    using SimError::SimError;
};

class UnmappedAddress : public SimError {
public:
    using SimError::SimError;
};

class CalibrationFailed : public SimError {
public:
    using SimError::SimError;
};

class IncompleteSet : public SimError {
public:
    IncompleteSet(int found, int wanted)
        : SimError("eviction set incomplete: found " + std::to_string(found) +
                   " of " + std::to_string(wanted) + " members"),
          found_(found), wanted_(wanted) {}
    int found() const { return found_; }
    int wanted() const { return wanted_; }

private:
    int found_;
    int wanted_;
};

class AlignmentFailed : public SimError {
public:
    using SimError::SimError;
};

class TrainingDataInsufficient : public SimError {
public:
    using SimError::SimError;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic RNG. Doubles and gaussians are derived explicitly from the
// mt19937_64 stream instead of std distributions, so identical seeds give
// bit-identical sequences regardless of the standard library in use.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        // Rejection sampling keeps the draw unbiased for any n.
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v = eng_();
        while (v >= limit) v = eng_();
        return v % n;
    }

    // Standard normal via the Marsaglia polar method; one spare cached.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_double() - 1.0;
            v = 2.0 * next_double() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    // Independent stream derived from this seed and a salt.
    static Rng fork(std::uint64_t seed, std::uint64_t salt) {
        return Rng(splitmix64(seed ^ splitmix64(salt)));
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace gpunuma
