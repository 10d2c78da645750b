#pragma once

#include <array>
#include <cstdint>

#include "gpunuma/core.hpp"

namespace gpunuma {

// The four timing classes of a NUMA-cached multi-GPU node, ordered by mean.
enum class AccessClass : int {
    LocalL2Hit = 0,
    LocalDram = 1,
    RemoteL2Hit = 2,
    RemoteDram = 3,
};

constexpr int kNumAccessClasses = 4;
const char* to_string(AccessClass c);

struct ClassLatency {
    double mean_cycles = 0;
    double sigma_cycles = 0;
};

// Truncated-Gaussian latency generator. Default means sit inside the
// observed bands of the hardware this models: local L2 hits just over 250
// cycles, remote L2 hits above 600, remote DRAM above 800. Contention adds
// sigma per concurrently probed cache set beyond the first.
struct LatencyModel {
    ClassLatency local_l2_hit{270, 12};
    ClassLatency local_dram{470, 25};
    ClassLatency remote_l2_hit{650, 20};
    ClassLatency remote_dram{850, 30};
    double contention_coeff = 8.0;

    const ClassLatency& of(AccessClass c) const {
        switch (c) {
            case AccessClass::LocalL2Hit: return local_l2_hit;
            case AccessClass::LocalDram: return local_dram;
            case AccessClass::RemoteL2Hit: return remote_l2_hit;
            default: return remote_dram;
        }
    }

    std::array<double, 4> means() const {
        return {local_l2_hit.mean_cycles, local_dram.mean_cycles,
                remote_l2_hit.mean_cycles, remote_dram.mean_cycles};
    }

    // All sigmas and the contention coefficient zeroed; means kept.
    LatencyModel zero_noise() const;

    // Scale every per-class sigma (contention coefficient untouched).
    LatencyModel with_sigma_scale(double scale) const;

    void validate() const;

    // Sampled latency for one access: N(mean, sigma + extra_sigma), rounded
    // to integer cycles with a floor of 1.
    Cycles sample(AccessClass c, double extra_sigma, Rng& rng) const;
};

}  // namespace gpunuma
