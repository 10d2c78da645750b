#include "gpunuma/latency.hpp"

#include <cmath>

namespace gpunuma {

const char* to_string(AccessClass c) {
    switch (c) {
        case AccessClass::LocalL2Hit: return "local_l2_hit";
        case AccessClass::LocalDram: return "local_dram";
        case AccessClass::RemoteL2Hit: return "remote_l2_hit";
        default: return "remote_dram";
    }
}

LatencyModel LatencyModel::zero_noise() const {
    LatencyModel m = *this;
    m.local_l2_hit.sigma_cycles = 0;
    m.local_dram.sigma_cycles = 0;
    m.remote_l2_hit.sigma_cycles = 0;
    m.remote_dram.sigma_cycles = 0;
    m.contention_coeff = 0;
    return m;
}

LatencyModel LatencyModel::with_sigma_scale(double scale) const {
    LatencyModel m = *this;
    m.local_l2_hit.sigma_cycles *= scale;
    m.local_dram.sigma_cycles *= scale;
    m.remote_l2_hit.sigma_cycles *= scale;
    m.remote_dram.sigma_cycles *= scale;
    return m;
}

void LatencyModel::validate() const {
    const auto m = means();
    for (int i = 0; i + 1 < kNumAccessClasses; ++i) {
        if (!(m[i] < m[i + 1]))
            throw ConfigError("latency class means must be strictly increasing");
    }
    for (int i = 0; i < kNumAccessClasses; ++i) {
        if (of(static_cast<AccessClass>(i)).sigma_cycles < 0)
            throw ConfigError("latency sigma must be >= 0");
    }
    if (contention_coeff < 0) throw ConfigError("contention_coeff must be >= 0");
}

Cycles LatencyModel::sample(AccessClass c, double extra_sigma, Rng& rng) const {
    const ClassLatency& cl = of(c);
    const double sigma = cl.sigma_cycles + extra_sigma;
    double v = cl.mean_cycles;
    if (sigma > 0) v += sigma * rng.gaussian();
    const long long cycles = std::llround(v);
    return cycles < 1 ? 1 : static_cast<Cycles>(cycles);
}

}  // namespace gpunuma
