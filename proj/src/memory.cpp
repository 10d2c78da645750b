#include "gpunuma/memory.hpp"

#include <numeric>

namespace gpunuma {

FramePool::FramePool(std::uint64_t dram_bytes, std::uint64_t page_bytes, std::uint64_t seed,
                     GpuId gpu)
    : rng_(Rng::fork(seed, 0xF4A3E000ULL + static_cast<std::uint64_t>(gpu))) {
    free_.resize(dram_bytes / page_bytes);
    std::iota(free_.begin(), free_.end(), 0u);
}

std::vector<std::uint32_t> FramePool::take(std::uint64_t count) {
    if (count > free_.size()) throw OutOfMemory("gpu dram exhausted");
    std::vector<std::uint32_t> out;
    out.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t j = rng_.below(free_.size());
        out.push_back(free_[j]);
        free_[j] = free_.back();
        free_.pop_back();
    }
    return out;
}

}  // namespace gpunuma
