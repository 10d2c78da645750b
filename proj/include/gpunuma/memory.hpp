#pragma once

#include <cstdint>
#include <vector>

#include "gpunuma/core.hpp"
#include "gpunuma/topology.hpp"

namespace gpunuma {

struct PhysicalAddress {
    GpuId gpu = 0;
    std::uint64_t offset = 0;  // byte offset into that GPU's DRAM

    bool operator==(const PhysicalAddress&) const = default;
};

// Linear physical indexing: consecutive lines map to consecutive sets, so the
// lines of one page occupy a run of lines_per_page consecutive sets.
inline std::uint32_t set_index(const PhysicalAddress& paddr, const CacheConfig& cfg) {
    return static_cast<std::uint32_t>((paddr.offset / cfg.line_bytes) % cfg.num_sets);
}

struct Allocation {
    int handle = 0;
    ProcessId owner_process = 0;
    GpuId owner_gpu = 0;
    VAddr base_vaddr = 0;
    std::uint64_t length = 0;
    std::vector<std::uint32_t> page_frames;  // one physical frame per page

    bool contains(VAddr v) const { return v >= base_vaddr && v < base_vaddr + length; }
};

// Per-GPU physical frame pool. Frames are handed out pseudo-randomly from a
// stream seeded by (simulator seed, gpu id), so the same allocation sequence
// on a GPU reproduces the same frames run after run.
class FramePool {
public:
    FramePool(std::uint64_t dram_bytes, std::uint64_t page_bytes, std::uint64_t seed, GpuId gpu);

    std::uint64_t free_frames() const { return free_.size(); }
    std::vector<std::uint32_t> take(std::uint64_t count);

private:
    std::vector<std::uint32_t> free_;
    Rng rng_;
};

}  // namespace gpunuma
