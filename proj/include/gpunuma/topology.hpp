#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "gpunuma/core.hpp"

namespace gpunuma {

enum class ReplacementPolicy { Lru, Random };

struct CacheConfig {
    std::uint64_t line_bytes = 128;
    std::uint32_t num_sets = 2048;
    std::uint32_t ways = 16;
    ReplacementPolicy policy = ReplacementPolicy::Lru;

    std::uint64_t capacity_bytes() const {
        return line_bytes * num_sets * static_cast<std::uint64_t>(ways);
    }
    void validate() const;
};

struct GpuNode {
    GpuId id = 0;
    std::uint64_t dram_bytes = 16ULL << 30;
    CacheConfig cache;
};

using Link = std::pair<GpuId, GpuId>;

// Multi-GPU node: GPUs plus the symmetric, irreflexive single-hop NVLink
// adjacency. Peer access and the remote latency classes follow from it.
class Topology {
public:
    Topology(std::vector<GpuNode> gpus, std::vector<Link> links);

    // Eight GPUs wired as two fully connected quads (0-3, 4-7) plus the four
    // cross links 0-4, 1-5, 2-6, 3-7; every GPU ends up with degree 4.
    static Topology dgx1(CacheConfig cache = {}, std::uint64_t dram_bytes = 16ULL << 30);

    // Two GPUs, one link: the smallest node that supports a remote attack.
    static Topology minimal(CacheConfig cache = {}, std::uint64_t dram_bytes = 16ULL << 30);

    const std::vector<GpuNode>& gpus() const { return gpus_; }
    const std::vector<Link>& links() const { return links_; }
    const GpuNode& gpu(GpuId id) const;
    bool has_gpu(GpuId id) const;
    bool linked(GpuId a, GpuId b) const;
    int degree(GpuId id) const;
    std::size_t num_gpus() const { return gpus_.size(); }

private:
    std::vector<GpuNode> gpus_;
    std::vector<Link> links_;  // normalized (a < b), sorted, deduplicated
};

}  // namespace gpunuma
