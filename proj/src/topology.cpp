#include "gpunuma/topology.hpp"

#include <algorithm>
#include <set>

namespace gpunuma {

namespace {

bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

void CacheConfig::validate() const {
    if (!is_pow2(line_bytes)) throw ConfigError("cache line_bytes must be a power of two");
    if (!is_pow2(num_sets)) throw ConfigError("cache num_sets must be a power of two");
    if (ways < 1) throw ConfigError("cache ways must be >= 1");
}

Topology::Topology(std::vector<GpuNode> gpus, std::vector<Link> links)
    : gpus_(std::move(gpus)) {
    if (gpus_.size() < 2) throw ConfigError("topology needs at least 2 GPUs");
    if (links.empty()) throw ConfigError("topology needs at least 1 link");

    std::set<GpuId> ids;
    for (const auto& g : gpus_) {
        if (!ids.insert(g.id).second)
            throw ConfigError("duplicate gpu id " + std::to_string(g.id));
        g.cache.validate();
        const std::uint64_t page = 64 * 1024;  // checked again by the simulator
        if (g.dram_bytes == 0 || g.dram_bytes % page != 0)
            throw ConfigError("gpu dram_bytes must be a positive multiple of the page size");
    }

    std::set<Link> normalized;
    for (auto [a, b] : links) {
        if (a == b)
            throw ConfigError("link (" + std::to_string(a) + "," + std::to_string(b) +
                              ") is reflexive");
        if (!ids.count(a) || !ids.count(b))
            throw ConfigError("link references unknown gpu");
        normalized.insert({std::min(a, b), std::max(a, b)});
    }
    links_.assign(normalized.begin(), normalized.end());
}

Topology Topology::dgx1(CacheConfig cache, std::uint64_t dram_bytes) {
    std::vector<GpuNode> gpus;
    for (GpuId id = 0; id < 8; ++id) gpus.push_back({id, dram_bytes, cache});
    std::vector<Link> links;
    for (GpuId base : {0, 4}) {
        for (GpuId a = base; a < base + 4; ++a)
            for (GpuId b = a + 1; b < base + 4; ++b) links.push_back({a, b});
    }
    for (GpuId a = 0; a < 4; ++a) links.push_back({a, a + 4});
    return Topology(std::move(gpus), std::move(links));
}

Topology Topology::minimal(CacheConfig cache, std::uint64_t dram_bytes) {
    return Topology({{0, dram_bytes, cache}, {1, dram_bytes, cache}}, {{0, 1}});
}

const GpuNode& Topology::gpu(GpuId id) const {
    for (const auto& g : gpus_)
        if (g.id == id) return g;
    throw ConfigError("unknown gpu id " + std::to_string(id));
}

bool Topology::has_gpu(GpuId id) const {
    for (const auto& g : gpus_)
        if (g.id == id) return true;
    return false;
}

bool Topology::linked(GpuId a, GpuId b) const {
    if (a == b) return false;
    Link key{std::min(a, b), std::max(a, b)};
    return std::binary_search(links_.begin(), links_.end(), key);
}

int Topology::degree(GpuId id) const {
    int d = 0;
    for (auto [a, b] : links_)
        if (a == id || b == id) ++d;
    return d;
}

}  // namespace gpunuma
