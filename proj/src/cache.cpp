#include "gpunuma/cache.hpp"

namespace gpunuma {

L2Cache::L2Cache(const CacheConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    tags_.assign(static_cast<std::size_t>(cfg_.num_sets) * cfg_.ways, 0);
    sizes_.assign(cfg_.num_sets, 0);
}

bool L2Cache::access(std::uint64_t line, Rng& rng) {
    const std::uint32_t set = set_of_line(line);
    std::uint64_t* base = tags_.data() + static_cast<std::size_t>(set) * cfg_.ways;
    std::uint32_t& size = sizes_[set];

    for (std::uint32_t i = 0; i < size; ++i) {
        if (base[i] == line) {
            // Promote to most recent.
            for (std::uint32_t j = i; j > 0; --j) base[j] = base[j - 1];
            base[0] = line;
            return true;
        }
    }

    if (size < cfg_.ways) {
        for (std::uint32_t j = size; j > 0; --j) base[j] = base[j - 1];
        base[0] = line;
        ++size;
        return false;
    }

    if (cfg_.policy == ReplacementPolicy::Random) {
        base[rng.below(cfg_.ways)] = line;
        return false;
    }

    // LRU: drop the tail.
    for (std::uint32_t j = cfg_.ways - 1; j > 0; --j) base[j] = base[j - 1];
    base[0] = line;
    return false;
}

void L2Cache::flush() {
    sizes_.assign(cfg_.num_sets, 0);
    tags_.assign(tags_.size(), 0);
}

std::vector<std::uint64_t> L2Cache::set_lines(std::uint32_t set) const {
    const std::uint64_t* base = tags_.data() + static_cast<std::size_t>(set) * cfg_.ways;
    return {base, base + sizes_[set]};
}

}  // namespace gpunuma
