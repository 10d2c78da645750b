#pragma once

#include <cstdint>
#include <vector>

#include "gpunuma/core.hpp"
#include "gpunuma/topology.hpp"

namespace gpunuma {

// One GPU's set-associative L2. Tags are physical line numbers; each set is
// kept in recency order, most recent first. Flat storage so snapshots and
// state comparisons are cheap.
class L2Cache {
public:
    explicit L2Cache(const CacheConfig& cfg);

    // Touch a physical line. Hit promotes the line to most recent; miss
    // inserts it, evicting the least recently used line when the set is full
    // (or a random resident under the Random policy). Returns hit/miss.
    bool access(std::uint64_t line, Rng& rng);

    void flush();

    const CacheConfig& config() const { return cfg_; }
    std::uint32_t set_of_line(std::uint64_t line) const {
        return static_cast<std::uint32_t>(line % cfg_.num_sets);
    }

    // Resident lines of one set, most recent first.
    std::vector<std::uint64_t> set_lines(std::uint32_t set) const;
    std::uint32_t set_occupancy(std::uint32_t set) const { return sizes_[set]; }

    bool operator==(const L2Cache& other) const {
        return tags_ == other.tags_ && sizes_ == other.sizes_;
    }

private:
    CacheConfig cfg_;
    std::vector<std::uint64_t> tags_;   // num_sets * ways, recency order per set
    std::vector<std::uint32_t> sizes_;  // per-set occupancy
};

}  // namespace gpunuma
