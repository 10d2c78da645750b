#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "gpunuma/sim.hpp"

namespace gpunuma::probe {

// Boundaries between the four access classes plus the cluster means they
// were derived from. t1 splits local hit/miss, t3 splits remote hit/miss.
struct LatencyThresholds {
    double t1 = 0, t2 = 0, t3 = 0;
    std::array<double, 4> cluster_means{};

    bool is_miss(Cycles cycles, bool remote) const {
        return remote ? static_cast<double>(cycles) > t3
                      : static_cast<double>(cycles) > t1;
    }
    AccessClass classify(Cycles cycles) const {
        const double c = static_cast<double>(cycles);
        if (c <= t1) return AccessClass::LocalL2Hit;
        if (c <= t2) return AccessClass::LocalDram;
        if (c <= t3) return AccessClass::RemoteL2Hit;
        return AccessClass::RemoteDram;
    }
    void validate() const;
};

struct ProbeConfig {
    std::uint64_t stride_bytes = 128;   // cache line stride
    int num_access_repeats = 4;         // accesses per microbenchmark kernel
    int kernel_repeats = 20;            // kernel launches per calibration batch
    std::uint64_t search_budget = ~std::uint64_t{0};  // max candidates traversed
    int vote_trials = 5;                // majority vote for eviction decisions
    int append_block = 8;               // skip-ahead block size during discovery
};

struct EvictionSet {
    VAddr target_vaddr = 0;
    std::vector<VAddr> members;
    bool remote = true;  // tier of the allocation the set lives in
    std::optional<std::uint32_t> resolved_set;  // oracle annotation, tests only
};

struct PolicyReport {
    enum class Label { LruLike, RandomLike, Unknown };
    int inferred_ways = 0;
    int eviction_period = 0;
    Label label = Label::Unknown;
};

const char* to_string(PolicyReport::Label label);

struct CalibrationOutcome {
    LatencyThresholds thresholds;
    std::vector<TimingSample> samples;  // everything observed, oracle-labeled
};

// Strided first-touch/re-touch microbenchmark over a local and a remote
// allocation, clustered into four groups with seeded 1-D k-means. Throws
// CalibrationFailed when adjacent clusters overlap within one sigma.
CalibrationOutcome calibrate_latencies_traced(Session session, const Allocation& local_alloc,
                                              const Allocation& remote_alloc,
                                              int samples_per_class,
                                              const ProbeConfig& cfg = {});
LatencyThresholds calibrate_latencies(Session session, const Allocation& local_alloc,
                                      const Allocation& remote_alloc, int samples_per_class,
                                      const ProbeConfig& cfg = {});

// Growing pointer-chase eviction set discovery: candidates are appended in
// blocks, the target is re-probed, and the address whose arrival evicts the
// target is recorded as a member. Throws IncompleteSet when the candidate
// pool or budget runs out first.
EvictionSet discover_eviction_set(Session session, const Allocation& alloc,
                                  std::uint64_t target_offset,
                                  const LatencyThresholds& thresholds,
                                  const ProbeConfig& cfg = {});

// Same engine, but keeps collecting conflicting addresses past the
// associativity. Wider sets make page-consecutive derivation go further.
EvictionSet discover_extended_set(Session session, const Allocation& alloc,
                                  std::uint64_t target_offset, int wanted_members,
                                  const LatencyThresholds& thresholds,
                                  const ProbeConfig& cfg = {});

// Accesses target then k members for k = 1..N over `trials` rounds and finds
// the smallest k that always evicts. A clean deterministic step at one k is
// LRU-like; scattered eviction points are random-like.
PolicyReport measure_associativity(Session session, const EvictionSet& set,
                                   const LatencyThresholds& thresholds, int trials);

// Prime set_a, touch all of set_b, re-probe set_a; aliased when the majority
// of trials sees at least one miss.
bool test_alias(Session session, const EvictionSet& set_a, const EvictionSet& set_b,
                const LatencyThresholds& thresholds, int trials = 5);

// Voted self-check: do the members actually evict the target?
bool validate_eviction_set(Session session, const EvictionSet& set,
                           const LatencyThresholds& thresholds, int trials = 5);

// Target re-access time after touching k members, for k = 0..members; the
// eviction step lands at k = associativity.
struct SweepPoint {
    int k = 0;
    Cycles target_recheck_cycles = 0;
    bool evicted = false;
};
std::vector<SweepPoint> eviction_sweep(Session session, const EvictionSet& set,
                                       const LatencyThresholds& thresholds);

// Collects pairwise non-aliased eviction sets until count_wanted are kept.
// New targets come from pages that have not contributed a set yet, and page
// consecutiveness turns one discovered set into a whole window of derived
// neighbors. Returns a partial list when the budget runs out.
std::vector<EvictionSet> enumerate_unique_sets(Session session, const Allocation& alloc,
                                               int count_wanted,
                                               const LatencyThresholds& thresholds,
                                               const ProbeConfig& cfg = {});

void write_eviction_sets_json(std::ostream& os, const std::vector<EvictionSet>& sets,
                              std::uint64_t seed);
std::vector<EvictionSet> read_eviction_sets_json(std::istream& is);

void write_thresholds_json(std::ostream& os, const LatencyThresholds& t, std::uint64_t seed);
LatencyThresholds read_thresholds_json(std::istream& is);

}  // namespace gpunuma::probe
