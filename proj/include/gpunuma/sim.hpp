#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "gpunuma/cache.hpp"
#include "gpunuma/core.hpp"
#include "gpunuma/latency.hpp"
#include "gpunuma/memory.hpp"
#include "gpunuma/topology.hpp"

namespace gpunuma {

struct TimingSample {
    VAddr vaddr = 0;
    Cycles observed_cycles = 0;
    Cycles timestamp_cycles = 0;     // session clock when the access completed
    AccessClass true_class = AccessClass::LocalL2Hit;  // ground truth; oracle/tests only
};

struct TraceEvent {
    SessionId agent = 0;
    TimingSample sample;
};

using TraceLog = std::vector<TraceEvent>;

class TraceSink {
public:
    virtual ~TraceSink() = default;
    virtual void record(const TraceEvent& ev) = 0;
};

class VectorTraceSink : public TraceSink {
public:
    void record(const TraceEvent& ev) override { log.push_back(ev); }
    TraceLog log;
};

class Simulator;

// Attacker-facing handle: allocate, peer access, timed accesses, busy-wait.
// No translation, cache state, or true-class information is reachable here;
// that is the simulator's oracle surface.
class Session {
public:
    Session() = default;
    Session(Simulator* sim, SessionId id) : sim_(sim), id_(id) {}

    SessionId id() const { return id_; }
    GpuId home_gpu() const;
    Cycles cycles() const;

    void enable_peer_access(GpuId remote_gpu);
    bool has_peer_access(GpuId gpu) const;
    const Allocation& allocate(GpuId owner_gpu, std::uint64_t length_bytes);
    TimingSample access(VAddr vaddr);
    void burn(Cycles cycles);

    // Declare how many cache sets this agent is continuously probing; feeds
    // the global contention jitter. 0 clears the declaration.
    void set_probe_sets(int count);

    // Experiment hygiene between runs; reveals nothing about placement.
    void flush_caches();

    Rng& rng();
    Simulator& sim() { return *sim_; }

private:
    Simulator* sim_ = nullptr;
    SessionId id_ = -1;
};

// Deterministic single-instance simulator of the multi-GPU node. All
// randomness (frame placement, latency noise, attacker shuffles) derives
// from the one seed.
class Simulator {
public:
    Simulator(Topology topology, LatencyModel latency, std::uint64_t seed,
              std::uint64_t page_bytes = 64 * 1024);

    // New process with one session homed on `home`.
    Session create_session(GpuId home);
    // Additional session in an existing session's process (the thread-block
    // analog): shares address space and peer grants, owns its own clock.
    Session create_worker(Session parent);

    const Topology& topology() const { return topo_; }
    const LatencyModel& latency_model() const { return latency_; }
    std::uint64_t page_bytes() const { return page_bytes_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t lines_per_page() const;

    void flush_caches();
    Rng& rng() { return rng_; }

    // Tracing: scoped by run_agents, or set directly for bare sessions.
    void set_trace_sink(TraceSink* sink) { sink_ = sink; }
    TraceSink* trace_sink() const { return sink_; }

    int total_probe_sets() const { return total_probe_sets_; }

    // --- oracle surface (ground truth for tests and reports) ---
    PhysicalAddress oracle_translate(const Allocation& alloc, std::uint64_t offset) const;
    std::optional<PhysicalAddress> oracle_translate_vaddr(VAddr vaddr) const;
    std::uint32_t oracle_set_of_vaddr(VAddr vaddr) const;
    const L2Cache& cache(GpuId gpu) const;
    L2Cache cache_snapshot(GpuId gpu) const { return cache(gpu); }
    const Allocation& allocation_of(VAddr vaddr) const;
    const std::deque<Allocation>& allocations() const { return allocs_; }

    // --- internals used by Session ---
    GpuId session_home(SessionId id) const;
    Cycles session_cycles(SessionId id) const;
    void session_enable_peer(SessionId id, GpuId remote);
    bool session_has_peer(SessionId id, GpuId gpu) const;
    const Allocation& session_allocate(SessionId id, GpuId owner, std::uint64_t length);
    TimingSample session_access(SessionId id, VAddr vaddr);
    void session_burn(SessionId id, Cycles n);
    void session_set_probe_sets(SessionId id, int count);

private:
    struct ProcessState {
        ProcessId id;
        GpuId home;
        std::set<GpuId> grants;
    };
    struct SessionState {
        SessionId id;
        ProcessId process;
        Cycles clock = 0;
        int probe_sets = 0;
        std::size_t last_alloc = SIZE_MAX;  // lookup cache for the hot path
    };

    const Allocation& find_allocation(SessionState& ss, VAddr vaddr);
    std::size_t gpu_index(GpuId id) const;

    Topology topo_;
    LatencyModel latency_;
    std::uint64_t seed_;
    std::uint64_t page_bytes_;
    Rng rng_;

    std::vector<GpuId> gpu_ids_;       // position = internal index
    std::vector<L2Cache> caches_;      // per internal index
    std::vector<FramePool> frames_;    // per internal index

    std::vector<ProcessState> processes_;
    std::vector<SessionState> sessions_;
    std::deque<Allocation> allocs_;    // base_vaddr strictly increasing; stable refs
    VAddr next_vaddr_;
    int total_probe_sets_ = 0;
    TraceSink* sink_ = nullptr;
};

inline GpuId Session::home_gpu() const { return sim_->session_home(id_); }
inline Cycles Session::cycles() const { return sim_->session_cycles(id_); }
inline void Session::enable_peer_access(GpuId remote_gpu) { sim_->session_enable_peer(id_, remote_gpu); }
inline bool Session::has_peer_access(GpuId gpu) const { return sim_->session_has_peer(id_, gpu); }
inline const Allocation& Session::allocate(GpuId owner_gpu, std::uint64_t length_bytes) {
    return sim_->session_allocate(id_, owner_gpu, length_bytes);
}
inline TimingSample Session::access(VAddr vaddr) { return sim_->session_access(id_, vaddr); }
inline void Session::burn(Cycles cycles) { sim_->session_burn(id_, cycles); }
inline void Session::set_probe_sets(int count) { sim_->session_set_probe_sets(id_, count); }
inline void Session::flush_caches() { sim_->flush_caches(); }
inline Rng& Session::rng() { return sim_->rng(); }

}  // namespace gpunuma
