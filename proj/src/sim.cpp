#include "gpunuma/sim.hpp"

#include <algorithm>

namespace gpunuma {

Simulator::Simulator(Topology topology, LatencyModel latency, std::uint64_t seed,
                     std::uint64_t page_bytes)
    : topo_(std::move(topology)),
      latency_(latency),
      seed_(seed),
      page_bytes_(page_bytes),
      rng_(Rng::fork(seed, 0xC0FEULL)),
      next_vaddr_(page_bytes) {
    latency_.validate();
    if (page_bytes_ == 0 || (page_bytes_ & (page_bytes_ - 1)) != 0)
        throw ConfigError("page_bytes must be a power of two");
    for (const auto& g : topo_.gpus()) {
        if (page_bytes_ % g.cache.line_bytes != 0)
            throw ConfigError("page_bytes must be a multiple of the cache line size");
        if (g.dram_bytes % page_bytes_ != 0)
            throw ConfigError("gpu dram_bytes must be a multiple of page_bytes");
        gpu_ids_.push_back(g.id);
        caches_.emplace_back(g.cache);
        frames_.emplace_back(g.dram_bytes, page_bytes_, seed, g.id);
    }
}

std::size_t Simulator::gpu_index(GpuId id) const {
    for (std::size_t i = 0; i < gpu_ids_.size(); ++i)
        if (gpu_ids_[i] == id) return i;
    throw ConfigError("unknown gpu id " + std::to_string(id));
}

Session Simulator::create_session(GpuId home) {
    gpu_index(home);  // validates
    const ProcessId pid = static_cast<ProcessId>(processes_.size());
    processes_.push_back({pid, home, {}});
    const SessionId sid = static_cast<SessionId>(sessions_.size());
    sessions_.push_back({sid, pid});
    return Session(this, sid);
}

Session Simulator::create_worker(Session parent) {
    const SessionState& ps = sessions_.at(parent.id());
    const SessionId sid = static_cast<SessionId>(sessions_.size());
    sessions_.push_back({sid, ps.process});
    return Session(this, sid);
}

std::uint64_t Simulator::lines_per_page() const {
    return page_bytes_ / topo_.gpus().front().cache.line_bytes;
}

void Simulator::flush_caches() {
    for (auto& c : caches_) c.flush();
}

GpuId Simulator::session_home(SessionId id) const {
    return processes_[sessions_.at(id).process].home;
}

Cycles Simulator::session_cycles(SessionId id) const { return sessions_.at(id).clock; }

void Simulator::session_enable_peer(SessionId id, GpuId remote) {
    ProcessState& proc = processes_[sessions_.at(id).process];
    if (remote == proc.home)
        throw NoNvlinkPath("peer access to the session's own gpu is not a link");
    if (!topo_.has_gpu(remote))
        throw NoNvlinkPath("peer gpu " + std::to_string(remote) + " does not exist");
    if (!topo_.linked(proc.home, remote))
        throw NoNvlinkPath("gpus " + std::to_string(proc.home) + " and " +
                           std::to_string(remote) + " are not connected via NVLink");
    proc.grants.insert(remote);
}

bool Simulator::session_has_peer(SessionId id, GpuId gpu) const {
    const ProcessState& proc = processes_[sessions_.at(id).process];
    return gpu == proc.home || proc.grants.count(gpu) > 0;
}

const Allocation& Simulator::session_allocate(SessionId id, GpuId owner,
                                              std::uint64_t length) {
    if (length == 0) throw ConfigError("allocation length must be > 0");
    if (!session_has_peer(id, owner))
        throw PermissionError("session has no access to gpu " + std::to_string(owner));
    const std::size_t gi = gpu_index(owner);
    const std::uint64_t pages = (length + page_bytes_ - 1) / page_bytes_;

    Allocation a;
    a.handle = static_cast<int>(allocs_.size());
    a.owner_process = sessions_.at(id).process;
    a.owner_gpu = owner;
    a.base_vaddr = next_vaddr_;
    a.length = length;
    a.page_frames = frames_[gi].take(pages);
    next_vaddr_ += (pages + 1) * page_bytes_;  // one guard page between allocations
    allocs_.push_back(std::move(a));
    return allocs_.back();
}

const Allocation& Simulator::find_allocation(SessionState& ss, VAddr vaddr) {
    if (ss.last_alloc < allocs_.size() && allocs_[ss.last_alloc].contains(vaddr))
        return allocs_[ss.last_alloc];
    // Bases are strictly increasing; find the last allocation at or below.
    auto it = std::upper_bound(allocs_.begin(), allocs_.end(), vaddr,
                               [](VAddr v, const Allocation& a) { return v < a.base_vaddr; });
    if (it == allocs_.begin()) throw UnmappedAddress("unmapped address");
    --it;
    if (!it->contains(vaddr)) throw UnmappedAddress("unmapped address");
    ss.last_alloc = static_cast<std::size_t>(it - allocs_.begin());
    return *it;
}

TimingSample Simulator::session_access(SessionId id, VAddr vaddr) {
    SessionState& ss = sessions_.at(id);
    const Allocation& a = find_allocation(ss, vaddr);
    const ProcessState& proc = processes_[ss.process];
    if (a.owner_process != proc.id)
        throw PermissionError("address belongs to another process");
    if (a.owner_gpu != proc.home && proc.grants.count(a.owner_gpu) == 0)
        throw PermissionError("no peer access to gpu " + std::to_string(a.owner_gpu));

    const std::uint64_t off = vaddr - a.base_vaddr;
    const std::size_t gi = gpu_index(a.owner_gpu);
    const CacheConfig& cc = topo_.gpus()[gi].cache;
    const std::uint64_t frame = a.page_frames[off / page_bytes_];
    const std::uint64_t line =
        frame * (page_bytes_ / cc.line_bytes) + (off % page_bytes_) / cc.line_bytes;

    // Only the L2 of the page's home GPU sees the access.
    const bool hit = caches_[gi].access(line, rng_);
    const bool local = a.owner_gpu == proc.home;
    const AccessClass cls = local
        ? (hit ? AccessClass::LocalL2Hit : AccessClass::LocalDram)
        : (hit ? AccessClass::RemoteL2Hit : AccessClass::RemoteDram);

    const double extra_sigma =
        total_probe_sets_ > 1 ? latency_.contention_coeff * (total_probe_sets_ - 1) : 0.0;
    const Cycles cycles = latency_.sample(cls, extra_sigma, rng_);
    ss.clock += cycles;

    TimingSample sample{vaddr, cycles, ss.clock, cls};
    if (sink_) sink_->record({id, sample});
    return sample;
}

void Simulator::session_burn(SessionId id, Cycles n) { sessions_.at(id).clock += n; }

void Simulator::session_set_probe_sets(SessionId id, int count) {
    if (count < 0) throw ConfigError("probe set count must be >= 0");
    SessionState& ss = sessions_.at(id);
    total_probe_sets_ += count - ss.probe_sets;
    ss.probe_sets = count;
}

PhysicalAddress Simulator::oracle_translate(const Allocation& alloc,
                                            std::uint64_t offset) const {
    if (offset >= alloc.length) throw UnmappedAddress("offset out of range");
    const std::uint64_t frame = alloc.page_frames[offset / page_bytes_];
    return {alloc.owner_gpu, frame * page_bytes_ + offset % page_bytes_};
}

std::optional<PhysicalAddress> Simulator::oracle_translate_vaddr(VAddr vaddr) const {
    auto it = std::upper_bound(allocs_.begin(), allocs_.end(), vaddr,
                               [](VAddr v, const Allocation& a) { return v < a.base_vaddr; });
    if (it == allocs_.begin()) return std::nullopt;
    --it;
    if (!it->contains(vaddr)) return std::nullopt;
    return oracle_translate(*it, vaddr - it->base_vaddr);
}

std::uint32_t Simulator::oracle_set_of_vaddr(VAddr vaddr) const {
    auto p = oracle_translate_vaddr(vaddr);
    if (!p) throw UnmappedAddress("unmapped address");
    return set_index(*p, topo_.gpu(p->gpu).cache);
}

const L2Cache& Simulator::cache(GpuId gpu) const { return caches_[gpu_index(gpu)]; }

const Allocation& Simulator::allocation_of(VAddr vaddr) const {
    auto it = std::upper_bound(allocs_.begin(), allocs_.end(), vaddr,
                               [](VAddr v, const Allocation& a) { return v < a.base_vaddr; });
    if (it == allocs_.begin()) throw UnmappedAddress("unmapped address");
    --it;
    if (!it->contains(vaddr)) throw UnmappedAddress("unmapped address");
    return *it;
}

}  // namespace gpunuma
