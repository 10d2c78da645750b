#include "gpunuma/probe.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <ostream>
#include <set>

#include <json.hpp>

namespace gpunuma::probe {

namespace {

using nlohmann::json;

struct Cluster {
    double mean = 0;
    double sd = 0;
    std::size_t count = 0;
};

// Seeded 1-D k-means, k=4. Centers start at the sorted-data quantiles, so the
// result is a pure function of the input values.
std::array<Cluster, 4> kmeans4(std::vector<double> values) {
    if (values.size() < 8) throw CalibrationFailed("too few samples to cluster");
    std::sort(values.begin(), values.end());

    std::array<double, 4> centers{};
    for (int i = 0; i < 4; ++i)
        centers[i] = values[values.size() * (2 * i + 1) / 8];

    std::array<double, 4> sums{};
    std::array<std::size_t, 4> counts{};
    for (int iter = 0; iter < 200; ++iter) {
        sums.fill(0.0);
        counts.fill(0);
        for (double v : values) {
            int best = 0;
            double bd = std::abs(v - centers[0]);
            for (int c = 1; c < 4; ++c) {
                const double d = std::abs(v - centers[c]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            sums[best] += v;
            ++counts[best];
        }
        bool stable = true;
        for (int c = 0; c < 4; ++c) {
            if (counts[c] == 0) throw CalibrationFailed("latency clustering collapsed");
            const double next = sums[c] / static_cast<double>(counts[c]);
            if (std::abs(next - centers[c]) > 1e-9) stable = false;
            centers[c] = next;
        }
        if (stable) break;
    }

    std::array<Cluster, 4> out{};
    std::array<double, 4> sq{};
    sums.fill(0.0);
    counts.fill(0);
    for (double v : values) {
        int best = 0;
        double bd = std::abs(v - centers[0]);
        for (int c = 1; c < 4; ++c) {
            const double d = std::abs(v - centers[c]);
            if (d < bd) {
                bd = d;
                best = c;
            }
        }
        sums[best] += v;
        sq[best] += v * v;
        ++counts[best];
    }
    for (int c = 0; c < 4; ++c) {
        if (counts[c] == 0) throw CalibrationFailed("latency clustering collapsed");
        out[c].count = counts[c];
        out[c].mean = sums[c] / static_cast<double>(counts[c]);
        const double var =
            std::max(0.0, sq[c] / static_cast<double>(counts[c]) - out[c].mean * out[c].mean);
        out[c].sd = std::sqrt(var);
    }
    std::sort(out.begin(), out.end(), [](const Cluster& a, const Cluster& b) {
        return a.mean < b.mean;
    });
    return out;
}

// One prime + chase + re-probe pass shared by the discovery machinery.
class ChaseEngine {
public:
    ChaseEngine(Session session, VAddr target, bool remote, const LatencyThresholds& th,
                const ProbeConfig& cfg)
        : s_(session), target_(target), remote_(remote), th_(th), cfg_(cfg) {}

    // Access target, traverse `walk` (plus `extra` when nonzero) in a freshly
    // randomized order, re-access target. True when the target was evicted.
    bool pass(const std::vector<VAddr>& walk, VAddr extra = 0) {
        scratch_.assign(walk.begin(), walk.end());
        if (extra) scratch_.push_back(extra);
        s_.rng().shuffle(scratch_);
        s_.access(target_);
        for (VAddr v : scratch_) s_.access(v);
        const TimingSample t = s_.access(target_);
        return th_.is_miss(t.observed_cycles, remote_);
    }

    // Cheap screen: two passes, both must read as a miss.
    bool screen(const std::vector<VAddr>& walk) { return pass(walk) && pass(walk); }

    // Majority vote over cfg.vote_trials passes.
    bool vote(const std::vector<VAddr>& walk, VAddr extra = 0) {
        int misses = 0;
        for (int t = 0; t < cfg_.vote_trials; ++t)
            if (pass(walk, extra)) ++misses;
        return 2 * misses > cfg_.vote_trials;
    }

private:
    Session s_;
    VAddr target_;
    bool remote_;
    const LatencyThresholds& th_;
    const ProbeConfig& cfg_;
    std::vector<VAddr> scratch_;
};

std::uint32_t cache_ways_of(Session& s, GpuId gpu) {
    return s.sim().topology().gpu(gpu).cache.ways;
}

// Core growing pointer chase. Collects `wanted` addresses that conflict with
// the target. The chain keeps unidentified conflicts alive; once the first
// member is known the chain is pruned down to the ways-1 resident conflicts
// (group tests against a known member), after which every screened-clean
// block is certifiably conflict-free and can be dropped. That keeps the scan
// linear instead of quadratic without changing what gets detected.
EvictionSet discover_impl(Session s, const Allocation& alloc, std::uint64_t target_offset,
                          int wanted, const LatencyThresholds& th, const ProbeConfig& cfg) {
    if (target_offset >= alloc.length) throw ConfigError("target_offset outside allocation");
    if (wanted < 1) throw ConfigError("wanted member count must be >= 1");
    const std::uint64_t stride = cfg.stride_bytes;
    const VAddr target = alloc.base_vaddr + target_offset;
    const std::uint64_t target_line = target_offset / stride;
    const std::uint64_t pool_lines = alloc.length / stride;
    const bool remote = alloc.owner_gpu != s.home_gpu();

    ChaseEngine eng(s, target, remote, th, cfg);
    std::vector<VAddr> chain;
    std::vector<VAddr> found;
    bool pure = false;  // chain certified to hold exactly ways-1 conflicts
    std::uint64_t budget = cfg.search_budget;
    std::uint64_t cursor = 0;

    // Extract conflicts from a chain that evicts the target on its own: the
    // last element of the minimal evicting prefix is a conflict.
    auto repair = [&]() {
        while (static_cast<int>(found.size()) < wanted && !chain.empty() && eng.vote(chain)) {
            std::size_t lo = 1, hi = chain.size();
            while (lo < hi) {
                const std::size_t mid = (lo + hi) / 2;
                std::vector<VAddr> prefix(chain.begin(), chain.begin() + mid);
                if (eng.vote(prefix)) hi = mid;
                else lo = mid + 1;
            }
            found.push_back(chain[lo - 1]);
            chain.erase(chain.begin() + static_cast<std::ptrdiff_t>(lo - 1));
        }
    };

    // Group-prune the chain down to its resident conflicts, using a known
    // member as the 16th line: a dropped segment evicts the target iff it
    // carried no conflicts.
    auto compact = [&](VAddr member) {
        std::vector<VAddr> certified;
        std::deque<std::vector<VAddr>> segments;
        if (!chain.empty()) segments.push_back(chain);
        while (!segments.empty()) {
            std::vector<VAddr> seg = std::move(segments.front());
            segments.pop_front();
            std::vector<VAddr> walk = certified;
            for (const auto& other : segments)
                walk.insert(walk.end(), other.begin(), other.end());
            if (eng.vote(walk, member)) continue;  // segment carries no conflict
            if (seg.size() == 1) {
                certified.push_back(seg[0]);
                continue;
            }
            const std::size_t half = seg.size() / 2;
            segments.push_front(std::vector<VAddr>(seg.begin() + half, seg.end()));
            segments.push_front(std::vector<VAddr>(seg.begin(), seg.begin() + half));
        }
        chain = std::move(certified);
    };

    while (static_cast<int>(found.size()) < wanted) {
        std::vector<VAddr> block;
        while (static_cast<int>(block.size()) < cfg.append_block && cursor < pool_lines &&
               budget > 0) {
            if (cursor != target_line) {
                block.push_back(alloc.base_vaddr + cursor * stride);
                --budget;
            }
            ++cursor;
        }
        if (block.empty()) throw IncompleteSet(static_cast<int>(found.size()), wanted);

        chain.insert(chain.end(), block.begin(), block.end());
        if (!eng.screen(chain)) {
            if (pure) chain.resize(chain.size() - block.size());
            continue;
        }

        chain.resize(chain.size() - block.size());
        if (eng.vote(chain)) repair();  // a conflict slipped through earlier
        if (static_cast<int>(found.size()) >= wanted) break;

        for (VAddr c : block) {
            chain.push_back(c);
            if (eng.vote(chain)) {
                found.push_back(c);
                chain.pop_back();
                if (static_cast<int>(found.size()) >= wanted) break;
            } else if (pure) {
                chain.pop_back();
            }
        }
        if (!pure && !found.empty()) {
            compact(found.front());
            pure = true;
        }
    }

    EvictionSet out;
    out.target_vaddr = target;
    out.members = std::move(found);
    out.remote = remote;
    return out;
}

}  // namespace

void LatencyThresholds::validate() const {
    if (!(t1 < t2 && t2 < t3)) throw ConfigError("thresholds must be strictly increasing");
    if (!(cluster_means[0] < t1 && t1 < cluster_means[1] && cluster_means[1] < t2 &&
          t2 < cluster_means[2] && cluster_means[2] < t3 && t3 < cluster_means[3]))
        throw ConfigError("each threshold must lie between adjacent cluster means");
}

const char* to_string(PolicyReport::Label label) {
    switch (label) {
        case PolicyReport::Label::LruLike: return "LRU-like";
        case PolicyReport::Label::RandomLike: return "random-like";
        default: return "unknown";
    }
}

CalibrationOutcome calibrate_latencies_traced(Session session, const Allocation& local_alloc,
                                              const Allocation& remote_alloc,
                                              int samples_per_class, const ProbeConfig& cfg) {
    if (samples_per_class < 100)
        throw ConfigError("calibration needs at least 100 samples per class");
    if (local_alloc.owner_gpu != session.home_gpu())
        throw ConfigError("local_alloc must live on the session's home gpu");
    if (remote_alloc.owner_gpu == session.home_gpu())
        throw ConfigError("remote_alloc must live on a peer gpu");
    if (cfg.num_access_repeats < 2)
        throw ConfigError("num_access_repeats must be >= 2 to observe hits");

    CalibrationOutcome out;
    std::vector<double> pooled;
    pooled.reserve(4 * static_cast<std::size_t>(samples_per_class));

    for (const Allocation* alloc : {&local_alloc, &remote_alloc}) {
        const std::uint64_t lines = alloc->length / cfg.stride_bytes;
        if (lines == 0) throw ConfigError("calibration allocation smaller than one line");
        int miss_needed = samples_per_class;
        int hit_needed = samples_per_class;
        std::uint64_t cursor = 0;
        std::uint64_t kernel = 0;
        session.flush_caches();
        while (miss_needed > 0 || hit_needed > 0) {
            if (cursor >= lines || (kernel > 0 && kernel % cfg.kernel_repeats == 0)) {
                session.flush_caches();
                if (cursor >= lines) cursor = 0;
            }
            const VAddr v = alloc->base_vaddr + cursor * cfg.stride_bytes;
            for (int r = 0; r < cfg.num_access_repeats; ++r) {
                const TimingSample ts = session.access(v);
                out.samples.push_back(ts);
                if ((r == 0 && miss_needed > 0) || (r > 0 && hit_needed > 0)) {
                    pooled.push_back(static_cast<double>(ts.observed_cycles));
                    (r == 0 ? miss_needed : hit_needed) -= 1;
                }
            }
            ++cursor;
            ++kernel;
        }
    }

    const auto clusters = kmeans4(pooled);
    for (int c = 0; c + 1 < 4; ++c) {
        const double gap = clusters[c + 1].mean - clusters[c].mean;
        if (gap <= std::max(clusters[c].sd, clusters[c + 1].sd))
            throw CalibrationFailed("adjacent latency clusters overlap within one sigma");
    }

    LatencyThresholds th;
    for (int c = 0; c < 4; ++c) th.cluster_means[c] = clusters[c].mean;
    th.t1 = (clusters[0].mean + clusters[1].mean) / 2.0;
    th.t2 = (clusters[1].mean + clusters[2].mean) / 2.0;
    th.t3 = (clusters[2].mean + clusters[3].mean) / 2.0;
    th.validate();
    out.thresholds = th;
    return out;
}

LatencyThresholds calibrate_latencies(Session session, const Allocation& local_alloc,
                                      const Allocation& remote_alloc, int samples_per_class,
                                      const ProbeConfig& cfg) {
    return calibrate_latencies_traced(session, local_alloc, remote_alloc, samples_per_class, cfg)
        .thresholds;
}

EvictionSet discover_eviction_set(Session session, const Allocation& alloc,
                                  std::uint64_t target_offset,
                                  const LatencyThresholds& thresholds,
                                  const ProbeConfig& cfg) {
    const int ways = static_cast<int>(cache_ways_of(session, alloc.owner_gpu));
    return discover_impl(session, alloc, target_offset, ways, thresholds, cfg);
}

EvictionSet discover_extended_set(Session session, const Allocation& alloc,
                                  std::uint64_t target_offset, int wanted_members,
                                  const LatencyThresholds& thresholds,
                                  const ProbeConfig& cfg) {
    return discover_impl(session, alloc, target_offset, wanted_members, thresholds, cfg);
}

PolicyReport measure_associativity(Session session, const EvictionSet& set,
                                   const LatencyThresholds& thresholds, int trials) {
    if (set.members.empty()) throw ConfigError("eviction set is empty");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    const int n = static_cast<int>(set.members.size());
    const int vote = 5;

    std::vector<int> first_k(trials, 0);
    std::vector<int> evict_count(n + 1, 0);
    for (int t = 0; t < trials; ++t) {
        for (int k = 1; k <= n; ++k) {
            int misses = 0;
            for (int v = 0; v < vote; ++v) {
                session.access(set.target_vaddr);
                for (int i = 0; i < k; ++i) session.access(set.members[i]);
                const TimingSample ts = session.access(set.target_vaddr);
                if (thresholds.is_miss(ts.observed_cycles, set.remote)) ++misses;
            }
            if (2 * misses > vote) {
                ++evict_count[k];
                if (first_k[t] == 0) first_k[t] = k;
            }
        }
    }

    PolicyReport report;
    for (int k = 1; k <= n; ++k) {
        if (evict_count[k] == trials) {
            report.inferred_ways = k;
            break;
        }
    }

    const bool any_evictions =
        std::any_of(first_k.begin(), first_k.end(), [](int k) { return k > 0; });
    const bool all_equal =
        any_evictions && std::all_of(first_k.begin(), first_k.end(),
                                     [&](int k) { return k == first_k[0]; });

    bool clean_step = report.inferred_ways > 0 && all_equal &&
                      first_k[0] == report.inferred_ways;
    if (clean_step) {
        for (int k = 1; k <= n && clean_step; ++k) {
            if (k < report.inferred_ways && evict_count[k] != 0) clean_step = false;
            if (k >= report.inferred_ways && evict_count[k] != trials) clean_step = false;
        }
    }

    if (clean_step) {
        report.label = PolicyReport::Label::LruLike;
        report.eviction_period = report.inferred_ways;
    } else if (any_evictions) {
        report.label = PolicyReport::Label::RandomLike;
    } else {
        report.label = PolicyReport::Label::Unknown;
    }
    return report;
}

bool test_alias(Session session, const EvictionSet& set_a, const EvictionSet& set_b,
                const LatencyThresholds& thresholds, int trials) {
    if (set_a.members.empty() || set_b.members.empty())
        throw ConfigError("alias test needs complete sets");
    int positive = 0;
    for (int t = 0; t < trials; ++t) {
        for (VAddr v : set_a.members) session.access(v);  // prime
        for (VAddr v : set_b.members) session.access(v);
        int misses = 0;
        for (VAddr v : set_a.members) {
            const TimingSample ts = session.access(v);
            if (thresholds.is_miss(ts.observed_cycles, set_a.remote)) ++misses;
        }
        if (misses >= 1) ++positive;
    }
    return 2 * positive > trials;
}

bool validate_eviction_set(Session session, const EvictionSet& set,
                           const LatencyThresholds& thresholds, int trials) {
    int positive = 0;
    for (int t = 0; t < trials; ++t) {
        session.access(set.target_vaddr);
        for (VAddr v : set.members) session.access(v);
        const TimingSample ts = session.access(set.target_vaddr);
        if (thresholds.is_miss(ts.observed_cycles, set.remote)) ++positive;
    }
    return 2 * positive > trials;
}

std::vector<SweepPoint> eviction_sweep(Session session, const EvictionSet& set,
                                       const LatencyThresholds& thresholds) {
    std::vector<SweepPoint> out;
    const int n = static_cast<int>(set.members.size());
    for (int k = 0; k <= n; ++k) {
        session.access(set.target_vaddr);
        for (int i = 0; i < k; ++i) session.access(set.members[i]);
        const TimingSample ts = session.access(set.target_vaddr);
        out.push_back({k, ts.observed_cycles,
                       thresholds.is_miss(ts.observed_cycles, set.remote)});
    }
    return out;
}

namespace {

// Shift every address of `base` by delta lines within its own page. Linear
// physical indexing makes every surviving shifted line land in the set
// delta away from the base set.
std::optional<EvictionSet> derive_shifted(const EvictionSet& base, std::int64_t delta,
                                          std::uint64_t stride, std::uint64_t page_bytes,
                                          int ways) {
    const std::int64_t lpp = static_cast<std::int64_t>(page_bytes / stride);
    auto shift = [&](VAddr v) -> std::optional<VAddr> {
        const std::int64_t line = static_cast<std::int64_t>((v % page_bytes) / stride);
        if (line + delta < 0 || line + delta >= lpp) return std::nullopt;
        return static_cast<VAddr>(static_cast<std::int64_t>(v) +
                                  delta * static_cast<std::int64_t>(stride));
    };

    std::vector<VAddr> pool;
    if (auto t = shift(base.target_vaddr)) pool.push_back(*t);
    for (VAddr m : base.members)
        if (auto v = shift(m)) pool.push_back(*v);
    if (static_cast<int>(pool.size()) < ways + 1) return std::nullopt;

    EvictionSet out;
    out.target_vaddr = pool.front();
    out.members.assign(pool.begin() + 1, pool.begin() + 1 + ways);
    out.remote = base.remote;
    return out;
}

}  // namespace

std::vector<EvictionSet> enumerate_unique_sets(Session session, const Allocation& alloc,
                                               int count_wanted,
                                               const LatencyThresholds& thresholds,
                                               const ProbeConfig& cfg) {
    if (count_wanted < 1) return {};
    const auto& cache_cfg = session.sim().topology().gpu(alloc.owner_gpu).cache;
    if (count_wanted > static_cast<int>(cache_cfg.num_sets))
        throw ConfigError("count_wanted exceeds the number of cache sets");
    const int ways = static_cast<int>(cache_cfg.ways);
    const std::uint64_t page_bytes = session.sim().page_bytes();
    const std::uint64_t lpp = page_bytes / cfg.stride_bytes;
    const std::uint64_t pages = alloc.page_frames.size();

    std::vector<EvictionSet> kept;
    std::set<std::uint64_t> seed_pages;

    auto aliases_kept = [&](const EvictionSet& es) {
        for (const auto& k : kept)
            if (test_alias(session, k, es, thresholds, cfg.vote_trials)) return true;
        return false;
    };

    for (std::uint64_t page = 0;
         page < pages && static_cast<int>(kept.size()) < count_wanted; ++page) {
        if (seed_pages.count(page)) continue;
        const std::uint64_t target_offset =
            page * page_bytes + (lpp / 2) * cfg.stride_bytes;
        if (target_offset >= alloc.length) break;

        EvictionSet seed;
        try {
            seed = discover_extended_set(session, alloc, target_offset,
                                         std::min(2 * ways, ways + 24), thresholds, cfg);
        } catch (const IncompleteSet&) {
            break;  // pool exhausted; return what we have
        }
        seed_pages.insert(page);

        for (std::int64_t step = 0;
             step < static_cast<std::int64_t>(lpp) &&
             static_cast<int>(kept.size()) < count_wanted;
             ++step) {
            const std::array<std::int64_t, 2> deltas{step, -step};
            for (int di = 0; di < (step == 0 ? 1 : 2); ++di) {
                const std::int64_t delta = deltas[di];
                auto derived = derive_shifted(seed, delta, cfg.stride_bytes, page_bytes, ways);
                if (!derived) continue;
                if (!validate_eviction_set(session, *derived, thresholds, cfg.vote_trials))
                    continue;
                if (aliases_kept(*derived)) continue;
                kept.push_back(std::move(*derived));
                if (static_cast<int>(kept.size()) >= count_wanted) break;
            }
        }
    }
    return kept;
}

void write_eviction_sets_json(std::ostream& os, const std::vector<EvictionSet>& sets,
                              std::uint64_t seed) {
    json j;
    j["schema_version"] = 1;
    j["seed"] = seed;
    j["sets"] = json::array();
    for (const auto& s : sets) {
        json e;
        e["target"] = s.target_vaddr;
        e["members"] = s.members;
        e["remote"] = s.remote;
        if (s.resolved_set) e["resolved_set"] = *s.resolved_set;
        else e["resolved_set"] = nullptr;
        j["sets"].push_back(std::move(e));
    }
    os << j.dump(2) << '\n';
}

std::vector<EvictionSet> read_eviction_sets_json(std::istream& is) {
    json j = json::parse(is);
    std::vector<EvictionSet> out;
    for (const auto& e : j.at("sets")) {
        EvictionSet s;
        s.target_vaddr = e.at("target").get<VAddr>();
        s.members = e.at("members").get<std::vector<VAddr>>();
        s.remote = e.value("remote", true);
        if (e.contains("resolved_set") && !e.at("resolved_set").is_null())
            s.resolved_set = e.at("resolved_set").get<std::uint32_t>();
        out.push_back(std::move(s));
    }
    return out;
}

void write_thresholds_json(std::ostream& os, const LatencyThresholds& t, std::uint64_t seed) {
    json j;
    j["schema_version"] = 1;
    j["seed"] = seed;
    j["t1"] = t.t1;
    j["t2"] = t.t2;
    j["t3"] = t.t3;
    j["cluster_means"] = t.cluster_means;
    os << j.dump(2) << '\n';
}

LatencyThresholds read_thresholds_json(std::istream& is) {
    json j = json::parse(is);
    LatencyThresholds t;
    t.t1 = j.at("t1").get<double>();
    t.t2 = j.at("t2").get<double>();
    t.t3 = j.at("t3").get<double>();
    const auto means = j.at("cluster_means").get<std::vector<double>>();
    if (means.size() != 4) throw ConfigError("cluster_means must have 4 entries");
    std::copy(means.begin(), means.end(), t.cluster_means.begin());
    t.validate();
    return t;
}

}  // namespace gpunuma::probe
