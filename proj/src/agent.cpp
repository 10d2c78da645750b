#include "gpunuma/agent.hpp"

#include <algorithm>
#include <ostream>
#include <set>

namespace gpunuma {

void run_agents(Simulator& sim, std::vector<AgentSpec> agents, Cycles quantum_cycles,
                Cycles max_cycles, TraceSink* sink) {
    if (agents.empty()) throw ConfigError("run_agents needs at least one agent");
    if (quantum_cycles == 0) throw ConfigError("quantum_cycles must be > 0");
    {
        std::set<SessionId> ids;
        for (const auto& a : agents)
            if (!ids.insert(a.session.id()).second)
                throw ConfigError("each agent needs its own session");
    }

    TraceSink* previous = sim.trace_sink();
    sim.set_trace_sink(sink);

    std::vector<std::unique_ptr<AgentCtx>> ctxs;
    std::vector<AgentProgram> programs;
    ctxs.reserve(agents.size());
    programs.reserve(agents.size());
    for (auto& a : agents) {
        ctxs.push_back(std::make_unique<AgentCtx>(a.session));
        programs.push_back(a.program(*ctxs.back()));
    }

    try {
        // Boundaries are absolute: agents keep their clocks across runs, so
        // round boundaries start from the earliest live clock.
        Cycles base = ctxs.front()->now();
        for (const auto& c : ctxs) base = std::min(base, c->now());

        for (Cycles boundary = base + quantum_cycles;; boundary += quantum_cycles) {
            bool alive = false;
            for (std::size_t i = 0; i < programs.size(); ++i) {
                if (programs[i].done()) continue;
                if (ctxs[i]->now() >= max_cycles) continue;
                ctxs[i]->set_boundary(std::min(boundary, max_cycles));
                while (!programs[i].done() && ctxs[i]->now() < ctxs[i]->boundary())
                    programs[i].resume();
                if (!programs[i].done() && ctxs[i]->now() < max_cycles) alive = true;
            }
            if (!alive) break;
        }
    } catch (...) {
        sim.set_trace_sink(previous);
        throw;
    }
    sim.set_trace_sink(previous);
}

TraceLog run_agents_traced(Simulator& sim, std::vector<AgentSpec> agents,
                           Cycles quantum_cycles, Cycles max_cycles) {
    VectorTraceSink sink;
    run_agents(sim, std::move(agents), quantum_cycles, max_cycles, &sink);
    return std::move(sink.log);
}

void write_trace_csv(std::ostream& os, const TraceLog& log) {
    os << "agent_id,timestamp,vaddr,cycles\n";
    for (const auto& ev : log) {
        os << ev.agent << ',' << ev.sample.timestamp_cycles << ',' << ev.sample.vaddr
           << ',' << ev.sample.observed_cycles << '\n';
    }
}

}  // namespace gpunuma
