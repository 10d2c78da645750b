#pragma once

#include <coroutine>
#include <exception>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "gpunuma/sim.hpp"

namespace gpunuma {

// One agent's execution, written as a coroutine over AgentCtx. The scheduler
// resumes it; awaited operations run immediately and hand control back once
// the session clock crosses the current quantum boundary.
class AgentProgram {
public:
    struct promise_type {
        AgentProgram get_return_object() {
            return AgentProgram(Handle::from_promise(*this));
        }
        std::suspend_always initial_suspend() noexcept { return {}; }
        std::suspend_always final_suspend() noexcept { return {}; }
        void return_void() {}
        void unhandled_exception() { exception = std::current_exception(); }
        std::exception_ptr exception;
    };
    using Handle = std::coroutine_handle<promise_type>;

    AgentProgram() = default;
    explicit AgentProgram(Handle h) : handle_(h) {}
    AgentProgram(AgentProgram&& o) noexcept : handle_(std::exchange(o.handle_, {})) {}
    AgentProgram& operator=(AgentProgram&& o) noexcept {
        if (this != &o) {
            destroy();
            handle_ = std::exchange(o.handle_, {});
        }
        return *this;
    }
    AgentProgram(const AgentProgram&) = delete;
    AgentProgram& operator=(const AgentProgram&) = delete;
    ~AgentProgram() { destroy(); }

    bool done() const { return !handle_ || handle_.done(); }

    void resume() {
        handle_.resume();
        if (handle_.done() && handle_.promise().exception)
            std::rethrow_exception(handle_.promise().exception);
    }

private:
    void destroy() {
        if (handle_) handle_.destroy();
    }
    Handle handle_;
};

class AgentCtx {
public:
    explicit AgentCtx(Session session) : session_(session) {}

    Session& session() { return session_; }
    Cycles now() const { return session_.cycles(); }
    Cycles boundary() const { return boundary_; }
    void set_boundary(Cycles b) { boundary_ = b; }

    // Timed access; never preempted mid-access.
    auto access(VAddr vaddr) {
        struct Awaiter {
            AgentCtx& ctx;
            VAddr vaddr;
            TimingSample sample{};
            bool await_ready() {
                sample = ctx.session_.access(vaddr);
                return ctx.now() < ctx.boundary_;
            }
            void await_suspend(std::coroutine_handle<>) {}
            TimingSample await_resume() const { return sample; }
        };
        return Awaiter{*this, vaddr};
    }

    // Busy-wait without memory traffic. Burning past several quantum
    // boundaries at once is equivalent to chunked burning: the agent mutates
    // nothing, so other agents observe the same interleaving either way.
    auto burn(Cycles cycles) {
        struct Awaiter {
            AgentCtx& ctx;
            Cycles cycles;
            bool await_ready() {
                ctx.session_.burn(cycles);
                return ctx.now() < ctx.boundary_;
            }
            void await_suspend(std::coroutine_handle<>) {}
            void await_resume() const {}
        };
        return Awaiter{*this, cycles};
    }

    // Burn until the session clock reaches an absolute cycle count.
    auto wait_until(Cycles target) {
        const Cycles n = now();
        return burn(target > n ? target - n : 0);
    }

private:
    Session session_;
    Cycles boundary_ = 0;
};

using AgentFn = std::function<AgentProgram(AgentCtx&)>;

struct AgentSpec {
    Session session;
    AgentFn program;
};

// Deterministic fixed-quantum round robin. Each round, every live agent runs
// until its own clock passes the round boundary; agents whose clock reaches
// max_cycles are frozen, finished agents are skipped. The interleaving is a
// pure function of (agent order, quantum, simulator seed).
void run_agents(Simulator& sim, std::vector<AgentSpec> agents, Cycles quantum_cycles,
                Cycles max_cycles, TraceSink* sink = nullptr);

// Convenience overload that captures the full trace.
TraceLog run_agents_traced(Simulator& sim, std::vector<AgentSpec> agents,
                           Cycles quantum_cycles, Cycles max_cycles);

void write_trace_csv(std::ostream& os, const TraceLog& log);

}  // namespace gpunuma
