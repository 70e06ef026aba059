#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mcsim/kernel.hpp"

namespace mcsim {

class Engine;

/// One step a thread asks the engine to perform. Compute consumes CPU
/// time; everything else is a zero-cost kernel operation.
struct Action {
    enum class Kind {
        Compute,
        Call,
        Reply,
        ReplyRecv,
        Recv,
        Send,
        NbSendWait,
        Signal,
        Wait,
        SignalRecv,
        Yield,
        YieldTo,
        Consume,
        ScConfigure,
        SaveCaller,
        SetCaller,
        SwapCaller,
        FaultReply,
        SetSystemCriticality,
        SetPriority,
        SetCriticality,
        BindSc,
        UnbindSc,
        StartThread,
        SuspendThread,
        ProgramTimer,
        Halt,
    } kind = Kind::Halt;

    Tick amount = 0;  // compute length / budget / timer delay
    Tick period = 0;
    std::uint64_t badge = 0;
    std::uint64_t data = 0;
    bool donate = false;
    bool job = false;      // compute span ends a job (response-time stats)
    bool absolute = false; // ProgramTimer: amount is an absolute instant
    unsigned level = 0;    // priority or criticality
    EpId ep, ep2;
    NtfnId ntfn;
    ScId sc;
    ThreadId target;
    std::string slot, slot2;
    HandlerAction handler{};

    static Action compute(Tick n, bool job = false) {
        Action a;
        a.kind = Kind::Compute;
        a.amount = n;
        a.job = job;
        return a;
    }
    static Action halt() { return {}; }
};

struct BehaviorContext {
    Engine& engine;
    Kernel& kernel;
    ThreadId self;
    Tick now = 0;
};

/// Supplies a thread's next action each time it returns from the kernel.
/// `last` is the outcome of the action that just finished (or unblocked).
class Behavior {
public:
    virtual ~Behavior() = default;
    virtual Action next(BehaviorContext& ctx, const SyscallOutcome& last) = 0;
    /// Called when a timeout handler rolls this thread back. Restores the
    /// behavior to its last checkpoint and names the endpoint to wait on.
    virtual std::optional<EpId> rollback() { return std::nullopt; }
};

struct Span {
    ThreadId thread;
    Tick begin = 0;
    Tick end = 0;
};

struct JobRecord {
    ThreadId thread;
    Tick completed = 0;
};

/// Deterministic single-core discrete-event loop around a Kernel. Time
/// only moves at compute boundaries, timer interrupts and external
/// signals; everything in between costs nothing.
class Engine {
public:
    explicit Engine(KernelConfig cfg);

    [[nodiscard]] Kernel& kernel() { return k_; }
    [[nodiscard]] const Kernel& kernel() const { return k_; }
    [[nodiscard]] TraceLog& trace_log() { return trace_; }

    void set_behavior(ThreadId t, std::unique_ptr<Behavior> b);
    [[nodiscard]] Behavior* behavior(ThreadId t);

    /// Queue a device-style signal delivered at an absolute instant.
    void add_external_signal(Tick at, NtfnId n);

    /// Run until `horizon`. Can be called repeatedly to extend a run.
    void run(Tick horizon);

    [[nodiscard]] Tick now() const { return now_; }
    [[nodiscard]] Tick idle_time() const { return idle_; }
    [[nodiscard]] const std::vector<Span>& spans() const { return spans_; }
    [[nodiscard]] const std::vector<JobRecord>& jobs() const { return jobs_; }
    void record_spans(bool on) { record_spans_ = on; }

    /// CPU time attributed to a thread so far.
    [[nodiscard]] Tick cpu_time(ThreadId t) const { return k_.thread(t).cpu_time; }

private:
    struct Exec {
        Tick work_left = 0;
        bool job = false;          // current compute ends a job
        bool awaiting = false;     // blocked in the kernel
        bool halted = false;
        bool fetched = false;      // ever asked for an action
        SyscallOutcome last{};
    };

    void bootstrap();
    void settle(Tick t);
    void kernel_step(Tick t, ThreadId actor);
    SyscallOutcome apply(Tick t, ThreadId actor, const Action& a);
    void timer_event(Tick t);
    void fire_signal(Tick t, NtfnId n);
    Action fetch(Tick t, ThreadId actor);
    void note_span(ThreadId t, Tick begin, Tick end);

    TraceLog trace_;
    Kernel k_;
    std::vector<std::unique_ptr<Behavior>> behaviors_;
    std::vector<Exec> exec_;
    std::multimap<Tick, NtfnId> pending_signals_;
    std::vector<Span> spans_;
    std::vector<JobRecord> jobs_;
    Tick now_ = 0;
    Tick idle_ = 0;
    bool record_spans_ = true;
    bool bootstrapped_ = false;
};

}  // namespace mcsim
