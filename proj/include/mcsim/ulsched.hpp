#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "mcsim/engine.hpp"

namespace mcsim::ul {

// ---- cooperative, one shared SC (IPC-driven) ----
// Clients yield by calling the scheduler endpoint; the scheduler parks
// the yielder's reply cap, loads the next client's, and replies, which
// carries the single SC to whoever runs next. The scheduler itself never
// owns an SC.
std::unique_ptr<Behavior> coop_shared_scheduler(EpId ep);
std::unique_ptr<Behavior> coop_shared_client(EpId ep, unsigned id, Tick slice);

// ---- cooperative, per-client SCs (signal-driven) ----
// Clients run on their own SCs and yield by signalling the scheduler,
// then waiting on their private notification. The scheduler round-robins
// by signalling the next client.
std::unique_ptr<Behavior> coop_persc_scheduler(NtfnId sched_nt,
                                               std::vector<NtfnId> client_nts);
std::unique_ptr<Behavior> coop_persc_client(NtfnId sched_nt, NtfnId own,
                                            Tick slice);

// ---- preemptive, one shared SC (timer-driven) ----
// The scheduler wakes on a self-programmed timer every quantum and moves
// the shared SC to the next client by rebinding it.
std::unique_ptr<Behavior> preemptive_shared_scheduler(
    NtfnId timer, ScId shared, std::vector<ThreadId> clients, Tick quantum);

// ---- preemptive, per-client SCs (timeout-exception-driven) ----
// Client budgets enforce the quantum; the scheduler is their timeout
// handler and reorders the ready queue with yield_to. `prefer_reverse`
// picks the highest-id ready client instead of FIFO, making the policy's
// hand visible in the schedule.
std::unique_ptr<Behavior> preemptive_persc_scheduler(
    EpId fault_ep, std::vector<ThreadId> clients, std::vector<ScId> client_scs,
    bool prefer_reverse);

// ---- EDF ----
struct EdfTask {
    ThreadId thread;
    ScId sc;
    Tick compute = 1;
    Tick period = 1;  // implicit deadline
};

struct EdfStats {
    std::uint64_t releases = 0;
    std::uint64_t overruns = 0;  // job still live at its next release
    std::vector<std::uint64_t> task_misses;  // late completions + overruns
    std::vector<std::pair<Tick, unsigned>> dispatches;  // (time, task index)
};

/// Earliest-deadline-first over passive-ish clients: each client loops
/// call(ep, badge=id) -> compute(C). A call both finishes the previous
/// job and parks the client until the scheduler dispatches the next one.
/// The timer notification must be bound to the scheduler thread.
std::unique_ptr<Behavior> edf_scheduler(EpId ep, NtfnId timer,
                                        std::uint64_t timer_badge,
                                        std::vector<EdfTask> tasks,
                                        EdfStats* stats);
std::unique_ptr<Behavior> edf_client(EpId ep, unsigned id, Tick compute);

/// Self-contained EDF run: builds an engine with one client per (C, T)
/// task, full-budget SCs and the scheduler above them, runs to `horizon`
/// and returns the collected stats.
EdfStats edf_simulate(const std::vector<std::pair<Tick, Tick>>& tasks,
                      Tick horizon);

/// Ideal zero-cost preemptive EDF reference: execution spans per task
/// over [0, horizon), same deadline/id tie-breaking as the scheduler.
struct RefSpan {
    unsigned task;
    Tick begin, end;
};
std::vector<RefSpan> edf_reference(const std::vector<EdfTask>& tasks,
                                   Tick horizon);

// ---- CFS-like fair scheduler ----
struct CfsClient {
    ThreadId thread;
    ScId sc;
    unsigned weight = 1;
};

/// Wakes every quantum, charges each client's SC via consume(), advances
/// virtual runtime by consumed/weight and hands the CPU to the smallest
/// virtual runtime via yield_to.
std::unique_ptr<Behavior> cfs_scheduler(NtfnId timer, std::vector<CfsClient> clients,
                                        Tick quantum);

}  // namespace mcsim::ul
