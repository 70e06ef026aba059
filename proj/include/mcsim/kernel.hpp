#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcsim/result.hpp"
#include "mcsim/trace.hpp"
#include "mcsim/types.hpp"

namespace mcsim {

struct KernelConfig {
    unsigned priority_bits = 8;      // Np: base priorities in [0, 2^Np - 1]
    unsigned criticality_levels = 1; // Ncrit
    Tick kernel_wcet = 1;            // minimum budget needed to exit the kernel
    bool check_invariants = false;   // validate queue/link invariants after events

    [[nodiscard]] unsigned priority_levels() const { return 1u << priority_bits; }
    [[nodiscard]] unsigned effective_levels() const {
        return criticality_levels << priority_bits;
    }
};

enum class ThreadState : std::uint8_t {
    Suspended,
    Ready,        // runnable; without a usable SC the thread is parked, not queued
    Running,
    OutOfBudget,  // in the release queue awaiting a refill
    BlockedSend,
    BlockedRecv,
    BlockedOnReply,
    WaitingNtfn,
    FaultBlocked, // timeout fault outstanding
};

constexpr std::string_view to_string(ThreadState s) {
    switch (s) {
    case ThreadState::Suspended: return "Suspended";
    case ThreadState::Ready: return "Ready";
    case ThreadState::Running: return "Running";
    case ThreadState::OutOfBudget: return "OutOfBudget";
    case ThreadState::BlockedSend: return "BlockedSend";
    case ThreadState::BlockedRecv: return "BlockedRecv";
    case ThreadState::BlockedOnReply: return "BlockedOnReply";
    case ThreadState::WaitingNtfn: return "WaitingNtfn";
    case ThreadState::FaultBlocked: return "FaultBlocked";
    }
    return "?";
}

/// The unit of CPU-time authority: a (budget, period) pair plus the
/// accounting state the kernel keeps for it.
struct SchedContext {
    std::string name;
    Tick budget = 0;
    Tick period = 1;
    Tick remaining = 0;
    Tick next_refill = 0;
    Tick consumed = 0;       // accumulator since the last consume()/yield_to()
    Tick total_charged = 0;  // lifetime charge, for accounting checks
    std::uint64_t data = 0;
    ThreadId home_thread;    // thread this SC is bound to
    ThreadId running_thread; // thread currently executing on it
    ThreadId yield_from;
};

enum class FaultReason : std::uint8_t { BudgetExpired, CriticalitySwitch };

struct TimeoutFault {
    ThreadId faulting_thread;
    ScId sc_in_use;      // possibly borrowed
    ThreadId sc_owner;   // home thread of that SC (may be invalid)
    FaultReason reason = FaultReason::BudgetExpired;
    Tick timestamp = 0;
};

/// Single-use capability allowing exactly one reply to a caller. Fault
/// replies reuse the same object with `is_fault` set.
struct ReplyCap {
    bool alive = false;
    bool is_fault = false;
    ThreadId caller;
    ScId donated_sc;  // SC to hand back on reply (invalid if none)
    TimeoutFault fault{};
    std::uint64_t error_badge = 0;
};

struct EpWaiter {
    ThreadId thread;
    bool willing_to_donate = false;
    bool is_call = false;  // caller expects a reply cap to be minted
    std::uint64_t badge = 0;
    ReplyId premint;  // set for timeout faults parked on a handler endpoint
};

struct Endpoint {
    std::string name;
    enum class Dir : std::uint8_t { None, Send, Recv } dir = Dir::None;
    std::deque<EpWaiter> queue;  // effective-priority ordered, FIFO within prio
};

struct Notification {
    std::string name;
    bool word = false;
    ThreadId waiter;
    ThreadId bound_thread;  // signals delivered as an IPC when it blocks on an ep
    std::uint64_t badge = 0;
};

struct Thread {
    std::string name;
    unsigned base_prio = 0;
    unsigned mcp = 0;
    unsigned criticality = 0;
    unsigned mcc = 0;
    unsigned boost_level = 0;  // criticality boost currently applied
    ThreadState state = ThreadState::Suspended;
    ScId home_sc;
    ScId current_sc;
    EpId timeout_handler;
    ReplyId reply_slot;
    std::map<std::string, ReplyId> saved_caps;
    ThreadId call_prev, call_next;  // chain of nested donating calls
    EpId waiting_ep;
    NtfnId waiting_ntfn;
    SyscallOutcome pending_result;  // outcome of the op that unblocked this thread
    Tick cpu_time = 0;              // engine-attributed execution time

    // Authority table. all_authority covers every kind (scenario default).
    bool all_authority = false;
    bool has_sched_control = false;
    std::vector<ScId> sc_caps;
    std::vector<ThreadId> tcb_caps;
    std::vector<EpId> ep_caps;
    std::vector<NtfnId> ntfn_caps;
};

struct HandlerAction {
    enum class Kind : std::uint8_t {
        ExtendBudget,
        RollbackAndReset,
        SuspendOwner,
        RaiseSystemCriticality,
    } kind = Kind::ExtendBudget;
    Tick amount = 0;     // ExtendBudget
    unsigned level = 0;  // RaiseSystemCriticality
};

/// Two-level occupancy bitfield over up to 1024 effective priorities.
class PriorityBitmap {
public:
    void set(unsigned p) {
        top_ |= 1ull << (p >> 6);
        words_[p >> 6] |= 1ull << (p & 63);
    }
    void clear(unsigned p) {
        words_[p >> 6] &= ~(1ull << (p & 63));
        if (words_[p >> 6] == 0) top_ &= ~(1ull << (p >> 6));
    }
    [[nodiscard]] bool test(unsigned p) const {
        return (words_[p >> 6] >> (p & 63)) & 1;
    }
    [[nodiscard]] bool any() const { return top_ != 0; }
    [[nodiscard]] unsigned highest() const;  // undefined when !any()

private:
    std::uint64_t top_ = 0;
    std::uint64_t words_[16] = {};
};

/// The kernel model: scheduler state plus every object table. All state
/// mutation happens through the single-threaded simulation loop.
class Kernel {
public:
    explicit Kernel(KernelConfig cfg, TraceLog* trace = nullptr);

    // ---- object creation / configuration (scenario setup) ----
    ThreadId add_thread(std::string name, unsigned prio, unsigned criticality = 0,
                        unsigned mcp = 0, unsigned mcc = 0);
    ScId add_sc(std::string name, Tick budget, Tick period);
    EpId add_endpoint(std::string name);
    NtfnId add_notification(std::string name, std::uint64_t badge = 0);
    void bind_notification(NtfnId n, ThreadId t);
    void set_timeout_handler(ThreadId t, EpId ep);

    void grant_all(ThreadId t);
    void grant_sched_control(ThreadId t);
    void grant_sc_cap(ThreadId t, ScId sc);
    void grant_tcb_cap(ThreadId t, ThreadId target);
    void grant_ep_cap(ThreadId t, EpId ep);
    void grant_ntfn_cap(ThreadId t, NtfnId n);

    // ---- model ops ----
    Err bind_sc(ThreadId actor, ScId sc, ThreadId target);
    Err unbind_sc(ThreadId actor, ScId sc);
    Err set_priority(ThreadId actor, ThreadId target, unsigned prio);
    Err set_thread_criticality(ThreadId actor, ThreadId target, unsigned crit);
    Err start_thread(ThreadId actor, ThreadId target);
    Err suspend_thread(ThreadId actor, ThreadId target);

    // ---- scheduler ----
    /// Kernel entry: update the timestamp, run the budget check, take the
    /// expiry path when the current SC cannot cover one more kernel op.
    void on_entry(Tick now);
    /// Kernel exit: lazily charge (or roll the timestamp back), reschedule
    /// if required and reprogram the one-shot timer.
    void on_exit();
    /// Wake every release-queue thread whose refill time has arrived.
    void release_wakeup(Tick now);

    Err yield(ThreadId actor, ScId sc);
    Result<Tick> yield_to(ThreadId actor, ScId sc);
    Result<Tick> consume(ThreadId actor, ScId sc);
    Err sc_configure(ThreadId actor, ScId sc, Tick budget, Tick period,
                     std::uint64_t data = 0);

    // ---- IPC ----
    Err call(ThreadId actor, EpId ep, bool willing_to_donate, std::uint64_t badge);
    Err reply(ThreadId actor, std::uint64_t badge = 0);
    Err reply_recv(ThreadId actor, EpId ep, std::uint64_t reply_badge = 0);
    Err recv(ThreadId actor, EpId ep);
    Err send(ThreadId actor, EpId ep, std::uint64_t badge);
    Err nbsend_wait(ThreadId actor, EpId ep_send, std::uint64_t badge, EpId ep_recv);
    Err signal(ThreadId actor, NtfnId n);
    Err wait(ThreadId actor, NtfnId n);
    Err signal_recv(ThreadId actor, NtfnId n, EpId ep);
    void signal_external(NtfnId n);  // device/timer signals, no authority needed

    Err save_caller(ThreadId actor, ThreadId target, const std::string& slot);
    Err set_caller(ThreadId actor, const std::string& slot);
    Err swap_caller(ThreadId actor, const std::string& a, const std::string& b);

    // ---- timeout faults ----
    Err fault_reply(ThreadId actor, const HandlerAction& action);
    /// Hook used by the engine: given a rolled-back thread, restore its
    /// scenario state and name the endpoint it re-enters receive on.
    void set_rollback_hook(std::function<std::optional<EpId>(ThreadId)> fn) {
        rollback_hook_ = std::move(fn);
    }

    // ---- criticality ----
    Result<unsigned> set_system_criticality(ThreadId actor, unsigned level);
    [[nodiscard]] unsigned system_criticality() const { return crit_level_; }

    // ---- queries ----
    [[nodiscard]] const KernelConfig& config() const { return cfg_; }
    [[nodiscard]] Tick now() const { return now_; }
    [[nodiscard]] Tick timer_deadline() const { return timer_deadline_; }
    [[nodiscard]] ThreadId current_thread() const { return current_thread_; }
    [[nodiscard]] Tick release_head_time() const;
    [[nodiscard]] bool has_runnable() const { return ready_bits_.any(); }

    [[nodiscard]] const Thread& thread(ThreadId t) const { return threads_[t.index]; }
    [[nodiscard]] Thread& thread(ThreadId t) { return threads_[t.index]; }
    [[nodiscard]] const SchedContext& sc(ScId s) const { return scs_[s.index]; }
    [[nodiscard]] SchedContext& sc(ScId s) { return scs_[s.index]; }
    [[nodiscard]] const Endpoint& endpoint(EpId e) const { return eps_[e.index]; }
    [[nodiscard]] const Notification& notification(NtfnId n) const { return ntfns_[n.index]; }
    [[nodiscard]] const ReplyCap& reply_cap(ReplyId r) const { return replies_[r.index]; }
    [[nodiscard]] std::size_t thread_count() const { return threads_.size(); }
    [[nodiscard]] std::size_t sc_count() const { return scs_.size(); }

    [[nodiscard]] unsigned effective_priority(ThreadId t) const;
    /// Remaining budget as of `at`, accounting for not-yet-committed
    /// execution of the current SC.
    [[nodiscard]] Tick effective_remaining(ScId s, Tick at) const;

    [[nodiscard]] std::map<std::string, std::uint64_t>& ledger() { return ledger_; }
    void count(const std::string& key, std::uint64_t n = 1) { ledger_[key] += n; }

    /// Serialized digest of all mutable state; used to prove failed
    /// operations leave the kernel untouched.
    [[nodiscard]] std::string state_fingerprint() const;
    /// Validates queue membership, occupancy bits, SC link integrity and
    /// the budget admission invariant. Throws std::logic_error on violation.
    void check_invariants() const;

    // Engine support: register callback invoked whenever a blocked thread
    // is woken (so the engine can mark its pending action complete).
    void set_wake_hook(std::function<void(ThreadId)> fn) { wake_hook_ = std::move(fn); }

private:
    friend class Engine;

    // scheduler internals
    void ready_enqueue(ThreadId t, bool at_head);
    void ready_remove(ThreadId t);
    void release_enqueue(ThreadId t);
    void release_remove(ThreadId t);
    void refill(ScId s, Tick at);
    void make_runnable(ThreadId t, bool at_head = false);
    void park_or_queue(ThreadId t, bool at_head);
    void deschedule_current();
    void expire_current(Tick now, FaultReason reason);
    void budget_expire(ThreadId t);
    void raise_timeout(ThreadId t, FaultReason reason);
    ThreadId pick_next();
    void dispatch(ThreadId t);
    void commit_charge();
    void program_timer();
    void request_resched() { resched_ = true; }
    void maybe_preempt(ThreadId woken);
    void recompute_effective(ThreadId t, unsigned old_eff);

    // IPC internals
    ReplyId new_reply_cap();
    void free_reply_cap(ReplyId r);
    void ep_enqueue(EpId ep, Endpoint::Dir dir, EpWaiter w);
    void complete_recv(ThreadId receiver, EpId ep, const EpWaiter& sender,
                       bool sender_is_call);
    void deliver_to_receiver(EpId ep, EpWaiter sender, bool is_call);
    void do_reply(ThreadId server, ReplyId cap, std::uint64_t badge, Err client_err);
    void do_signal(NtfnId n);
    void do_suspend(ThreadId t);
    unsigned apply_criticality(unsigned level);
    bool has_auth_sc(ThreadId actor, ScId sc) const;
    bool has_auth_tcb(ThreadId actor, ThreadId target) const;
    bool has_auth_ep(ThreadId actor, EpId ep) const;
    bool has_auth_ntfn(ThreadId actor, NtfnId n) const;

    void trace(Tick time, const char* category, const std::string& subject = {},
               const std::string& object = {}, const std::string& detail = {});
    [[nodiscard]] std::string tname(ThreadId t) const {
        return t.valid() ? threads_[t.index].name : std::string("-");
    }
    [[nodiscard]] std::string sname(ScId s) const {
        return s.valid() ? scs_[s.index].name : std::string("-");
    }

    KernelConfig cfg_;
    TraceLog* trace_ = nullptr;

    std::vector<Thread> threads_;
    std::vector<SchedContext> scs_;
    std::vector<Endpoint> eps_;
    std::vector<Notification> ntfns_;
    std::vector<ReplyCap> replies_;
    std::vector<std::uint32_t> free_replies_;

    // scheduler state
    Tick now_ = 0;                 // committed timestamp (charge base)
    Tick pending_consumed_ = 0;    // time since last commit, set at entry
    Tick entry_time_ = 0;          // absolute time of the current entry
    std::vector<std::deque<ThreadId>> ready_;  // indexed by effective priority
    PriorityBitmap ready_bits_;
    std::multimap<Tick, ThreadId> release_;    // keyed by next_refill, FIFO ties
    std::vector<std::vector<ThreadId>> crit_queues_;
    unsigned crit_level_ = 0;
    ThreadId current_thread_;
    ScId entry_sc_;                // SC on CPU at the last entry
    bool resched_ = false;
    bool in_entry_ = false;
    Tick timer_deadline_ = kNever;

    std::map<std::string, std::uint64_t> ledger_;
    std::function<std::optional<EpId>(ThreadId)> rollback_hook_;
    std::function<void(ThreadId)> wake_hook_;
};

}  // namespace mcsim
