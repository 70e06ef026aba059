// Scheduler: ready/release queues, lazy charging, budget enforcement and
// the sporadic replenishment rule.

#include <algorithm>

#include "mcsim/kernel.hpp"

namespace mcsim {

void Kernel::ready_enqueue(ThreadId t, bool at_head) {
    unsigned p = effective_priority(t);
    if (at_head)
        ready_[p].push_front(t);
    else
        ready_[p].push_back(t);
    ready_bits_.set(p);
    count("queue-op");
}

void Kernel::ready_remove(ThreadId t) {
    unsigned p = effective_priority(t);
    auto& q = ready_[p];
    auto it = std::find(q.begin(), q.end(), t);
    if (it == q.end()) return;
    q.erase(it);
    if (q.empty()) ready_bits_.clear(p);
    count("queue-op");
}

void Kernel::release_enqueue(ThreadId t) {
    Thread& th = threads_[t.index];
    const SchedContext& c = scs_[th.current_sc.index];
    th.state = ThreadState::OutOfBudget;
    release_.emplace(c.next_refill, t);
    count("queue-op");
}

void Kernel::release_remove(ThreadId t) {
    for (auto it = release_.begin(); it != release_.end(); ++it) {
        if (it->second == t) {
            release_.erase(it);
            count("queue-op");
            return;
        }
    }
}

Tick Kernel::release_head_time() const {
    return release_.empty() ? kNever : release_.begin()->first;
}

void Kernel::refill(ScId s, Tick at) {
    SchedContext& c = scs_[s.index];
    c.remaining = c.budget;
    c.next_refill = at + c.period;
    count("refill");
    trace(at, "budget", sname(s), {}, "refill");
}

void Kernel::make_runnable(ThreadId t, bool at_head) {
    Thread& th = threads_[t.index];
    ScId s = th.current_sc;
    if (!s.valid()) return;  // parked until an SC shows up
    Tick abs_now = in_entry_ ? entry_time_ : now_;
    SchedContext& c = scs_[s.index];
    // A wake past the scheduled replenishment restarts the period here;
    // full grants stay at least one period apart either way.
    if (c.next_refill <= abs_now) refill(s, abs_now);
    if (c.remaining < cfg_.kernel_wcet) {
        release_enqueue(t);
        return;
    }
    ready_enqueue(t, at_head);
    maybe_preempt(t);
}

void Kernel::maybe_preempt(ThreadId woken) {
    if (!current_thread_.valid() ||
        effective_priority(woken) > effective_priority(current_thread_)) {
        request_resched();
    }
}

ThreadId Kernel::pick_next() {
    if (!ready_bits_.any()) return {};
    unsigned p = ready_bits_.highest();
    ThreadId t = ready_[p].front();
    ready_[p].pop_front();
    if (ready_[p].empty()) ready_bits_.clear(p);
    count("queue-op");
    return t;
}

void Kernel::commit_charge() {
    if (pending_consumed_ > 0 && entry_sc_.valid()) {
        SchedContext& c = scs_[entry_sc_.index];
        Tick d = std::min(pending_consumed_, c.remaining);
        c.remaining -= d;
        c.consumed += d;
        c.total_charged += d;
        count("charge-commit");
    }
    now_ = entry_time_;
    pending_consumed_ = 0;
}

void Kernel::dispatch(ThreadId t) {
    commit_charge();
    if (!t.valid()) {
        current_thread_.reset();
        entry_sc_.reset();
        trace(now_, "sched", "-", {}, "idle");
        return;
    }
    Thread& th = threads_[t.index];
    th.state = ThreadState::Running;
    current_thread_ = t;
    entry_sc_ = th.current_sc;
    scs_[entry_sc_.index].running_thread = t;
    count("context-switch");
    trace(now_, "sched", tname(t), sname(entry_sc_), "dispatch");
}

void Kernel::deschedule_current() {
    commit_charge();
    current_thread_.reset();
    entry_sc_.reset();
    request_resched();
}

void Kernel::program_timer() {
    Tick dl = release_head_time();
    if (current_thread_.valid() && entry_sc_.valid()) {
        // now_ is the committed charge base, so remaining is still intact
        // relative to it even when the last exit rolled the timestamp back.
        dl = std::min(dl, now_ + scs_[entry_sc_.index].remaining);
    }
    if (dl != timer_deadline_) {
        timer_deadline_ = dl;
        count("timer-reprogram");
    }
}

void Kernel::on_entry(Tick now) {
    in_entry_ = true;
    entry_time_ = now;
    count("kernel-entry");
    if (current_thread_.valid() && entry_sc_.valid()) {
        pending_consumed_ = now - now_;
        const SchedContext& c = scs_[entry_sc_.index];
        // Not enough budget left to pay for one more kernel op: take the
        // expiry path as if the budget timer had fired.
        if (c.remaining < pending_consumed_ + cfg_.kernel_wcet) {
            expire_current(now, FaultReason::BudgetExpired);
        }
    } else {
        now_ = now;
        pending_consumed_ = 0;
    }
}

void Kernel::expire_current(Tick now, FaultReason reason) {
    (void)now;  // the charge below uses the timestamp set at entry
    ThreadId t = current_thread_;
    ScId s = entry_sc_;
    commit_charge();
    SchedContext& c = scs_[s.index];
    if (c.remaining > 0) {
        ledger_["budget-forfeit"] += c.remaining;
        c.remaining = 0;
    }
    count("budget-expiry");
    trace(now_, "budget", tname(t), sname(s), "expired");
    current_thread_.reset();
    entry_sc_.reset();
    request_resched();
    budget_expire(t);
    (void)reason;
}

void Kernel::budget_expire(ThreadId t) {
    Thread& th = threads_[t.index];
    if (th.timeout_handler.valid()) {
        raise_timeout(t, FaultReason::BudgetExpired);
        return;
    }
    release_enqueue(t);
}

void Kernel::release_wakeup(Tick now) {
    while (!release_.empty() && release_.begin()->first <= now) {
        auto [key, t] = *release_.begin();
        release_.erase(release_.begin());
        Thread& th = threads_[t.index];
        if (th.current_sc.valid()) refill(th.current_sc, key);
        th.state = ThreadState::Ready;
        trace(key, "sched", tname(t), sname(th.current_sc), "wake");
        make_runnable(t);
    }
}

void Kernel::on_exit() {
    if (resched_) {
        ThreadId cur = current_thread_;
        bool keep = false;
        if (cur.valid() && threads_[cur.index].state == ThreadState::Running) {
            if (!ready_bits_.any() ||
                effective_priority(cur) >= ready_bits_.highest()) {
                keep = true;
            } else {
                commit_charge();
                threads_[cur.index].state = ThreadState::Ready;
                ready_enqueue(cur, /*at_head=*/true);
                current_thread_.reset();
                entry_sc_.reset();
            }
        }
        if (!keep && !current_thread_.valid()) dispatch(pick_next());
        resched_ = false;
    }
    if (pending_consumed_ > 0) {
        // same SC keeps the CPU: leave the span uncharged, the timestamp
        // stays at the committed base and the next entry picks it back up
        count("charge-rollback");
        pending_consumed_ = 0;
    }
    program_timer();
    in_entry_ = false;
    if (cfg_.check_invariants) check_invariants();
}

Err Kernel::yield(ThreadId actor, ScId s) {
    Thread& th = threads_[actor.index];
    if (!s.valid()) s = th.current_sc;
    if (s != th.current_sc) return Err::BadParams;
    commit_charge();
    SchedContext& c = scs_[s.index];
    ledger_["yield-forfeit"] += c.remaining;
    c.remaining = 0;
    count("yield");
    trace(now_, "sched", tname(actor), sname(s), "yield");
    current_thread_.reset();
    entry_sc_.reset();
    request_resched();
    release_enqueue(actor);
    return Err::Ok;
}

Result<Tick> Kernel::yield_to(ThreadId actor, ScId s) {
    Thread& a = threads_[actor.index];
    if (!(a.all_authority || a.has_sched_control || has_auth_sc(actor, s)))
        return Result<Tick>::failure(Err::NoAuthority);
    if (s == entry_sc_) commit_charge();
    SchedContext& c = scs_[s.index];
    Tick r = c.consumed;
    c.consumed = 0;
    c.yield_from = actor;
    ThreadId tgt = c.running_thread;
    if (tgt.valid() && tgt != actor &&
        threads_[tgt.index].state == ThreadState::Ready &&
        threads_[tgt.index].current_sc == s) {
        ready_remove(tgt);
        ready_enqueue(tgt, /*at_head=*/true);
        maybe_preempt(tgt);
    }
    trace(now_, "sched", tname(actor), sname(s), "yield_to");
    return Result<Tick>::success(r);
}

Result<Tick> Kernel::consume(ThreadId actor, ScId s) {
    const Thread& a = threads_[actor.index];
    if (!(a.all_authority || a.has_sched_control || has_auth_sc(actor, s)))
        return Result<Tick>::failure(Err::NoAuthority);
    if (s == entry_sc_) commit_charge();
    SchedContext& c = scs_[s.index];
    Tick r = c.consumed;
    c.consumed = 0;
    return Result<Tick>::success(r);
}

Err Kernel::sc_configure(ThreadId actor, ScId s, Tick budget, Tick period,
                         std::uint64_t data) {
    const Thread& a = threads_[actor.index];
    if (!(a.all_authority || a.has_sched_control)) return Err::NoAuthority;
    if (period == 0 || budget > period) return Err::BadParams;
    if (s == entry_sc_) commit_charge();
    SchedContext& c = scs_[s.index];
    c.budget = budget;
    c.period = period;
    c.data = data;
    if (c.remaining > budget) c.remaining = budget;
    trace(now_, "budget", tname(actor), sname(s),
          "configure b=" + std::to_string(budget) + " t=" + std::to_string(period));
    request_resched();
    return Err::Ok;
}

}  // namespace mcsim
