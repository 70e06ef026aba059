#include "mcsim/engine.hpp"

#include <algorithm>
#include <stdexcept>

namespace mcsim {

Engine::Engine(KernelConfig cfg) : k_(cfg, &trace_) {
    k_.set_wake_hook([this](ThreadId t) {
        if (t.index >= exec_.size()) exec_.resize(t.index + 1);
        exec_[t.index].awaiting = false;
        exec_[t.index].last = k_.thread(t).pending_result;
    });
    k_.set_rollback_hook([this](ThreadId t) -> std::optional<EpId> {
        if (t.index >= exec_.size()) exec_.resize(t.index + 1);
        Exec& e = exec_[t.index];
        e.work_left = 0;
        e.job = false;
        e.awaiting = false;
        Behavior* b = behavior(t);
        return b ? b->rollback() : std::nullopt;
    });
}

void Engine::set_behavior(ThreadId t, std::unique_ptr<Behavior> b) {
    if (t.index >= behaviors_.size()) behaviors_.resize(t.index + 1);
    behaviors_[t.index] = std::move(b);
}

Behavior* Engine::behavior(ThreadId t) {
    return t.index < behaviors_.size() ? behaviors_[t.index].get() : nullptr;
}

void Engine::add_external_signal(Tick at, NtfnId n) {
    pending_signals_.emplace(at, n);
}

Action Engine::fetch(Tick t, ThreadId actor) {
    Behavior* b = behavior(actor);
    if (!b) return Action::halt();
    BehaviorContext ctx{*this, k_, actor, t};
    return b->next(ctx, exec_[actor.index].last);
}

SyscallOutcome Engine::apply(Tick t, ThreadId actor, const Action& a) {
    Exec& e = exec_[actor.index];
    using K = Action::Kind;
    Err r = Err::Ok;
    std::uint64_t val = 0;
    bool uses_pending = false;
    switch (a.kind) {
    case K::Compute:
        e.work_left = a.amount;
        e.job = a.job;
        if (a.amount == 0 && a.job) {
            jobs_.push_back({actor, t});
            trace_.add(t, "job", k_.thread(actor).name, {}, "done");
            e.job = false;
        }
        return e.last;
    case K::Call:
        r = k_.call(actor, a.ep, a.donate, a.badge);
        uses_pending = true;
        break;
    case K::Reply:
        r = k_.reply(actor, a.badge);
        break;
    case K::ReplyRecv:
        r = k_.reply_recv(actor, a.ep, a.badge);
        uses_pending = true;
        break;
    case K::Recv:
        r = k_.recv(actor, a.ep);
        uses_pending = true;
        break;
    case K::Send:
        r = k_.send(actor, a.ep, a.badge);
        break;
    case K::NbSendWait:
        r = k_.nbsend_wait(actor, a.ep, a.badge, a.ep2);
        uses_pending = true;
        break;
    case K::Signal:
        r = k_.signal(actor, a.ntfn);
        break;
    case K::Wait:
        r = k_.wait(actor, a.ntfn);
        uses_pending = true;
        break;
    case K::SignalRecv:
        r = k_.signal_recv(actor, a.ntfn, a.ep);
        uses_pending = true;
        break;
    case K::Yield:
        r = k_.yield(actor, a.sc);
        break;
    case K::YieldTo: {
        auto res = k_.yield_to(actor, a.sc);
        r = res.err;
        val = res.value;
        break;
    }
    case K::Consume: {
        auto res = k_.consume(actor, a.sc);
        r = res.err;
        val = res.value;
        break;
    }
    case K::ScConfigure:
        r = k_.sc_configure(actor, a.sc, a.amount, a.period, a.data);
        break;
    case K::SaveCaller:
        r = k_.save_caller(actor, a.target.valid() ? a.target : actor, a.slot);
        break;
    case K::SetCaller:
        r = k_.set_caller(actor, a.slot);
        break;
    case K::SwapCaller:
        r = k_.swap_caller(actor, a.slot, a.slot2);
        break;
    case K::FaultReply:
        r = k_.fault_reply(actor, a.handler);
        break;
    case K::SetSystemCriticality: {
        auto res = k_.set_system_criticality(actor, a.level);
        r = res.err;
        val = res.value;
        break;
    }
    case K::SetPriority:
        r = k_.set_priority(actor, a.target, a.level);
        break;
    case K::SetCriticality:
        r = k_.set_thread_criticality(actor, a.target, a.level);
        break;
    case K::BindSc:
        r = k_.bind_sc(actor, a.sc, a.target);
        break;
    case K::UnbindSc:
        r = k_.unbind_sc(actor, a.sc);
        break;
    case K::StartThread:
        r = k_.start_thread(actor, a.target);
        break;
    case K::SuspendThread:
        r = k_.suspend_thread(actor, a.target);
        break;
    case K::ProgramTimer: {
        Tick at = a.absolute ? a.amount : t + a.amount;
        pending_signals_.emplace(at, a.ntfn);
        val = at;
        break;
    }
    case K::Halt:
        e.halted = true;
        k_.do_suspend(actor);
        break;
    }

    const Thread& th = k_.thread(actor);
    bool blocked = r == Err::Ok && (th.state == ThreadState::BlockedSend ||
                                    th.state == ThreadState::BlockedRecv ||
                                    th.state == ThreadState::BlockedOnReply ||
                                    th.state == ThreadState::WaitingNtfn ||
                                    th.state == ThreadState::FaultBlocked);
    if (blocked) {
        e.awaiting = true;
        return e.last;  // the real outcome arrives when it wakes
    }
    if (r == Err::Ok && uses_pending) return th.pending_result;
    return {r, val};
}

void Engine::kernel_step(Tick t, ThreadId actor) {
    k_.on_entry(t);
    // the entry's budget check may have bounced the thread to the release
    // queue, in which case its next action stays unfetched until it wakes
    if (k_.current_thread() == actor) {
        Action a = fetch(t, actor);
        SyscallOutcome out = apply(t, actor, a);
        Exec& e = exec_[actor.index];
        if (!e.awaiting) e.last = out;
    }
    k_.on_exit();
}

void Engine::settle(Tick t) {
    std::size_t guard = 0;
    while (true) {
        ThreadId cur = k_.current_thread();
        if (!cur.valid()) break;
        Exec& e = exec_[cur.index];
        if (e.halted || e.work_left > 0) break;
        if (++guard > 1000000)
            throw std::runtime_error("livelock: unbounded zero-cost actions at t=" +
                                     std::to_string(t));
        kernel_step(t, cur);
    }
}

void Engine::timer_event(Tick t) {
    k_.on_entry(t);
    k_.release_wakeup(t);
    k_.on_exit();
}

void Engine::fire_signal(Tick t, NtfnId n) {
    trace_.add(t, "ext-signal", k_.notification(n).name);
    k_.on_entry(t);
    k_.signal_external(n);
    k_.on_exit();
}

void Engine::bootstrap() {
    // Threads that start runnable but without an SC get their zero-cost
    // prologue (typically ending in a receive) executed here, standing in
    // for the init-time SC they would briefly hold on real hardware.
    k_.on_entry(now_);
    for (std::uint32_t i = 0; i < k_.thread_count(); ++i) {
        ThreadId t{i};
        if (!behavior(t)) continue;
        std::size_t guard = 0;
        while (k_.thread(t).state == ThreadState::Ready &&
               !k_.thread(t).current_sc.valid() && !exec_[i].halted) {
            Action a = fetch(now_, t);
            SyscallOutcome out = apply(now_, t, a);
            if (a.kind == Action::Kind::Compute)
                break;  // work is queued; it starts once an SC arrives
            if (!exec_[i].awaiting) exec_[i].last = out;
            if (++guard > 10000) throw std::runtime_error("bootstrap livelock");
        }
    }
    k_.on_exit();
}

void Engine::note_span(ThreadId t, Tick begin, Tick end) {
    if (!record_spans_ || begin == end) return;
    if (!spans_.empty() && spans_.back().thread == t && spans_.back().end == begin)
        spans_.back().end = end;
    else
        spans_.push_back({t, begin, end});
}

void Engine::run(Tick horizon) {
    if (exec_.size() < k_.thread_count()) exec_.resize(k_.thread_count());
    if (behaviors_.size() < k_.thread_count()) behaviors_.resize(k_.thread_count());
    if (!bootstrapped_) {
        bootstrap();
        bootstrapped_ = true;
    }
    while (now_ < horizon) {
        if (k_.timer_deadline() <= now_) {
            timer_event(now_);
            continue;
        }
        settle(now_);
        if (k_.timer_deadline() <= now_) continue;
        // external signals land after same-instant zero-cost actions: a
        // job finishing exactly when the timer fires counts as finished
        if (!pending_signals_.empty() && pending_signals_.begin()->first <= now_) {
            auto it = pending_signals_.begin();
            NtfnId n = it->second;
            pending_signals_.erase(it);
            fire_signal(now_, n);
            continue;
        }

        ThreadId cur = k_.current_thread();
        bool computing =
            cur.valid() && exec_[cur.index].work_left > 0 && !exec_[cur.index].halted;
        Tick next = horizon;
        if (computing) next = std::min(next, now_ + exec_[cur.index].work_left);
        next = std::min(next, k_.timer_deadline());
        if (!pending_signals_.empty())
            next = std::min(next, pending_signals_.begin()->first);
        if (next <= now_) continue;

        if (computing) {
            note_span(cur, now_, next);
            k_.thread(cur).cpu_time += next - now_;
            Exec& e = exec_[cur.index];
            e.work_left -= next - now_;
            now_ = next;
            if (e.work_left == 0 && e.job) {
                jobs_.push_back({cur, now_});
                trace_.add(now_, "job", k_.thread(cur).name, {}, "done");
                e.job = false;
            }
        } else {
            idle_ += next - now_;
            now_ = next;
        }
    }
    // settle accounting at the horizon so charges for the final stretch
    // are committed (a real system would hit a kernel entry eventually)
    k_.on_entry(now_);
    k_.commit_charge();
    k_.on_exit();
}

}  // namespace mcsim
