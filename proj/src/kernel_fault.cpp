// Timeout faults: delivery to handler endpoints and the four recovery
// actions a handler can reply with.

#include "mcsim/kernel.hpp"

namespace mcsim {

void Kernel::raise_timeout(ThreadId t, FaultReason reason) {
    Thread& th = threads_[t.index];
    EpId hep = th.timeout_handler;
    TimeoutFault f;
    f.faulting_thread = t;
    f.sc_in_use = th.current_sc;
    f.sc_owner = th.current_sc.valid() ? scs_[th.current_sc.index].home_thread
                                       : ThreadId{};
    f.reason = reason;
    f.timestamp = in_entry_ ? entry_time_ : now_;

    ReplyId cap = new_reply_cap();
    ReplyCap& r = replies_[cap.index];
    r.is_fault = true;
    r.caller = t;
    r.fault = f;

    th.state = ThreadState::FaultBlocked;
    count("timeout-fault");
    trace(f.timestamp, "fault", tname(t), eps_[hep.index].name,
          reason == FaultReason::BudgetExpired ? "budget" : "crit-switch");

    Endpoint& e = eps_[hep.index];
    if (e.dir == Endpoint::Dir::Recv) {
        EpWaiter rw = e.queue.front();
        e.queue.pop_front();
        if (e.queue.empty()) e.dir = Endpoint::Dir::None;
        count("queue-op");
        ThreadId handler = rw.thread;
        Thread& ht = threads_[handler.index];
        ht.waiting_ep.reset();
        ht.pending_result = {Err::Ok, static_cast<std::uint64_t>(f.reason)};
        ht.reply_slot = cap;
        ht.state = ThreadState::Ready;
        make_runnable(handler);
        if (wake_hook_) wake_hook_(handler);
    } else {
        EpWaiter w{t, false, true, static_cast<std::uint64_t>(f.reason), cap};
        ep_enqueue(hep, Endpoint::Dir::Send, w);
    }
}

Err Kernel::fault_reply(ThreadId actor, const HandlerAction& action) {
    Thread& h = threads_[actor.index];
    if (!h.reply_slot.valid() || !replies_[h.reply_slot.index].alive)
        return Err::NoReplyCap;
    if (!replies_[h.reply_slot.index].is_fault) return Err::NoFault;
    ReplyCap cap = replies_[h.reply_slot.index];
    free_reply_cap(h.reply_slot);
    h.reply_slot.reset();

    ThreadId t = cap.caller;
    TimeoutFault f = cap.fault;
    Thread& th = threads_[t.index];
    count("fault-reply");

    switch (action.kind) {
    case HandlerAction::Kind::ExtendBudget: {
        ScId s = f.sc_in_use.valid() ? f.sc_in_use : th.current_sc;
        if (s.valid()) {
            SchedContext& c = scs_[s.index];
            c.remaining += action.amount;
            if (c.budget < c.remaining) c.budget = c.remaining;
            if (c.period < c.budget) c.period = c.budget;
            trace(entry_time_, "fault", tname(actor), sname(s),
                  "extend " + std::to_string(action.amount));
        }
        th.state = ThreadState::Ready;
        make_runnable(t);
        break;
    }
    case HandlerAction::Kind::RollbackAndReset: {
        std::optional<EpId> resume_ep;
        if (rollback_hook_) resume_ep = rollback_hook_(t);
        trace(entry_time_, "fault", tname(actor), tname(t), "rollback");
        if (th.reply_slot.valid() && replies_[th.reply_slot.index].alive) {
            // abort the request in progress: the client gets its SC back
            // along with an error
            ReplyId c2 = th.reply_slot;
            th.reply_slot.reset();
            do_reply(t, c2, 0, Err::Aborted);
        }
        if (resume_ep) {
            th.state = ThreadState::BlockedRecv;
            th.waiting_ep = *resume_ep;
            ep_enqueue(*resume_ep, Endpoint::Dir::Recv, EpWaiter{t, false, false, 0, {}});
        } else if (th.current_sc.valid()) {
            release_enqueue(t);
        } else {
            th.state = ThreadState::Ready;  // parked
        }
        break;
    }
    case HandlerAction::Kind::SuspendOwner: {
        ThreadId target = f.sc_owner.valid() ? f.sc_owner : t;
        trace(entry_time_, "fault", tname(actor), tname(target), "suspend");
        if (t != target) {
            th.state = ThreadState::Ready;
            make_runnable(t);
        }
        do_suspend(target);
        break;
    }
    case HandlerAction::Kind::RaiseSystemCriticality: {
        if (action.level >= cfg_.criticality_levels) return Err::BadLevel;
        apply_criticality(action.level);
        if (th.current_sc.valid())
            release_enqueue(t);
        else
            th.state = ThreadState::Ready;  // parked
        break;
    }
    }
    return Err::Ok;
}

}  // namespace mcsim
