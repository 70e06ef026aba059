// IPC: endpoints with priority-ordered rendezvous, reply capabilities,
// scheduling-context donation over call/reply, and notifications.

#include <algorithm>

#include "mcsim/kernel.hpp"

namespace mcsim {

ReplyId Kernel::new_reply_cap() {
    if (!free_replies_.empty()) {
        std::uint32_t i = free_replies_.back();
        free_replies_.pop_back();
        replies_[i] = ReplyCap{};
        replies_[i].alive = true;
        return ReplyId{i};
    }
    replies_.push_back(ReplyCap{});
    replies_.back().alive = true;
    return ReplyId{static_cast<std::uint32_t>(replies_.size() - 1)};
}

void Kernel::free_reply_cap(ReplyId r) {
    replies_[r.index].alive = false;
    free_replies_.push_back(r.index);
}

void Kernel::ep_enqueue(EpId ep, Endpoint::Dir dir, EpWaiter w) {
    Endpoint& e = eps_[ep.index];
    e.dir = dir;
    unsigned p = effective_priority(w.thread);
    auto it = e.queue.begin();
    while (it != e.queue.end() && effective_priority(it->thread) >= p) ++it;
    e.queue.insert(it, std::move(w));
    count("queue-op");
}

// A queued sender rendezvouses with `receiver`, who is executing recv.
void Kernel::complete_recv(ThreadId receiver, EpId ep, const EpWaiter& sender,
                           bool sender_is_call) {
    (void)ep;
    Thread& rt = threads_[receiver.index];
    Thread& st = threads_[sender.thread.index];
    rt.pending_result = {Err::Ok, sender.badge};
    trace(in_entry_ ? entry_time_ : now_, "ipc", tname(sender.thread),
          tname(receiver), "deliver " + std::to_string(sender.badge));
    if (sender.premint.valid()) {
        // parked timeout fault: hand the preminted fault cap to the handler
        rt.reply_slot = sender.premint;
        return;
    }
    if (sender_is_call) {
        ReplyId cap = new_reply_cap();
        ReplyCap& r = replies_[cap.index];
        r.caller = sender.thread;
        st.state = ThreadState::BlockedOnReply;
        if (sender.willing_to_donate && st.current_sc.valid() &&
            !rt.current_sc.valid()) {
            ScId s = st.current_sc;
            r.donated_sc = s;
            st.current_sc.reset();
            rt.current_sc = s;
            scs_[s.index].running_thread = receiver;
            st.call_next = receiver;
            rt.call_prev = sender.thread;
            trace(now_, "ipc", tname(sender.thread), tname(receiver),
                  "donate " + sname(s));
        }
        rt.reply_slot = cap;
    } else {
        st.state = ThreadState::Ready;
        st.waiting_ep.reset();
        make_runnable(sender.thread);
        if (wake_hook_) wake_hook_(sender.thread);
    }
}

// A sender (call or send by the current thread) meets a queued receiver.
void Kernel::deliver_to_receiver(EpId ep, EpWaiter sender, bool is_call) {
    Endpoint& e = eps_[ep.index];
    EpWaiter rw = e.queue.front();
    e.queue.pop_front();
    if (e.queue.empty()) e.dir = Endpoint::Dir::None;
    count("queue-op");
    ThreadId receiver = rw.thread;
    Thread& rt = threads_[receiver.index];
    Thread& st = threads_[sender.thread.index];
    rt.waiting_ep.reset();
    rt.pending_result = {Err::Ok, sender.badge};
    trace(entry_time_, "ipc", tname(sender.thread), tname(receiver),
          "deliver " + std::to_string(sender.badge));
    if (is_call) {
        ReplyId cap = new_reply_cap();
        ReplyCap& r = replies_[cap.index];
        r.caller = sender.thread;
        rt.reply_slot = cap;
        st.state = ThreadState::BlockedOnReply;
        if (!rt.home_sc.valid() && !rt.current_sc.valid()) {
            // passive server: runs on the caller's SC until the reply
            deschedule_current();
            ScId s = st.current_sc;
            r.donated_sc = s;
            st.current_sc.reset();
            rt.current_sc = s;
            scs_[s.index].running_thread = receiver;
            st.call_next = receiver;
            rt.call_prev = sender.thread;
            trace(now_, "ipc", tname(sender.thread), tname(receiver),
                  "donate " + sname(s));
            rt.state = ThreadState::Ready;
            dispatch(receiver);  // direct switch, same SC
        } else {
            deschedule_current();
            rt.state = ThreadState::Ready;
            make_runnable(receiver);
        }
    } else {
        rt.state = ThreadState::Ready;
        make_runnable(receiver);
    }
    if (wake_hook_) wake_hook_(receiver);
}

Err Kernel::call(ThreadId actor, EpId ep, bool willing_to_donate,
                 std::uint64_t badge) {
    if (!has_auth_ep(actor, ep)) return Err::NoAuthority;
    Endpoint& e = eps_[ep.index];
    EpWaiter w{actor, willing_to_donate, true, badge, {}};
    trace(entry_time_, "ipc", tname(actor), e.name, "call");
    if (e.dir == Endpoint::Dir::Recv) {
        const Thread& rt = threads_[e.queue.front().thread.index];
        if (!rt.home_sc.valid() && !rt.current_sc.valid() && !willing_to_donate)
            return Err::DonationRefused;
        deliver_to_receiver(ep, w, /*is_call=*/true);
        return Err::Ok;
    }
    Thread& th = threads_[actor.index];
    th.state = ThreadState::BlockedSend;
    th.waiting_ep = ep;
    ep_enqueue(ep, Endpoint::Dir::Send, w);
    deschedule_current();
    return Err::Ok;
}

Err Kernel::send(ThreadId actor, EpId ep, std::uint64_t badge) {
    if (!has_auth_ep(actor, ep)) return Err::NoAuthority;
    Endpoint& e = eps_[ep.index];
    trace(entry_time_, "ipc", tname(actor), e.name, "send");
    if (e.dir == Endpoint::Dir::Recv) {
        deliver_to_receiver(ep, EpWaiter{actor, false, false, badge, {}}, false);
        return Err::Ok;
    }
    Thread& th = threads_[actor.index];
    th.state = ThreadState::BlockedSend;
    th.waiting_ep = ep;
    ep_enqueue(ep, Endpoint::Dir::Send, EpWaiter{actor, false, false, badge, {}});
    deschedule_current();
    return Err::Ok;
}

Err Kernel::recv(ThreadId actor, EpId ep) {
    if (!has_auth_ep(actor, ep)) return Err::NoAuthority;
    Thread& th = threads_[actor.index];
    // a pending signal on a bound notification beats the endpoint
    for (std::size_t i = 0; i < ntfns_.size(); ++i) {
        Notification& n = ntfns_[i];
        if (n.bound_thread == actor && n.word) {
            n.word = false;
            th.pending_result = {Err::Ok, n.badge};
            trace(entry_time_, "ntfn", n.name, tname(actor), "deliver-bound");
            return Err::Ok;
        }
    }
    Endpoint& e = eps_[ep.index];
    if (e.dir == Endpoint::Dir::Send) {
        EpWaiter sw = e.queue.front();
        e.queue.pop_front();
        if (e.queue.empty()) e.dir = Endpoint::Dir::None;
        count("queue-op");
        complete_recv(actor, ep, sw, sw.is_call);
        return Err::Ok;
    }
    th.state = ThreadState::BlockedRecv;
    th.waiting_ep = ep;
    ep_enqueue(ep, Endpoint::Dir::Recv, EpWaiter{actor, false, false, 0, {}});
    deschedule_current();
    trace(now_, "ipc", tname(actor), e.name, "recv-block");
    return Err::Ok;
}

void Kernel::do_reply(ThreadId server, ReplyId cap, std::uint64_t badge,
                      Err client_err) {
    ReplyCap r = replies_[cap.index];
    free_reply_cap(cap);
    Thread& st = threads_[server.index];
    ThreadId caller = r.caller;
    Thread& ct = threads_[caller.index];
    ct.pending_result = {client_err, badge};
    if (r.donated_sc.valid()) {
        ScId s = r.donated_sc;
        if (st.current_sc == s) st.current_sc.reset();
        ct.current_sc = s;
        scs_[s.index].running_thread = caller;
        trace(entry_time_, "ipc", tname(server), tname(caller),
              "return " + sname(s));
        if (current_thread_ == server) deschedule_current();
    } else if (!ct.current_sc.valid() && st.current_sc.valid() &&
               st.current_sc != st.home_sc) {
        // neither side owns the SC the server is running on (it arrived
        // through an earlier donation that was already consumed): pass it
        // on to the SC-less caller so the reply does not strand them
        ScId s = st.current_sc;
        st.current_sc.reset();
        ct.current_sc = s;
        scs_[s.index].running_thread = caller;
        trace(entry_time_, "ipc", tname(server), tname(caller),
              "forward " + sname(s));
        if (current_thread_ == server) deschedule_current();
    }
    if (st.call_prev == caller) st.call_prev.reset();
    if (ct.call_next == server) ct.call_next.reset();
    if (ct.state == ThreadState::BlockedOnReply) {
        ct.state = ThreadState::Ready;
        make_runnable(caller);
    }
    trace(now_, "ipc", tname(server), tname(caller), "reply");
    if (wake_hook_) wake_hook_(caller);
}

Err Kernel::reply(ThreadId actor, std::uint64_t badge) {
    Thread& th = threads_[actor.index];
    if (!th.reply_slot.valid() || !replies_[th.reply_slot.index].alive)
        return Err::NoReplyCap;
    ReplyId cap = th.reply_slot;
    th.reply_slot.reset();
    do_reply(actor, cap, badge, Err::Ok);
    if (th.state == ThreadState::Running && current_thread_ != actor) {
        // the reply handed the borrowed SC away
        th.state = ThreadState::Ready;  // parked; a new donation revives it
    }
    return Err::Ok;
}

Err Kernel::reply_recv(ThreadId actor, EpId ep, std::uint64_t reply_badge) {
    Thread& th = threads_[actor.index];
    if (th.reply_slot.valid() && replies_[th.reply_slot.index].alive) {
        ReplyId cap = th.reply_slot;
        th.reply_slot.reset();
        do_reply(actor, cap, reply_badge, Err::Ok);
    }
    Err r = recv(actor, ep);
    if (r == Err::Ok && th.state == ThreadState::Running &&
        current_thread_ != actor) {
        // the reply gave the borrowed SC away and the receive completed
        // immediately; resume on whatever the next caller donated
        if (th.current_sc.valid())
            dispatch(actor);
        else
            th.state = ThreadState::Ready;  // parked without an SC
    }
    return r;
}

Err Kernel::nbsend_wait(ThreadId actor, EpId ep_send, std::uint64_t badge,
                        EpId ep_recv) {
    if (!has_auth_ep(actor, ep_send)) return Err::NoAuthority;
    Endpoint& e = eps_[ep_send.index];
    if (e.dir == Endpoint::Dir::Recv) {
        deliver_to_receiver(ep_send, EpWaiter{actor, false, false, badge, {}}, false);
    }
    // non-blocking: a send with no receiver is dropped
    return recv(actor, ep_recv);
}

void Kernel::do_signal(NtfnId nid) {
    Notification& n = ntfns_[nid.index];
    if (n.waiter.valid()) {
        ThreadId t = n.waiter;
        n.waiter.reset();
        Thread& th = threads_[t.index];
        th.waiting_ntfn.reset();
        th.pending_result = {Err::Ok, n.badge};
        th.state = ThreadState::Ready;
        trace(entry_time_, "ntfn", n.name, tname(t), "deliver");
        make_runnable(t);
        if (wake_hook_) wake_hook_(t);
        return;
    }
    if (n.bound_thread.valid()) {
        Thread& bt = threads_[n.bound_thread.index];
        if (bt.state == ThreadState::BlockedRecv) {
            Endpoint& e = eps_[bt.waiting_ep.index];
            auto it = std::find_if(e.queue.begin(), e.queue.end(),
                                   [&](const EpWaiter& w) {
                                       return w.thread == n.bound_thread;
                                   });
            if (it != e.queue.end()) e.queue.erase(it);
            if (e.queue.empty()) e.dir = Endpoint::Dir::None;
            bt.waiting_ep.reset();
            bt.pending_result = {Err::Ok, n.badge};
            bt.state = ThreadState::Ready;
            trace(entry_time_, "ntfn", n.name, tname(n.bound_thread),
                  "deliver-bound");
            make_runnable(n.bound_thread);
            if (wake_hook_) wake_hook_(n.bound_thread);
            return;
        }
    }
    n.word = true;
    trace(entry_time_, "ntfn", n.name, {}, "pend");
}

Err Kernel::signal(ThreadId actor, NtfnId n) {
    if (!has_auth_ntfn(actor, n)) return Err::NoAuthority;
    do_signal(n);
    return Err::Ok;
}

void Kernel::signal_external(NtfnId n) { do_signal(n); }

Err Kernel::wait(ThreadId actor, NtfnId nid) {
    if (!has_auth_ntfn(actor, nid)) return Err::NoAuthority;
    Notification& n = ntfns_[nid.index];
    Thread& th = threads_[actor.index];
    if (n.word) {
        n.word = false;
        th.pending_result = {Err::Ok, n.badge};
        return Err::Ok;
    }
    if (n.waiter.valid()) return Err::BadParams;  // binary semaphore, one waiter
    n.waiter = actor;
    th.state = ThreadState::WaitingNtfn;
    th.waiting_ntfn = nid;
    deschedule_current();
    trace(now_, "ntfn", tname(actor), n.name, "wait-block");
    return Err::Ok;
}

Err Kernel::signal_recv(ThreadId actor, NtfnId n, EpId ep) {
    if (!has_auth_ntfn(actor, n)) return Err::NoAuthority;
    do_signal(n);
    return recv(actor, ep);
}

Err Kernel::save_caller(ThreadId actor, ThreadId target, const std::string& slot) {
    if (actor != target && !has_auth_tcb(actor, target)) return Err::NoAuthority;
    Thread& tt = threads_[target.index];
    if (!tt.reply_slot.valid() || !replies_[tt.reply_slot.index].alive)
        return Err::EmptySlot;
    ReplyCap& r = replies_[tt.reply_slot.index];
    if (r.caller.valid()) {
        // parking the cap suspends the transaction: cut the live call
        // chain so a later donor can take its place
        Thread& ct = threads_[r.caller.index];
        if (ct.call_next == target) ct.call_next.reset();
        if (tt.call_prev == r.caller) tt.call_prev.reset();
    }
    threads_[actor.index].saved_caps[slot] = tt.reply_slot;
    tt.reply_slot.reset();
    return Err::Ok;
}

Err Kernel::set_caller(ThreadId actor, const std::string& slot) {
    Thread& th = threads_[actor.index];
    auto it = th.saved_caps.find(slot);
    if (it == th.saved_caps.end()) return Err::EmptySlot;
    if (th.reply_slot.valid() && replies_[th.reply_slot.index].alive)
        return Err::BadParams;
    th.reply_slot = it->second;
    th.saved_caps.erase(it);
    return Err::Ok;
}

Err Kernel::swap_caller(ThreadId actor, const std::string& a, const std::string& b) {
    Thread& th = threads_[actor.index];
    if (b.empty()) {
        // swap the live reply slot with a saved one
        auto it = th.saved_caps.find(a);
        ReplyId saved = it != th.saved_caps.end() ? it->second : ReplyId{};
        if (it != th.saved_caps.end()) th.saved_caps.erase(it);
        if (th.reply_slot.valid()) th.saved_caps[a] = th.reply_slot;
        th.reply_slot = saved;
        return Err::Ok;
    }
    auto ia = th.saved_caps.find(a);
    auto ib = th.saved_caps.find(b);
    ReplyId ra = ia != th.saved_caps.end() ? ia->second : ReplyId{};
    ReplyId rb = ib != th.saved_caps.end() ? ib->second : ReplyId{};
    if (ia != th.saved_caps.end()) th.saved_caps.erase(a);
    if (ib != th.saved_caps.end()) th.saved_caps.erase(b);
    if (rb.valid()) th.saved_caps[a] = rb;
    if (ra.valid()) th.saved_caps[b] = ra;
    return Err::Ok;
}

}  // namespace mcsim
