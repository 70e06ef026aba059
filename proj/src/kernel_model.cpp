// Object tables, authority checks and the TCB/SC model operations.

#include <algorithm>
#include <bit>
#include <sstream>
#include <stdexcept>

#include "mcsim/kernel.hpp"

namespace mcsim {

unsigned PriorityBitmap::highest() const {
    unsigned word = 63u - static_cast<unsigned>(std::countl_zero(top_));
    unsigned bit = 63u - static_cast<unsigned>(std::countl_zero(words_[word]));
    return (word << 6) | bit;
}

Kernel::Kernel(KernelConfig cfg, TraceLog* trace) : cfg_(cfg), trace_(trace) {
    if (cfg_.priority_bits == 0 || cfg_.criticality_levels == 0 ||
        cfg_.effective_levels() > 1024) {
        throw std::invalid_argument(
            "invalid kernel config: need Ncrit * 2^Np <= 1024");
    }
    ready_.resize(cfg_.effective_levels());
    crit_queues_.resize(cfg_.criticality_levels);
}

void Kernel::trace(Tick time, const char* category, const std::string& subject,
                   const std::string& object, const std::string& detail) {
    if (trace_) trace_->add(time, category, subject, object, detail);
}

ThreadId Kernel::add_thread(std::string name, unsigned prio, unsigned criticality,
                            unsigned mcp, unsigned mcc) {
    if (prio >= cfg_.priority_levels() || criticality >= cfg_.criticality_levels)
        throw std::invalid_argument("thread priority/criticality out of range");
    Thread t;
    t.name = std::move(name);
    t.base_prio = prio;
    t.criticality = criticality;
    t.mcp = mcp;
    t.mcc = mcc;
    threads_.push_back(std::move(t));
    return ThreadId{static_cast<std::uint32_t>(threads_.size() - 1)};
}

ScId Kernel::add_sc(std::string name, Tick budget, Tick period) {
    if (period == 0 || budget > period)
        throw std::invalid_argument("sc requires 0 <= budget <= period, period > 0");
    SchedContext s;
    s.name = std::move(name);
    s.budget = budget;
    s.period = period;
    s.remaining = budget;
    s.next_refill = 0;
    scs_.push_back(std::move(s));
    return ScId{static_cast<std::uint32_t>(scs_.size() - 1)};
}

EpId Kernel::add_endpoint(std::string name) {
    eps_.push_back(Endpoint{std::move(name), Endpoint::Dir::None, {}});
    return EpId{static_cast<std::uint32_t>(eps_.size() - 1)};
}

NtfnId Kernel::add_notification(std::string name, std::uint64_t badge) {
    Notification n;
    n.name = std::move(name);
    n.badge = badge;
    ntfns_.push_back(std::move(n));
    return NtfnId{static_cast<std::uint32_t>(ntfns_.size() - 1)};
}

void Kernel::bind_notification(NtfnId n, ThreadId t) {
    ntfns_[n.index].bound_thread = t;
}

void Kernel::set_timeout_handler(ThreadId t, EpId ep) {
    threads_[t.index].timeout_handler = ep;
}

void Kernel::grant_all(ThreadId t) { threads_[t.index].all_authority = true; }
void Kernel::grant_sched_control(ThreadId t) { threads_[t.index].has_sched_control = true; }
void Kernel::grant_sc_cap(ThreadId t, ScId sc) { threads_[t.index].sc_caps.push_back(sc); }
void Kernel::grant_tcb_cap(ThreadId t, ThreadId x) { threads_[t.index].tcb_caps.push_back(x); }
void Kernel::grant_ep_cap(ThreadId t, EpId ep) { threads_[t.index].ep_caps.push_back(ep); }
void Kernel::grant_ntfn_cap(ThreadId t, NtfnId n) { threads_[t.index].ntfn_caps.push_back(n); }

bool Kernel::has_auth_sc(ThreadId actor, ScId sc) const {
    const Thread& a = threads_[actor.index];
    return a.all_authority ||
           std::find(a.sc_caps.begin(), a.sc_caps.end(), sc) != a.sc_caps.end();
}
bool Kernel::has_auth_tcb(ThreadId actor, ThreadId target) const {
    const Thread& a = threads_[actor.index];
    return a.all_authority ||
           std::find(a.tcb_caps.begin(), a.tcb_caps.end(), target) != a.tcb_caps.end();
}
bool Kernel::has_auth_ep(ThreadId actor, EpId ep) const {
    const Thread& a = threads_[actor.index];
    return a.all_authority ||
           std::find(a.ep_caps.begin(), a.ep_caps.end(), ep) != a.ep_caps.end();
}
bool Kernel::has_auth_ntfn(ThreadId actor, NtfnId n) const {
    const Thread& a = threads_[actor.index];
    return a.all_authority ||
           std::find(a.ntfn_caps.begin(), a.ntfn_caps.end(), n) != a.ntfn_caps.end();
}

unsigned Kernel::effective_priority(ThreadId t) const {
    const Thread& th = threads_[t.index];
    return th.base_prio | (th.boost_level << cfg_.priority_bits);
}

Tick Kernel::effective_remaining(ScId s, Tick at) const {
    const SchedContext& c = scs_[s.index];
    if (in_entry_ && s == entry_sc_ && at > now_) {
        Tick spent = at - now_;
        return c.remaining > spent ? c.remaining - spent : 0;
    }
    return c.remaining;
}

// ---- model operations ----

Err Kernel::bind_sc(ThreadId actor, ScId sc_id, ThreadId target) {
    if (!has_auth_sc(actor, sc_id) || !has_auth_tcb(actor, target))
        return Err::NoAuthority;
    SchedContext& s = scs_[sc_id.index];
    Thread& t = threads_[target.index];
    if (s.home_thread.valid() || t.home_sc.valid()) return Err::AlreadyBound;
    s.home_thread = target;
    t.home_sc = sc_id;
    if (!t.current_sc.valid() && !s.running_thread.valid()) {
        t.current_sc = sc_id;
        s.running_thread = target;
        if (t.state == ThreadState::Ready) {
            // was parked without an SC; admit it now
            make_runnable(target);
        }
    }
    return Err::Ok;
}

Err Kernel::unbind_sc(ThreadId actor, ScId sc_id) {
    if (!has_auth_sc(actor, sc_id)) return Err::NoAuthority;
    SchedContext& s = scs_[sc_id.index];
    if (!s.home_thread.valid()) return Err::NotBound;
    ThreadId tid = s.home_thread;
    Thread& t = threads_[tid.index];
    s.home_thread.reset();
    t.home_sc.reset();
    if (t.current_sc == sc_id) {
        // the thread actually runs on this SC; without it, it is not runnable
        t.current_sc.reset();
        s.running_thread.reset();
        if (t.state == ThreadState::Running) {
            deschedule_current();
            t.state = ThreadState::Ready;  // parked
        } else if (t.state == ThreadState::Ready) {
            ready_remove(tid);
        } else if (t.state == ThreadState::OutOfBudget) {
            release_remove(tid);
            t.state = ThreadState::Ready;  // parked, will re-enter on bind
        }
    }
    // If the SC is donated to another thread, only the home binding clears.
    return Err::Ok;
}

Err Kernel::set_priority(ThreadId actor, ThreadId target, unsigned prio) {
    if (!has_auth_tcb(actor, target)) return Err::NoAuthority;
    if (prio >= cfg_.priority_levels()) return Err::BadParams;
    if (prio > threads_[actor.index].mcp) return Err::ExceedsMcp;
    Thread& t = threads_[target.index];
    unsigned old_eff = effective_priority(target);
    t.base_prio = prio;
    recompute_effective(target, old_eff);
    return Err::Ok;
}

Err Kernel::set_thread_criticality(ThreadId actor, ThreadId target, unsigned crit) {
    if (!has_auth_tcb(actor, target)) return Err::NoAuthority;
    if (crit >= cfg_.criticality_levels) return Err::BadLevel;
    if (crit > threads_[actor.index].mcc) return Err::ExceedsMcc;
    Thread& t = threads_[target.index];
    if (t.criticality == crit) return Err::Ok;
    unsigned old_eff = effective_priority(target);
    if (t.state != ThreadState::Suspended) {
        auto& q = crit_queues_[t.criticality];
        q.erase(std::find(q.begin(), q.end(), target));
        crit_queues_[crit].push_back(target);
    }
    t.criticality = crit;
    t.boost_level = (crit_level_ > 0 && crit >= crit_level_) ? crit_level_ : 0;
    recompute_effective(target, old_eff);
    return Err::Ok;
}

void Kernel::recompute_effective(ThreadId target, unsigned old_eff) {
    Thread& t = threads_[target.index];
    unsigned new_eff = effective_priority(target);
    if (new_eff == old_eff) return;
    if (t.state == ThreadState::Ready && t.current_sc.valid()) {
        auto& q = ready_[old_eff];
        auto it = std::find(q.begin(), q.end(), target);
        if (it != q.end()) {
            q.erase(it);
            if (q.empty()) ready_bits_.clear(old_eff);
            ready_[new_eff].push_back(target);
            ready_bits_.set(new_eff);
            count("queue-op", 2);
        }
    }
    if (current_thread_.valid() && current_thread_ != target &&
        t.state == ThreadState::Ready && t.current_sc.valid() &&
        new_eff > effective_priority(current_thread_)) {
        request_resched();
    }
    if (current_thread_ == target) request_resched();
}

Err Kernel::start_thread(ThreadId actor, ThreadId target) {
    if (!has_auth_tcb(actor, target)) return Err::NoAuthority;
    Thread& t = threads_[target.index];
    if (t.state != ThreadState::Suspended) return Err::Ok;
    crit_queues_[t.criticality].push_back(target);
    t.state = ThreadState::Ready;
    make_runnable(target);
    return Err::Ok;
}

Err Kernel::suspend_thread(ThreadId actor, ThreadId target) {
    if (!has_auth_tcb(actor, target)) return Err::NoAuthority;
    do_suspend(target);
    return Err::Ok;
}

void Kernel::do_suspend(ThreadId target) {
    Thread& t = threads_[target.index];
    if (t.state == ThreadState::Suspended) return;
    switch (t.state) {
    case ThreadState::Running:
        deschedule_current();
        break;
    case ThreadState::Ready:
        if (t.current_sc.valid()) ready_remove(target);
        break;
    case ThreadState::OutOfBudget:
        release_remove(target);
        break;
    case ThreadState::BlockedSend:
    case ThreadState::BlockedRecv: {
        Endpoint& e = eps_[t.waiting_ep.index];
        auto it = std::find_if(e.queue.begin(), e.queue.end(),
                               [&](const EpWaiter& w) { return w.thread == target; });
        if (it != e.queue.end()) e.queue.erase(it);
        if (e.queue.empty()) e.dir = Endpoint::Dir::None;
        break;
    }
    case ThreadState::WaitingNtfn:
        if (t.waiting_ntfn.valid()) ntfns_[t.waiting_ntfn.index].waiter.reset();
        break;
    default:
        break;
    }
    auto& q = crit_queues_[t.criticality];
    auto it = std::find(q.begin(), q.end(), target);
    if (it != q.end()) q.erase(it);
    t.state = ThreadState::Suspended;
    t.waiting_ep.reset();
    t.waiting_ntfn.reset();
}

std::string Kernel::state_fingerprint() const {
    std::ostringstream o;
    o << now_ << '|' << crit_level_ << '|' << current_thread_.index << '|'
      << timer_deadline_ << '|';
    for (const auto& t : threads_) {
        o << t.base_prio << ',' << t.mcp << ',' << t.criticality << ',' << t.mcc
          << ',' << t.boost_level << ',' << static_cast<int>(t.state) << ','
          << t.home_sc.index << ',' << t.current_sc.index << ','
          << t.reply_slot.index << ',' << t.waiting_ep.index << ','
          << t.waiting_ntfn.index << ',' << t.call_prev.index << ','
          << t.call_next.index << ';';
        for (const auto& [k, v] : t.saved_caps) o << k << '=' << v.index << ' ';
        o << '|';
    }
    for (const auto& s : scs_) {
        o << s.budget << ',' << s.period << ',' << s.remaining << ','
          << s.next_refill << ',' << s.consumed << ',' << s.home_thread.index
          << ',' << s.running_thread.index << '|';
    }
    for (const auto& e : eps_) {
        o << static_cast<int>(e.dir) << ':';
        for (const auto& w : e.queue)
            o << w.thread.index << '/' << w.badge << '/' << w.willing_to_donate
              << '/' << w.is_call << ' ';
        o << '|';
    }
    for (const auto& n : ntfns_)
        o << n.word << ',' << n.waiter.index << ',' << n.bound_thread.index << '|';
    for (const auto& r : replies_)
        o << r.alive << ',' << r.caller.index << ',' << r.donated_sc.index << ','
          << r.is_fault << '|';
    for (const auto& q : ready_) {
        for (auto t : q) o << t.index << ' ';
        o << '|';
    }
    for (const auto& [k, t] : release_) o << k << ':' << t.index << ' ';
    return o.str();
}

}  // namespace mcsim
