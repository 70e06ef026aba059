// Structural invariants, validated after every kernel exit when enabled.

#include <stdexcept>
#include <string>
#include <unordered_set>

#include "mcsim/kernel.hpp"

namespace mcsim {

namespace {
[[noreturn]] void fail(const std::string& what) {
    throw std::logic_error("kernel invariant violated: " + what);
}
}  // namespace

void Kernel::check_invariants() const {
    std::unordered_set<std::uint32_t> queued;
    for (unsigned p = 0; p < ready_.size(); ++p) {
        const auto& q = ready_[p];
        if (q.empty() != !ready_bits_.test(p))
            fail("occupancy bit disagrees with queue at prio " + std::to_string(p));
        for (ThreadId t : q) {
            const Thread& th = threads_[t.index];
            if (th.state != ThreadState::Ready)
                fail(th.name + " queued ready but state " +
                     std::string(to_string(th.state)));
            if (!th.current_sc.valid())
                fail(th.name + " queued ready without an SC");
            if (effective_priority(t) != p)
                fail(th.name + " queued at wrong priority");
            if (!queued.insert(t.index).second)
                fail(th.name + " queued twice");
        }
    }

    for (const auto& [key, t] : release_) {
        const Thread& th = threads_[t.index];
        if (th.state != ThreadState::OutOfBudget)
            fail(th.name + " in release queue but state " +
                 std::string(to_string(th.state)));
        if (!queued.insert(t.index).second)
            fail(th.name + " in both ready and release queues");
    }

    for (std::uint32_t i = 0; i < scs_.size(); ++i) {
        const SchedContext& c = scs_[i];
        if (c.remaining > c.budget || c.budget > c.period)
            fail(c.name + " violates remaining <= budget <= period");
        if (c.home_thread.valid() &&
            threads_[c.home_thread.index].home_sc != ScId{i})
            fail(c.name + " home link not mutual");
        if (c.running_thread.valid() &&
            threads_[c.running_thread.index].current_sc != ScId{i})
            fail(c.name + " running link not mutual");
    }

    if (current_thread_.valid()) {
        const Thread& th = threads_[current_thread_.index];
        if (th.state != ThreadState::Running)
            fail(th.name + " is current but not Running");
        if (th.current_sc != entry_sc_)
            fail(th.name + " current SC disagrees with on-cpu SC");
        if (queued.count(current_thread_.index))
            fail(th.name + " is current but also queued");
    }

    // donation chains must be acyclic and mutually linked
    for (std::uint32_t i = 0; i < threads_.size(); ++i) {
        const Thread& th = threads_[i];
        if (th.call_next.valid() &&
            threads_[th.call_next.index].call_prev != ThreadId{i})
            fail(th.name + " call chain link not mutual");
        ThreadId walk = th.call_next;
        std::size_t steps = 0;
        while (walk.valid()) {
            if (++steps > threads_.size()) fail("call chain cycle");
            walk = threads_[walk.index].call_next;
        }
    }

    for (const Endpoint& e : eps_) {
        if (e.queue.empty() != (e.dir == Endpoint::Dir::None))
            fail(e.name + " direction disagrees with queue");
        unsigned last = ~0u;
        for (const EpWaiter& w : e.queue) {
            unsigned p = effective_priority(w.thread);
            if (p > last) fail(e.name + " queue not priority ordered");
            last = p;
            const ThreadState s = threads_[w.thread.index].state;
            bool ok = e.dir == Endpoint::Dir::Recv
                          ? s == ThreadState::BlockedRecv
                          : s == ThreadState::BlockedSend ||
                                s == ThreadState::FaultBlocked;
            if (!ok)
                fail(e.name + " waiter " + threads_[w.thread.index].name +
                     " in state " + std::string(to_string(s)));
        }
    }

    for (const Notification& n : ntfns_) {
        if (n.waiter.valid() &&
            threads_[n.waiter.index].state != ThreadState::WaitingNtfn)
            fail(n.name + " waiter not waiting");
    }
}

}  // namespace mcsim
