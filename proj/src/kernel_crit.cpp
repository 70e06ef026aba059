// System criticality switch: boosting by criticality level and notifying
// servers that are busy on behalf of now-degraded clients.

#include "mcsim/kernel.hpp"

namespace mcsim {

Result<unsigned> Kernel::set_system_criticality(ThreadId actor, unsigned level) {
    const Thread& a = threads_[actor.index];
    if (!(a.all_authority || a.has_sched_control))
        return Result<unsigned>::failure(Err::NoAuthority);
    if (level >= cfg_.criticality_levels)
        return Result<unsigned>::failure(Err::BadLevel);
    if (level > a.mcc && !a.all_authority)
        return Result<unsigned>::failure(Err::ExceedsMcc);
    return Result<unsigned>::success(apply_criticality(level));
}

unsigned Kernel::apply_criticality(unsigned level) {
    if (level == crit_level_) return 0;
    unsigned old = crit_level_;
    crit_level_ = level;
    trace(in_entry_ ? entry_time_ : now_, "crit", std::to_string(old),
          std::to_string(level), "switch");
    count("crit-switch");

    unsigned changed = 0;
    if (level > 0) {
        // only threads at or above the new level are touched; lower
        // levels keep whatever effective priority they had, which the
        // boosted levels now dominate anyway
        for (unsigned c = level; c < cfg_.criticality_levels; ++c) {
            for (ThreadId t : crit_queues_[c]) {
                Thread& th = threads_[t.index];
                if (th.boost_level == level) continue;
                unsigned old_eff = effective_priority(t);
                th.boost_level = level;
                count("crit-op", 3);  // dequeue, relabel, enqueue
                recompute_effective(t, old_eff);
                ++changed;
            }
        }
    } else {
        for (auto& q : crit_queues_) {
            for (ThreadId t : q) {
                Thread& th = threads_[t.index];
                if (th.boost_level == 0) continue;
                unsigned old_eff = effective_priority(t);
                th.boost_level = 0;
                count("crit-op", 3);
                recompute_effective(t, old_eff);
                ++changed;
            }
        }
    }

    if (level > old) {
        // a server holding an SC lent by a client below the new level gets
        // a timeout exception so it can abandon the request
        for (std::uint32_t i = 0; i < threads_.size(); ++i) {
            ThreadId tid{i};
            Thread& th = threads_[i];
            if (th.state != ThreadState::Running && th.state != ThreadState::Ready)
                continue;
            if (!th.current_sc.valid() || th.current_sc == th.home_sc) continue;
            ThreadId owner = scs_[th.current_sc.index].home_thread;
            if (!owner.valid() || threads_[owner.index].criticality >= level)
                continue;
            if (!th.timeout_handler.valid()) continue;
            if (tid == current_thread_)
                deschedule_current();
            else if (th.state == ThreadState::Ready)
                ready_remove(tid);
            raise_timeout(tid, FaultReason::CriticalitySwitch);
        }
    }
    request_resched();
    return changed;
}

}  // namespace mcsim
