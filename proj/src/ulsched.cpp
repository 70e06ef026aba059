// User-level schedulers assembled from kernel mechanisms: IPC reply-cap
// juggling, signals, timer notifications and timeout exceptions.

#include "mcsim/ulsched.hpp"

#include "mcsim/behaviors.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <string>

namespace mcsim::ul {

namespace {

Action act_recv(EpId ep) {
    Action a;
    a.kind = Action::Kind::Recv;
    a.ep = ep;
    return a;
}

Action act_call(EpId ep, std::uint64_t badge, bool donate) {
    Action a;
    a.kind = Action::Kind::Call;
    a.ep = ep;
    a.badge = badge;
    a.donate = donate;
    return a;
}

Action act_reply() {
    Action a;
    a.kind = Action::Kind::Reply;
    return a;
}

Action act_reply_recv(EpId ep) {
    Action a;
    a.kind = Action::Kind::ReplyRecv;
    a.ep = ep;
    return a;
}

Action act_save(std::string slot) {
    Action a;
    a.kind = Action::Kind::SaveCaller;
    a.slot = std::move(slot);
    return a;
}

Action act_set(std::string slot) {
    Action a;
    a.kind = Action::Kind::SetCaller;
    a.slot = std::move(slot);
    return a;
}

Action act_signal(NtfnId n) {
    Action a;
    a.kind = Action::Kind::Signal;
    a.ntfn = n;
    return a;
}

Action act_wait(NtfnId n) {
    Action a;
    a.kind = Action::Kind::Wait;
    a.ntfn = n;
    return a;
}

Action act_timer(Tick amount, NtfnId n, bool absolute = false) {
    Action a;
    a.kind = Action::Kind::ProgramTimer;
    a.amount = amount;
    a.ntfn = n;
    a.absolute = absolute;
    return a;
}

Action act_bind(ScId sc, ThreadId target) {
    Action a;
    a.kind = Action::Kind::BindSc;
    a.sc = sc;
    a.target = target;
    return a;
}

Action act_unbind(ScId sc) {
    Action a;
    a.kind = Action::Kind::UnbindSc;
    a.sc = sc;
    return a;
}

Action act_yield_to(ScId sc) {
    Action a;
    a.kind = Action::Kind::YieldTo;
    a.sc = sc;
    return a;
}

Action act_consume(ScId sc) {
    Action a;
    a.kind = Action::Kind::Consume;
    a.sc = sc;
    return a;
}

Action act_extend0() {
    Action a;
    a.kind = Action::Kind::FaultReply;
    a.handler.kind = HandlerAction::Kind::ExtendBudget;
    a.handler.amount = 0;  // no extension: offender waits for its refill
    return a;
}

std::string slot_name(unsigned id) { return "c" + std::to_string(id); }

// -------- cooperative, shared SC --------

class CoopSharedScheduler final : public Behavior {
public:
    explicit CoopSharedScheduler(EpId ep) : ep_(ep) {}

    Action next(BehaviorContext& ctx, const SyscallOutcome& last) override {
        if (!q_.empty()) {
            Action a = std::move(q_.front());
            q_.pop_front();
            return a;
        }
        if (!inited_) {
            inited_ = true;
            return act_recv(ep_);
        }
        unsigned y = static_cast<unsigned>(last.value);
        reg_.insert(y);
        if (!ctx.kernel.thread(ctx.self).current_sc.valid()) {
            // registration: park the cap; the SC has not reached us yet
            q_.push_back(act_recv(ep_));
            return act_save(slot_name(y));
        }
        // a yield arrived riding the shared SC: hand it to the next client
        auto it = reg_.upper_bound(y);
        unsigned nxt = it == reg_.end() ? *reg_.begin() : *it;
        q_.push_back(act_set(slot_name(nxt)));
        q_.push_back(act_reply_recv(ep_));
        return act_save(slot_name(y));
    }

private:
    EpId ep_;
    std::deque<Action> q_;
    std::set<unsigned> reg_;
    bool inited_ = false;
};

// -------- cooperative, per-client SCs --------

class CoopPerScScheduler final : public Behavior {
public:
    CoopPerScScheduler(NtfnId sched_nt, std::vector<NtfnId> cn)
        : snt_(sched_nt), cn_(std::move(cn)) {}

    Action next(BehaviorContext&, const SyscallOutcome&) override {
        if (signal_next_) {
            signal_next_ = false;
            return act_wait(snt_);
        }
        signal_next_ = true;
        Action a = act_signal(cn_[idx_]);
        idx_ = (idx_ + 1) % cn_.size();
        return a;
    }

private:
    NtfnId snt_;
    std::vector<NtfnId> cn_;
    unsigned idx_ = 0;
    bool signal_next_ = false;
};

// -------- preemptive, shared SC --------

class PreemptiveSharedScheduler final : public Behavior {
public:
    PreemptiveSharedScheduler(NtfnId timer, ScId shared,
                              std::vector<ThreadId> clients, Tick quantum)
        : nt_(timer), sc_(shared), cl_(std::move(clients)), q_(quantum) {}

    Action next(BehaviorContext&, const SyscallOutcome&) override {
        if (!pend_.empty()) {
            Action a = pend_.front();
            pend_.pop_front();
            return a;
        }
        if (!inited_) {
            inited_ = true;
            pend_.push_back(act_wait(nt_));
            return act_timer(q_, nt_);
        }
        // quantum over: move the SC to the next client
        cur_ = (cur_ + 1) % cl_.size();
        pend_.push_back(act_bind(sc_, cl_[cur_]));
        pend_.push_back(act_timer(q_, nt_));
        pend_.push_back(act_wait(nt_));
        return act_unbind(sc_);
    }

private:
    NtfnId nt_;
    ScId sc_;
    std::vector<ThreadId> cl_;
    Tick q_;
    unsigned cur_ = 0;
    std::deque<Action> pend_;
    bool inited_ = false;
};

// -------- preemptive, per-client SCs --------

class PreemptivePerScScheduler final : public Behavior {
public:
    PreemptivePerScScheduler(EpId fep, std::vector<ThreadId> clients,
                             std::vector<ScId> scs, bool reverse)
        : fep_(fep), cl_(std::move(clients)), scs_(std::move(scs)),
          reverse_(reverse) {}

    Action next(BehaviorContext& ctx, const SyscallOutcome&) override {
        if (!pend_.empty()) {
            Action a = pend_.front();
            pend_.pop_front();
            return a;
        }
        if (!inited_) {
            inited_ = true;
            return act_recv(fep_);
        }
        // a client exhausted its quantum; pick who goes next among the
        // still-ready ones, then answer the fault
        std::size_t n = cl_.size();
        for (std::size_t step = 0; step < n; ++step) {
            std::size_t i = reverse_ ? n - 1 - step : step;
            if (ctx.kernel.thread(cl_[i]).state == ThreadState::Ready) {
                pend_.push_back(act_yield_to(scs_[i]));
                break;
            }
        }
        pend_.push_back(act_recv(fep_));
        return act_extend0();
    }

private:
    EpId fep_;
    std::vector<ThreadId> cl_;
    std::vector<ScId> scs_;
    bool reverse_;
    std::deque<Action> pend_;
    bool inited_ = false;
};

// -------- EDF --------

class EdfScheduler final : public Behavior {
public:
    EdfScheduler(EpId ep, NtfnId timer, std::uint64_t tbadge,
                 std::vector<EdfTask> tasks, EdfStats* stats)
        : ep_(ep), nt_(timer), tbadge_(tbadge), st_(stats) {
        for (const EdfTask& e : tasks) t_.push_back({e, 0, 0, Phase::Unreg});
        if (st_) {
            st_->task_misses.assign(t_.size(), 0);
        }
    }

    Action next(BehaviorContext& ctx, const SyscallOutcome& last) override {
        if (!q_.empty()) {
            Action a = std::move(q_.front());
            q_.pop_front();
            return a;
        }
        if (!inited_) {
            inited_ = true;
            return act_recv(ep_);
        }
        Tick now = ctx.now;
        bool saved_first = false;
        if (last.value == tbadge_) {
            for (auto& x : t_) {
                if (x.phase == Phase::Unreg || x.next_release > now) continue;
                if (x.phase == Phase::Idle) {
                    x.phase = Phase::ReadyJob;
                } else if (st_) {
                    // previous job still live at its own next release
                    ++st_->overruns;
                    ++st_->task_misses[index_of(x)];
                }
                x.deadline = x.next_release + x.e.period;
                x.next_release += x.e.period;
                if (st_) ++st_->releases;
            }
        } else {
            unsigned k = static_cast<unsigned>(last.value);
            Task& x = t_[k];
            if (x.phase != Phase::Unreg && st_ && now > x.deadline)
                ++st_->task_misses[k];  // finished, but past the deadline
            x.phase = Phase::Idle;
            saved_first = true;  // the cap must be parked before any set_caller
        }
        // dispatch decision: earliest deadline among live jobs, ties by id
        int pick = -1;
        for (std::size_t i = 0; i < t_.size(); ++i) {
            if (t_[i].phase != Phase::ReadyJob && t_[i].phase != Phase::Active)
                continue;
            if (pick < 0 || t_[i].deadline < t_[pick].deadline) pick = static_cast<int>(i);
        }
        if (pick >= 0) {
            Task& x = t_[pick];
            if (x.phase == Phase::ReadyJob) {
                q_.push_back(act_set(slot_name(static_cast<unsigned>(pick))));
                q_.push_back(act_reply());
                x.phase = Phase::Active;
            }
            q_.push_back(act_yield_to(x.e.sc));
            if (st_) st_->dispatches.emplace_back(now, static_cast<unsigned>(pick));
        }
        // arm the timer for the earliest upcoming release
        Tick nr = kNever;
        for (const Task& x : t_)
            if (x.phase != Phase::Unreg) nr = std::min(nr, x.next_release);
        if (nr != kNever && nr != programmed_) {
            programmed_ = nr;
            q_.push_back(act_timer(nr, nt_, /*absolute=*/true));
        }
        q_.push_back(act_recv(ep_));
        if (saved_first) return act_save(slot_name(static_cast<unsigned>(last.value)));
        Action a = std::move(q_.front());
        q_.pop_front();
        return a;
    }

private:
    enum class Phase { Unreg, Idle, ReadyJob, Active };
    struct Task {
        EdfTask e;
        Tick next_release = 0;
        Tick deadline = 0;
        Phase phase = Phase::Unreg;
    };

    unsigned index_of(const Task& x) const {
        return static_cast<unsigned>(&x - t_.data());
    }

    EpId ep_;
    NtfnId nt_;
    std::uint64_t tbadge_;
    std::vector<Task> t_;
    EdfStats* st_;
    std::deque<Action> q_;
    bool inited_ = false;
    Tick programmed_ = kNever;
};

// -------- CFS --------

class CfsScheduler final : public Behavior {
public:
    CfsScheduler(NtfnId timer, std::vector<CfsClient> clients, Tick quantum)
        : nt_(timer), cl_(std::move(clients)), q_(quantum),
          vrun_(cl_.size(), 0) {}

    Action next(BehaviorContext&, const SyscallOutcome& last) override {
        switch (phase_) {
        case Phase::Start:
            phase_ = Phase::Collect;
            i_ = 0;
            return act_consume(cl_[0].sc);
        case Phase::Collect:
            vrun_[i_] += last.value * 1024 / cl_[i_].weight;
            if (++i_ < cl_.size()) return act_consume(cl_[i_].sc);
            phase_ = Phase::Armed;
            return act_yield_to(cl_[pick()].sc);
        case Phase::Armed:
            phase_ = Phase::Sleeping;
            return act_timer(q_, nt_);
        case Phase::Sleeping:
            phase_ = Phase::Start;
            return act_wait(nt_);
        }
        return Action::halt();
    }

private:
    enum class Phase { Start, Collect, Armed, Sleeping };

    std::size_t pick() {
        // ordered tree keyed by virtual runtime, smallest first
        tree_.clear();
        for (std::size_t i = 0; i < cl_.size(); ++i) tree_.emplace(vrun_[i], i);
        return tree_.begin()->second;
    }

    NtfnId nt_;
    std::vector<CfsClient> cl_;
    Tick q_;
    std::vector<std::uint64_t> vrun_;
    std::multimap<std::uint64_t, std::size_t> tree_;
    Phase phase_ = Phase::Start;
    std::size_t i_ = 0;
};

}  // namespace

std::unique_ptr<Behavior> coop_shared_scheduler(EpId ep) {
    return std::make_unique<CoopSharedScheduler>(ep);
}

std::unique_ptr<Behavior> coop_shared_client(EpId ep, unsigned id, Tick slice) {
    return std::make_unique<SequenceBehavior>(
        std::vector<Action>{act_call(ep, id, /*donate=*/true),
                            Action::compute(slice, /*job=*/true)},
        0);
}

std::unique_ptr<Behavior> coop_persc_scheduler(NtfnId sched_nt,
                                               std::vector<NtfnId> client_nts) {
    return std::make_unique<CoopPerScScheduler>(sched_nt, std::move(client_nts));
}

std::unique_ptr<Behavior> coop_persc_client(NtfnId sched_nt, NtfnId own,
                                            Tick slice) {
    return std::make_unique<SequenceBehavior>(
        std::vector<Action>{act_wait(own), Action::compute(slice, /*job=*/true),
                            act_signal(sched_nt)},
        0);
}

std::unique_ptr<Behavior> preemptive_shared_scheduler(
    NtfnId timer, ScId shared, std::vector<ThreadId> clients, Tick quantum) {
    return std::make_unique<PreemptiveSharedScheduler>(timer, shared,
                                                       std::move(clients), quantum);
}

std::unique_ptr<Behavior> preemptive_persc_scheduler(
    EpId fault_ep, std::vector<ThreadId> clients, std::vector<ScId> client_scs,
    bool prefer_reverse) {
    return std::make_unique<PreemptivePerScScheduler>(
        fault_ep, std::move(clients), std::move(client_scs), prefer_reverse);
}

std::unique_ptr<Behavior> edf_scheduler(EpId ep, NtfnId timer,
                                        std::uint64_t timer_badge,
                                        std::vector<EdfTask> tasks,
                                        EdfStats* stats) {
    return std::make_unique<EdfScheduler>(ep, timer, timer_badge,
                                          std::move(tasks), stats);
}

std::unique_ptr<Behavior> edf_client(EpId ep, unsigned id, Tick compute) {
    return std::make_unique<SequenceBehavior>(
        std::vector<Action>{act_call(ep, id, /*donate=*/false),
                            Action::compute(compute, /*job=*/true)},
        0);
}

std::unique_ptr<Behavior> cfs_scheduler(NtfnId timer, std::vector<CfsClient> clients,
                                        Tick quantum) {
    return std::make_unique<CfsScheduler>(timer, std::move(clients), quantum);
}

std::vector<RefSpan> edf_reference(const std::vector<EdfTask>& tasks,
                                   Tick horizon) {
    struct S {
        Tick next_release = 0, deadline = 0, left = 0;
    };
    std::vector<S> st(tasks.size());
    std::vector<RefSpan> out;
    Tick t = 0;
    while (t < horizon) {
        for (std::size_t i = 0; i < st.size(); ++i) {
            if (st[i].next_release > t) continue;
            if (st[i].left == 0) st[i].left = tasks[i].compute;
            st[i].deadline = st[i].next_release + tasks[i].period;
            st[i].next_release += tasks[i].period;
        }
        int pick = -1;
        for (std::size_t i = 0; i < st.size(); ++i) {
            if (st[i].left == 0) continue;
            if (pick < 0 || st[i].deadline < st[pick].deadline)
                pick = static_cast<int>(i);
        }
        Tick next = horizon;
        for (const S& s : st) next = std::min(next, s.next_release);
        if (pick >= 0) next = std::min(next, t + st[pick].left);
        if (next <= t) break;  // safety; cannot happen with positive periods
        if (pick >= 0) {
            if (!out.empty() && out.back().task == static_cast<unsigned>(pick) &&
                out.back().end == t)
                out.back().end = next;
            else
                out.push_back({static_cast<unsigned>(pick), t, next});
            st[pick].left -= next - t;
        }
        t = next;
    }
    return out;
}

EdfStats edf_simulate(const std::vector<std::pair<Tick, Tick>>& ct,
                      Tick horizon) {
    Engine eng{KernelConfig{}};
    Kernel& k = eng.kernel();
    EpId ep = k.add_endpoint("edf");
    NtfnId timer = k.add_notification("edf.timer", 1u << 20);
    Tick span = horizon + 1;
    auto started = [&](const std::string& name, unsigned prio) {
        ThreadId t = k.add_thread(name, prio);
        k.grant_all(t);
        ScId s = k.add_sc(name + ".sc", span, span);
        k.bind_sc(t, s, t);
        k.start_thread(t, t);
        return t;
    };
    std::vector<EdfTask> tasks;
    std::vector<ThreadId> clients;
    for (std::size_t i = 0; i < ct.size(); ++i) {
        ThreadId t = started("j" + std::to_string(i), 1);
        clients.push_back(t);
        tasks.push_back({t, k.thread(t).home_sc, ct[i].first, ct[i].second});
    }
    ThreadId sch = started("edf", 9);
    k.bind_notification(timer, sch);
    for (std::size_t i = 0; i < ct.size(); ++i)
        eng.set_behavior(clients[i], edf_client(ep, unsigned(i), ct[i].first));
    EdfStats stats;
    eng.set_behavior(sch, edf_scheduler(ep, timer, 1u << 20, tasks, &stats));
    eng.record_spans(false);
    eng.run(horizon);
    return stats;
}

}  // namespace mcsim::ul
