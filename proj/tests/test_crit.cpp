#include <doctest.h>

#include "mcsim/behaviors.hpp"
#include "mcsim/engine.hpp"

using namespace mcsim;

namespace {

KernelConfig cfg(unsigned ncrit, bool checked = true) {
    KernelConfig c;
    c.criticality_levels = ncrit;
    c.check_invariants = checked;
    return c;
}

ThreadId make_started(Kernel& k, const std::string& name, unsigned prio,
                      unsigned crit, Tick budget, Tick period) {
    ThreadId t = k.add_thread(name, prio, crit);
    k.grant_all(t);
    ScId s = k.add_sc(name + ".sc", budget, period);
    REQUIRE(k.bind_sc(t, s, t) == Err::Ok);
    REQUIRE(k.start_thread(t, t) == Err::Ok);
    return t;
}

Tick usage_in(const Engine& eng, ThreadId t, Tick lo, Tick hi) {
    Tick sum = 0;
    for (const Span& s : eng.spans()) {
        if (s.thread != t) continue;
        Tick b = std::max(s.begin, lo), e = std::min(s.end, hi);
        if (b < e) sum += e - b;
    }
    return sum;
}

}  // namespace

TEST_CASE("switch counts per level for a mixed population") {
    // 60 threads: 32/16/8/4 at criticality 0/1/2/3
    Kernel k(cfg(4));
    ThreadId root = k.add_thread("root", 0);
    k.grant_all(root);
    std::vector<std::vector<ThreadId>> by_crit(4);
    const unsigned pop[4] = {32, 16, 8, 4};
    for (unsigned c = 0; c < 4; ++c)
        for (unsigned i = 0; i < pop[c]; ++i)
            by_crit[c].push_back(make_started(
                k, "t" + std::to_string(c) + "_" + std::to_string(i),
                1 + c * 10 + i % 7, c, 1, 1000));

    auto r1 = k.set_system_criticality(root, 1);
    REQUIRE(r1.err == Err::Ok);
    CHECK(r1.value == 28);  // everything at criticality >= 1
    CHECK(k.ledger()["crit-op"] == 3 * 28);

    // raising further only touches the levels that gain a higher boost
    auto r2 = k.set_system_criticality(root, 2);
    CHECK(r2.value == 12);
    auto r3 = k.set_system_criticality(root, 3);
    CHECK(r3.value == 4);
    CHECK(k.ledger()["crit-op"] == 3 * (28 + 12 + 4));

    // threads at or above the system level outrank every other thread,
    // including ones still carrying a boost from an earlier, lower switch
    unsigned lo_max = 0, hi_min = ~0u;
    for (unsigned c = 0; c < 4; ++c)
        for (ThreadId t : by_crit[c]) {
            unsigned e = k.effective_priority(t);
            if (c >= 3) hi_min = std::min(hi_min, e);
            else lo_max = std::max(lo_max, e);
        }
    CHECK(hi_min > lo_max);
    CHECK(k.thread(by_crit[1][0]).boost_level == 1);  // stale but harmless
    CHECK(k.thread(by_crit[3][0]).boost_level == 3);

    // dropping back to normal clears every boost in one sweep
    auto r0 = k.set_system_criticality(root, 0);
    CHECK(r0.value == 28);
    for (unsigned c = 0; c < 4; ++c)
        for (ThreadId t : by_crit[c]) {
            CHECK(k.thread(t).boost_level == 0);
            CHECK(k.effective_priority(t) == k.thread(t).base_prio);
        }
}

TEST_CASE("switch authority: level bound and clearance") {
    Kernel k(cfg(3));
    ThreadId op = k.add_thread("op", 5, /*crit=*/0, /*mcp=*/0, /*mcc=*/1);
    k.grant_sched_control(op);
    CHECK(k.set_system_criticality(op, 3).err == Err::BadLevel);
    CHECK(k.set_system_criticality(op, 2).err == Err::ExceedsMcc);
    CHECK(k.system_criticality() == 0);
    CHECK(k.set_system_criticality(op, 1).err == Err::Ok);
    CHECK(k.system_criticality() == 1);

    ThreadId pleb = k.add_thread("pleb", 5);
    CHECK(k.set_system_criticality(pleb, 1).err == Err::NoAuthority);

    ThreadId root = k.add_thread("root", 5);
    k.grant_all(root);  // blanket authority ignores the mcc bound
    CHECK(k.set_system_criticality(root, 2).err == Err::Ok);
}

TEST_CASE("a switch reorders the CPU at the instant it happens") {
    Engine eng(cfg(2));
    Kernel& k = eng.kernel();
    ThreadId lo = make_started(k, "lo", 7, 0, 100, 100);
    ThreadId hi = make_started(k, "hi", 2, 1, 100, 100);
    ThreadId ctl = make_started(k, "ctl", 9, 1, 10, 100);

    eng.set_behavior(lo, busy_loop());
    eng.set_behavior(hi, busy_loop());
    eng.set_behavior(ctl, std::make_unique<SequenceBehavior>(std::vector<Action>{
        Action::compute(5),
        [] {
            Action a;
            a.kind = Action::Kind::SetSystemCriticality;
            a.level = 1;
            return a;
        }(),
        Action::halt()}));
    eng.run(30);

    // before the switch the nominally higher base priority wins; after it
    // the boosted high-criticality thread takes over
    CHECK(usage_in(eng, ctl, 0, 5) == 5);
    CHECK(usage_in(eng, lo, 0, 30) == 0);
    CHECK(usage_in(eng, hi, 5, 30) == 25);
    CHECK(k.effective_priority(hi) == (2u | (1u << 8)));
    CHECK(k.effective_priority(lo) == 7);
}

TEST_CASE("a switch faults servers running on low-criticality budget") {
    Engine eng(cfg(2));
    Kernel& k = eng.kernel();
    ThreadId client = make_started(k, "client", 2, 0, 10, 100);
    ThreadId server = k.add_thread("server", 5, /*crit=*/1);
    k.grant_all(server);
    ThreadId handler = make_started(k, "handler", 8, 1, 10, 100);
    ThreadId ctl = make_started(k, "ctl", 9, 1, 10, 100);
    {
        ThreadId starter = k.add_thread("starter", 0);
        k.grant_all(starter);
        REQUIRE(k.start_thread(starter, server) == Err::Ok);
    }
    EpId svc = k.add_endpoint("svc");
    EpId fep = k.add_endpoint("faults");
    NtfnId nt = k.add_notification("mode");
    k.set_timeout_handler(server, fep);

    SyscallOutcome client_saw{};
    Tick aborted_at = kNever;
    int cstep = 0;
    eng.set_behavior(client, std::make_unique<FnBehavior>(
        [&, svc](BehaviorContext& ctx, const SyscallOutcome& last) -> Action {
            if (cstep++ == 0) {
                Action a;
                a.kind = Action::Kind::Call;
                a.ep = svc;
                a.donate = true;
                return a;
            }
            client_saw = last;
            aborted_at = ctx.now;
            return Action::halt();
        }));
    int sstep = 0;
    eng.set_behavior(server, std::make_unique<FnBehavior>(
        [&, svc](BehaviorContext&, const SyscallOutcome&) -> Action {
            if (sstep++ == 0) {
                Action a;
                a.kind = Action::Kind::Recv;
                a.ep = svc;
                return a;
            }
            return Action::compute(10);
        },
        [&]() -> std::optional<EpId> {
            sstep = 1;
            return svc;
        }));
    int hstep = 0;
    std::vector<std::uint64_t> reasons;
    eng.set_behavior(handler, std::make_unique<FnBehavior>(
        [&, fep](BehaviorContext&, const SyscallOutcome& last) -> Action {
            if (hstep++ % 2 == 0) {
                Action a;
                a.kind = Action::Kind::Recv;
                a.ep = fep;
                return a;
            }
            reasons.push_back(last.value);
            Action a;
            a.kind = Action::Kind::FaultReply;
            a.handler.kind = HandlerAction::Kind::RollbackAndReset;
            return a;
        }));
    int ctlstep = 0;
    eng.set_behavior(ctl, std::make_unique<FnBehavior>(
        [&, nt](BehaviorContext&, const SyscallOutcome&) -> Action {
            switch (ctlstep++) {
            case 0: {
                Action a;
                a.kind = Action::Kind::Wait;
                a.ntfn = nt;
                return a;
            }
            case 1: {
                Action a;
                a.kind = Action::Kind::SetSystemCriticality;
                a.level = 1;
                return a;
            }
            default: return Action::halt();
            }
        }));
    eng.add_external_signal(3, nt);
    eng.run(50);

    // the server has been running on the criticality-0 client's budget
    // for 3 ticks when the mode switch lands
    REQUIRE(reasons.size() == 1);
    CHECK(reasons[0] == 1);  // criticality switch, not budget expiry
    CHECK(client_saw.err == Err::Aborted);
    CHECK(aborted_at == 3);
    CHECK(eng.cpu_time(server) == 3);
    CHECK(k.thread(server).state == ThreadState::BlockedRecv);
    CHECK(k.thread(client).current_sc == k.thread(client).home_sc);
    CHECK(k.system_criticality() == 1);
}
