#include <doctest.h>

#include "mcsim/behaviors.hpp"
#include "mcsim/engine.hpp"

using namespace mcsim;

namespace {

KernelConfig cfg_checked() {
    KernelConfig c;
    c.check_invariants = true;
    return c;
}

ThreadId active_thread(Kernel& k, const std::string& name, unsigned prio,
                       Tick budget, Tick period) {
    ThreadId t = k.add_thread(name, prio);
    k.grant_all(t);
    ScId s = k.add_sc(name + ".sc", budget, period);
    REQUIRE(k.bind_sc(t, s, t) == Err::Ok);
    REQUIRE(k.start_thread(t, t) == Err::Ok);
    return t;
}

ThreadId passive_thread(Kernel& k, const std::string& name, unsigned prio) {
    ThreadId t = k.add_thread(name, prio);
    k.grant_all(t);
    ThreadId helper = k.add_thread(name + ".starter", 0);
    k.grant_all(helper);
    REQUIRE(k.start_thread(helper, t) == Err::Ok);
    return t;
}

Action act_recv(EpId ep) {
    Action a;
    a.kind = Action::Kind::Recv;
    a.ep = ep;
    return a;
}

Action act_fault_reply(HandlerAction::Kind kind, Tick amount = 0,
                       unsigned level = 0) {
    Action a;
    a.kind = Action::Kind::FaultReply;
    a.handler.kind = kind;
    a.handler.amount = amount;
    a.handler.level = level;
    return a;
}

}  // namespace

TEST_CASE("budget extension lets an overrunning job finish") {
    Engine eng(cfg_checked());
    Kernel& k = eng.kernel();
    ThreadId task = k.add_thread("task", 3);
    k.grant_all(task);
    ScId sc = k.add_sc("task.sc", 5, 20);
    REQUIRE(k.bind_sc(task, sc, task) == Err::Ok);
    REQUIRE(k.start_thread(task, task) == Err::Ok);
    ThreadId handler = active_thread(k, "handler", 9, 10, 100);
    EpId fep = k.add_endpoint("faults");
    k.set_timeout_handler(task, fep);

    eng.set_behavior(task, std::make_unique<SequenceBehavior>(
        std::vector<Action>{Action::compute(8, /*job=*/true)}));
    std::vector<std::uint64_t> reasons;
    int hstep = 0;
    eng.set_behavior(handler, std::make_unique<FnBehavior>(
        [&, fep](BehaviorContext&, const SyscallOutcome& last) -> Action {
            if (hstep++ % 2 == 0) return act_recv(fep);
            reasons.push_back(last.value);
            return act_fault_reply(HandlerAction::Kind::ExtendBudget, 5);
        }));
    eng.run(20);
    // the 5-tick budget expires at t=5; the handler tops it up and the
    // 8-tick job completes without waiting for the replenishment
    REQUIRE(eng.jobs().size() == 1);
    CHECK(eng.jobs()[0].completed == 8);
    REQUIRE(reasons.size() == 1);
    CHECK(reasons[0] == 0);  // budget expiry
    CHECK(k.sc(sc).total_charged == 8);
    CHECK(k.ledger()["timeout-fault"] == 1);
}

TEST_CASE("a fault raised before the handler listens is parked") {
    Engine eng(cfg_checked());
    Kernel& k = eng.kernel();
    ThreadId task = active_thread(k, "task", 5, 2, 100);
    ThreadId handler = active_thread(k, "handler", 3, 20, 100);
    EpId fep = k.add_endpoint("faults");
    k.set_timeout_handler(task, fep);

    eng.set_behavior(task, std::make_unique<SequenceBehavior>(
        std::vector<Action>{Action::compute(4, true)}));
    std::vector<Tick> handled;
    int hstep = 0;
    eng.set_behavior(handler, std::make_unique<FnBehavior>(
        [&, fep](BehaviorContext& ctx, const SyscallOutcome&) -> Action {
            int s = hstep++;
            if (s == 0) return Action::compute(5);  // busy past the expiry at t=2
            if (s % 2 == 1) return act_recv(fep);
            handled.push_back(ctx.now);
            return act_fault_reply(HandlerAction::Kind::ExtendBudget, 4);
        }));
    eng.run(20);
    // task runs [0,2), faults; handler only picks it up at t=5+2
    REQUIRE(handled.size() == 1);
    CHECK(handled[0] == 7);
    REQUIRE(eng.jobs().size() == 1);
    CHECK(eng.jobs()[0].completed == 9);
}

TEST_CASE("suspending the offender stops it for good") {
    Engine eng(cfg_checked());
    Kernel& k = eng.kernel();
    ThreadId hog = active_thread(k, "hog", 5, 2, 10);
    ThreadId handler = active_thread(k, "handler", 9, 10, 100);
    EpId fep = k.add_endpoint("faults");
    k.set_timeout_handler(hog, fep);

    eng.set_behavior(hog, busy_loop());
    int hstep = 0;
    eng.set_behavior(handler, std::make_unique<FnBehavior>(
        [&, fep](BehaviorContext&, const SyscallOutcome&) -> Action {
            if (hstep++ % 2 == 0) return act_recv(fep);
            return act_fault_reply(HandlerAction::Kind::SuspendOwner);
        }));
    eng.run(100);
    CHECK(eng.cpu_time(hog) == 2);
    CHECK(k.thread(hog).state == ThreadState::Suspended);
    CHECK(eng.idle_time() == 98);
}

TEST_CASE("rollback aborts the client and resets the server") {
    Engine eng(cfg_checked());
    Kernel& k = eng.kernel();
    ThreadId client = active_thread(k, "client", 2, 5, 50);
    ThreadId server = passive_thread(k, "server", 5);
    ThreadId handler = active_thread(k, "handler", 9, 10, 100);
    EpId svc = k.add_endpoint("svc");
    EpId fep = k.add_endpoint("faults");
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

    // server would need 10 ticks per request but the client only ever
    // donates 5; the handler rolls it back to a clean receive
    int sstep = 0;
    eng.set_behavior(server, std::make_unique<FnBehavior>(
        [&, svc](BehaviorContext&, const SyscallOutcome&) -> Action {
            if (sstep++ == 0) return act_recv(svc);
            return Action::compute(10);
        },
        [&]() -> std::optional<EpId> {
            sstep = 1;  // back to "just received"; wait for the next request
            return svc;
        }));
    int hstep = 0;
    std::vector<std::uint64_t> reasons;
    eng.set_behavior(handler, std::make_unique<FnBehavior>(
        [&, fep](BehaviorContext&, const SyscallOutcome& last) -> Action {
            if (hstep++ % 2 == 0) return act_recv(fep);
            reasons.push_back(last.value);
            return act_fault_reply(HandlerAction::Kind::RollbackAndReset);
        }));
    eng.run(100);

    // the donated budget of 5 expires at t=5; the client's own wake then
    // waits for its replenishment at t=50
    CHECK(client_saw.err == Err::Aborted);
    CHECK(aborted_at == 50);
    REQUIRE(reasons.size() == 1);
    CHECK(reasons[0] == 0);
    CHECK(k.thread(server).state == ThreadState::BlockedRecv);
    CHECK_FALSE(k.thread(server).current_sc.valid());
    CHECK(k.thread(client).current_sc == k.thread(client).home_sc);
    CHECK(eng.cpu_time(server) == 5);
}
