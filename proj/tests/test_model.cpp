#include <doctest.h>

#include "mcsim/kernel.hpp"

using namespace mcsim;

namespace {
KernelConfig cfg4() {
    KernelConfig c;
    c.criticality_levels = 4;
    c.check_invariants = true;
    return c;
}
}  // namespace

TEST_CASE("config rejects an unrepresentable effective priority space") {
    KernelConfig c;
    c.priority_bits = 8;
    c.criticality_levels = 5;  // 5 * 256 > 1024
    CHECK_THROWS(Kernel{c});
    c.criticality_levels = 4;
    CHECK_NOTHROW(Kernel{c});
}

TEST_CASE("operations without authority fail and change nothing") {
    Kernel k(cfg4());
    ThreadId root = k.add_thread("root", 10, 0, 255, 3);
    k.grant_all(root);
    ThreadId victim = k.add_thread("victim", 5);
    ScId sc = k.add_sc("sc", 5, 10);
    ThreadId pleb = k.add_thread("pleb", 1, 0, 255, 3);
    EpId ep = k.add_endpoint("ep");
    NtfnId nt = k.add_notification("nt");
    REQUIRE(k.bind_sc(root, sc, victim) == Err::Ok);
    REQUIRE(k.start_thread(root, victim) == Err::Ok);

    std::string before = k.state_fingerprint();
    CHECK(k.set_priority(pleb, victim, 7) == Err::NoAuthority);
    CHECK(k.set_thread_criticality(pleb, victim, 2) == Err::NoAuthority);
    CHECK(k.suspend_thread(pleb, victim) == Err::NoAuthority);
    CHECK(k.start_thread(pleb, victim) == Err::NoAuthority);
    CHECK(k.unbind_sc(pleb, sc) == Err::NoAuthority);
    CHECK(k.bind_sc(pleb, sc, pleb) == Err::NoAuthority);
    CHECK(k.yield_to(pleb, sc).err == Err::NoAuthority);
    CHECK(k.consume(pleb, sc).err == Err::NoAuthority);
    CHECK(k.sc_configure(pleb, sc, 1, 2) == Err::NoAuthority);
    CHECK(k.call(pleb, ep, false, 0) == Err::NoAuthority);
    CHECK(k.send(pleb, ep, 0) == Err::NoAuthority);
    CHECK(k.recv(pleb, ep) == Err::NoAuthority);
    CHECK(k.signal(pleb, nt) == Err::NoAuthority);
    CHECK(k.wait(pleb, nt) == Err::NoAuthority);
    CHECK(k.set_system_criticality(pleb, 1).err == Err::NoAuthority);
    CHECK(k.state_fingerprint() == before);
}

TEST_CASE("individual caps grant exactly the matching operation") {
    Kernel k(cfg4());
    ThreadId actor = k.add_thread("actor", 3, 0, 200, 3);
    ThreadId target = k.add_thread("target", 2);
    ScId sc = k.add_sc("sc", 2, 8);

    CHECK(k.bind_sc(actor, sc, target) == Err::NoAuthority);
    k.grant_sc_cap(actor, sc);
    // still missing the tcb cap
    CHECK(k.bind_sc(actor, sc, target) == Err::NoAuthority);
    k.grant_tcb_cap(actor, target);
    CHECK(k.bind_sc(actor, sc, target) == Err::Ok);
    CHECK(k.set_priority(actor, target, 6) == Err::Ok);

    // sc cap also covers consume / yield_to, but not configure
    CHECK(k.consume(actor, sc).err == Err::Ok);
    CHECK(k.sc_configure(actor, sc, 2, 8) == Err::NoAuthority);
    k.grant_sched_control(actor);
    CHECK(k.sc_configure(actor, sc, 3, 8) == Err::Ok);
}

TEST_CASE("mcp bounds priority setting") {
    Kernel k(cfg4());
    ThreadId actor = k.add_thread("actor", 3, 0, /*mcp=*/5, 0);
    ThreadId target = k.add_thread("target", 1);
    k.grant_tcb_cap(actor, target);
    CHECK(k.set_priority(actor, target, 5) == Err::Ok);
    CHECK(k.thread(target).base_prio == 5);
    std::string before = k.state_fingerprint();
    CHECK(k.set_priority(actor, target, 6) == Err::ExceedsMcp);
    CHECK(k.state_fingerprint() == before);
    CHECK(k.set_priority(actor, target, 300) == Err::BadParams);
}

TEST_CASE("mcc bounds criticality setting") {
    Kernel k(cfg4());
    ThreadId actor = k.add_thread("actor", 3, 0, 0, /*mcc=*/2);
    ThreadId target = k.add_thread("target", 1);
    k.grant_tcb_cap(actor, target);
    CHECK(k.set_thread_criticality(actor, target, 2) == Err::Ok);
    CHECK(k.thread(target).criticality == 2);
    std::string before = k.state_fingerprint();
    CHECK(k.set_thread_criticality(actor, target, 3) == Err::ExceedsMcc);
    CHECK(k.state_fingerprint() == before);
    CHECK(k.set_thread_criticality(actor, target, 9) == Err::BadLevel);
}

TEST_CASE("sc binding is exclusive until unbound") {
    Kernel k(cfg4());
    ThreadId root = k.add_thread("root", 7);
    k.grant_all(root);
    ThreadId a = k.add_thread("a", 1);
    ThreadId b = k.add_thread("b", 1);
    ScId s1 = k.add_sc("s1", 1, 10);
    ScId s2 = k.add_sc("s2", 1, 10);
    CHECK(k.unbind_sc(root, s1) == Err::NotBound);
    CHECK(k.bind_sc(root, s1, a) == Err::Ok);
    CHECK(k.bind_sc(root, s1, b) == Err::AlreadyBound);
    CHECK(k.bind_sc(root, s2, a) == Err::AlreadyBound);
    CHECK(k.unbind_sc(root, s1) == Err::Ok);
    CHECK(k.bind_sc(root, s2, a) == Err::Ok);
    CHECK(k.bind_sc(root, s1, b) == Err::Ok);
}

TEST_CASE("effective priority composes base and boost") {
    Kernel k(cfg4());
    ThreadId t = k.add_thread("t", 17, 2);
    CHECK(k.effective_priority(t) == 17);
    k.grant_all(t);
    k.grant_sched_control(t);
    ScId s = k.add_sc("s", 1, 2);
    REQUIRE(k.bind_sc(t, s, t) == Err::Ok);
    REQUIRE(k.start_thread(t, t) == Err::Ok);
    auto r = k.set_system_criticality(t, 2);
    REQUIRE(r.ok());
    CHECK(k.effective_priority(t) == (17u | (2u << 8)));
}
