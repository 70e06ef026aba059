#include <doctest.h>

#include <algorithm>

#include "mcsim/scenario.hpp"

using namespace mcsim;

namespace {

std::string repo(const std::string& rel) {
    return std::string(MCSIM_SOURCE_DIR) + "/" + rel;
}

Tick usage_of(const Engine& eng, ThreadId t, Tick lo, Tick hi) {
    Tick sum = 0;
    for (const Span& s : eng.spans()) {
        if (s.thread != t) continue;
        Tick b = std::max(s.begin, lo), e = std::min(s.end, hi);
        if (b < e) sum += e - b;
    }
    return sum;
}

}  // namespace

TEST_CASE("malformed scenarios fail with a pointed diagnostic") {
    CHECK_THROWS_WITH_AS(load_scenario("{"), doctest::Contains("scenario:"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(load_scenario(R"({"threads": []})"),
                         doctest::Contains("horizon"), ConfigError);
    CHECK_THROWS_WITH_AS(
        load_scenario(
            R"({"horizon": 5, "threads": [{"name": "t", "priority": 1,
                "script": {"steps": [{"op": "fly"}]}}]})"),
        doctest::Contains("unknown op 'fly'"), ConfigError);
    CHECK_THROWS_WITH_AS(
        load_scenario(
            R"({"horizon": 5, "threads": [{"name": "t", "priority": 1,
                "script": {"steps": [{"op": "recv", "ep": "nope"}]}}]})"),
        doctest::Contains("unknown endpoint 'nope'"), ConfigError);
    CHECK_THROWS_WITH_AS(
        load_scenario(
            R"({"horizon": 5, "scs": [{"name": "s", "budget": 1, "period": 2},
                                      {"name": "s", "budget": 1, "period": 2}]})"),
        doctest::Contains("duplicate"), ConfigError);
}

TEST_CASE("a scenario file reproduces the three-reservation split") {
    Scenario s = load_scenario_file(repo("scenarios/budget-ex-a.json"));
    s.run();
    CHECK(usage_of(*s.engine, s.thread("A"), 0, 20) == 4);
    CHECK(usage_of(*s.engine, s.thread("B"), 0, 20) == 10);
    CHECK(usage_of(*s.engine, s.thread("C"), 0, 20) == 6);
    Summary sum = summarize(s);
    CHECK(sum.misses.empty());
    CHECK(sum.time_conserved);
    CHECK(sum.idle == 0);
    std::string csv = summary_csv(sum);
    CHECK(csv.find("thread_cpu,A,4") != std::string::npos);
    CHECK(csv.find("meta,time_conserved,1") != std::string::npos);
}

TEST_CASE("fixed seed, fixed scenario: byte-identical traces") {
    for (const char* name :
         {"budget-ex-a.json", "mc-params-low.json", "mc-handler.json",
          "passive-server.json", "rollback.json"}) {
        auto once = [&] {
            Scenario s = load_scenario_file(repo(std::string("scenarios/") + name));
            s.run();
            return s.engine->trace_log().to_csv();
        };
        std::string a = once();
        CHECK(a == once());
        CHECK(a.size() > 100);
    }
}

TEST_CASE("per-thread/per-SC accounting plus idle covers every tick") {
    for (const char* name : {"mc-params-low.json", "mc-params-high.json",
                             "mc-handler.json", "passive-server.json"}) {
        Scenario s = load_scenario_file(repo(std::string("scenarios/") + name));
        s.run();
        Summary sum = summarize(s);
        INFO(name);
        CHECK(sum.time_conserved);
        CHECK(sum.charged_total + sum.idle == sum.horizon);
    }
}

TEST_CASE("high-mode parameters starve the long-period task") {
    Scenario s = load_scenario_file(repo("scenarios/mc-params-high.json"));
    s.run();
    Summary sum = summarize(s);
    bool t1_missed = false;
    for (const MissRecord& m : sum.misses) {
        CHECK(m.thread != "T5");
        CHECK(m.thread != "T4");
        if (m.thread == "T1") t1_missed = true;
    }
    CHECK(t1_missed);
}

TEST_CASE("replaying a trace's external events reproduces the trace") {
    const char* text = R"({
      "horizon": 30,
      "notifications": ["tick"],
      "scs": [{"name": "w.sc", "budget": 30, "period": 30}],
      "threads": [
        {"name": "w", "priority": 3, "sc": "w.sc",
         "script": {"loop": 0, "steps": [
           {"op": "wait", "ntfn": "tick"},
           {"op": "compute", "amount": 2, "job": true}
         ]}}
      ]
    })";
    auto run_with = [&](const std::vector<Tick>& at) {
        Scenario s = load_scenario(text);
        for (Tick t : at) s.engine->add_external_signal(t, s.notifications.at("tick"));
        s.run();
        return s.engine->trace_log();
    };
    TraceLog first = run_with({3, 9, 20});
    std::vector<Tick> harvested;
    for (const TraceRecord& r : first.records())
        if (r.category == "ext-signal" && r.subject == "tick")
            harvested.push_back(r.time);
    CHECK(harvested == std::vector<Tick>{3, 9, 20});
    CHECK(run_with(harvested).to_csv() == first.to_csv());
}

TEST_CASE("checkpointed server state survives a rollback") {
    Scenario s = load_scenario_file(repo("scenarios/rollback.json"));
    // the first client donates a 5-tick budget against a 10-tick request:
    // the server faults mid-request and the handler rolls it back
    s.engine->run(7);
    Kernel& k = s.engine->kernel();
    ThreadId server = s.thread("server");
    ThreadId c1 = s.thread("c1");
    CHECK(k.thread(c1).pending_result.err == Err::Aborted);
    CHECK(k.thread(server).state == ThreadState::BlockedRecv);
    auto* script = dynamic_cast<ScriptBehavior*>(s.engine->behavior(server));
    REQUIRE(script != nullptr);
    CHECK(script->data() == 100);  // the committed value, not the dirty 999

    // the second client's request is served cleanly after the reset
    s.engine->run(s.horizon);
    ThreadId c2 = s.thread("c2");
    CHECK(k.thread(c2).pending_result.err == Err::Ok);
    CHECK(k.thread(c2).pending_result.value == 108);  // badge 8 + 100
    CHECK(k.sc(s.sc("c1.sc")).total_charged == 5);
    CHECK(k.thread(server).cpu_time == 15);  // 5 wasted + 10 for c2
}
