// Scenario files: a declarative JSON description of a whole simulation —
// kernel constants, objects, per-thread scripts and externally injected
// signals — plus the post-run summary used for golden comparisons.

#include "mcsim/scenario.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mcsim {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
}

const json& need(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) bad(where, std::string("missing field '") + key + "'");
    return *it;
}

std::uint64_t num(const json& j, const char* key, const std::string& where,
                  std::uint64_t dflt) {
    auto it = j.find(key);
    if (it == j.end()) return dflt;
    if (!it->is_number_unsigned()) bad(where, std::string(key) + " must be a non-negative integer");
    return it->get<std::uint64_t>();
}

bool flag(const json& j, const char* key, bool dflt) {
    auto it = j.find(key);
    return it == j.end() ? dflt : it->get<bool>();
}

std::string str(const json& j, const char* key, const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_string()) bad(where, std::string(key) + " must be a string");
    return v.get<std::string>();
}

template <class IdT>
IdT lookup(const std::map<std::string, IdT>& m, const std::string& name,
           const std::string& where, const char* kind) {
    auto it = m.find(name);
    if (it == m.end()) bad(where, std::string("unknown ") + kind + " '" + name + "'");
    return it->second;
}

HandlerAction parse_handler_action(const json& j, const std::string& where) {
    HandlerAction h;
    std::string kind = str(j, "kind", where);
    if (kind == "extend-budget") h.kind = HandlerAction::Kind::ExtendBudget;
    else if (kind == "rollback") h.kind = HandlerAction::Kind::RollbackAndReset;
    else if (kind == "suspend-owner") h.kind = HandlerAction::Kind::SuspendOwner;
    else if (kind == "raise-criticality") h.kind = HandlerAction::Kind::RaiseSystemCriticality;
    else bad(where, "unknown handler action '" + kind + "'");
    h.amount = num(j, "amount", where, 0);
    h.level = static_cast<unsigned>(num(j, "level", where, 0));
    return h;
}

struct StepParser {
    const Scenario& sc;
    ThreadId self;
    ScId home_sc;
    std::string where;

    EpId ep(const json& j, const char* key = "ep") const {
        return lookup(sc.endpoints, str(j, key, where), where, "endpoint");
    }
    NtfnId ntfn(const json& j) const {
        return lookup(sc.notifications, str(j, "ntfn", where), where, "notification");
    }
    ScId scid(const json& j, bool dflt_home) const {
        if (j.contains("sc"))
            return lookup(sc.scs, str(j, "sc", where), where, "sc");
        if (dflt_home && home_sc.valid()) return home_sc;
        bad(where, "missing field 'sc'");
    }
    ThreadId target(const json& j, bool dflt_self) const {
        if (j.contains("target"))
            return lookup(sc.threads, str(j, "target", where), where, "thread");
        if (dflt_self) return self;
        bad(where, "missing field 'target'");
    }

    ScriptBehavior::Step parse(const json& j) const {
        ScriptBehavior::Step s;
        std::string op = str(j, "op", where);
        Action& a = s.action;
        using K = Action::Kind;

        // the badge may be the literal word "data": use the thread's data word
        if (auto it = j.find("badge"); it != j.end()) {
            if (it->is_string() && it->get<std::string>() == "data")
                s.badge_from_data = true;
            else
                a.badge = num(j, "badge", where, 0);
        }

        if (op == "checkpoint") {
            s.op = ScriptBehavior::Step::Op::Checkpoint;
            if (j.contains("ep")) s.resume = ep(j);
            return s;
        }
        if (op == "store") {
            s.op = ScriptBehavior::Step::Op::Store;
            s.value = num(j, "value", where, 0);
            s.from_last = flag(j, "from_last", false);
            return s;
        }

        if (op == "compute") {
            a.kind = K::Compute;
            a.amount = num(j, "amount", where, 0);
            a.job = flag(j, "job", false);
        } else if (op == "call") {
            a.kind = K::Call;
            a.ep = ep(j);
            a.donate = flag(j, "donate", true);
        } else if (op == "reply") {
            a.kind = K::Reply;
        } else if (op == "reply_recv") {
            a.kind = K::ReplyRecv;
            a.ep = ep(j);
        } else if (op == "recv") {
            a.kind = K::Recv;
            a.ep = ep(j);
        } else if (op == "send") {
            a.kind = K::Send;
            a.ep = ep(j);
        } else if (op == "nbsend_wait") {
            a.kind = K::NbSendWait;
            a.ep = ep(j);
            a.ep2 = ep(j, "ep2");
        } else if (op == "signal") {
            a.kind = K::Signal;
            a.ntfn = ntfn(j);
        } else if (op == "wait") {
            a.kind = K::Wait;
            a.ntfn = ntfn(j);
        } else if (op == "signal_recv") {
            a.kind = K::SignalRecv;
            a.ntfn = ntfn(j);
            a.ep = ep(j);
        } else if (op == "yield") {
            a.kind = K::Yield;
            a.sc = scid(j, true);
        } else if (op == "yield_to") {
            a.kind = K::YieldTo;
            a.sc = scid(j, false);
        } else if (op == "consume") {
            a.kind = K::Consume;
            a.sc = scid(j, false);
        } else if (op == "sc_configure") {
            a.kind = K::ScConfigure;
            a.sc = scid(j, false);
            a.amount = num(j, "budget", where, 0);
            a.period = num(j, "period", where, 1);
            a.data = num(j, "data", where, 0);
        } else if (op == "save_caller") {
            a.kind = K::SaveCaller;
            a.target = target(j, true);
            a.slot = str(j, "slot", where);
        } else if (op == "set_caller") {
            a.kind = K::SetCaller;
            a.slot = str(j, "slot", where);
        } else if (op == "swap_caller") {
            a.kind = K::SwapCaller;
            a.slot = str(j, "slot", where);
            a.slot2 = str(j, "slot2", where);
        } else if (op == "fault_reply") {
            a.kind = K::FaultReply;
            a.handler = parse_handler_action(need(j, "action", where), where);
        } else if (op == "set_system_criticality") {
            a.kind = K::SetSystemCriticality;
            a.level = static_cast<unsigned>(num(j, "level", where, 0));
        } else if (op == "set_priority") {
            a.kind = K::SetPriority;
            a.target = target(j, false);
            a.level = static_cast<unsigned>(num(j, "level", where, 0));
        } else if (op == "set_criticality") {
            a.kind = K::SetCriticality;
            a.target = target(j, false);
            a.level = static_cast<unsigned>(num(j, "level", where, 0));
        } else if (op == "bind_sc") {
            a.kind = K::BindSc;
            a.sc = scid(j, false);
            a.target = target(j, false);
        } else if (op == "unbind_sc") {
            a.kind = K::UnbindSc;
            a.sc = scid(j, false);
        } else if (op == "start") {
            a.kind = K::StartThread;
            a.target = target(j, false);
        } else if (op == "suspend") {
            a.kind = K::SuspendThread;
            a.target = target(j, true);
        } else if (op == "program_timer") {
            a.kind = K::ProgramTimer;
            a.ntfn = ntfn(j);
            a.amount = num(j, "amount", where, 0);
            a.absolute = flag(j, "absolute", false);
        } else if (op == "halt") {
            a.kind = K::Halt;
        } else {
            bad(where, "unknown op '" + op + "'");
        }
        return s;
    }
};

}  // namespace

ThreadId Scenario::thread(const std::string& name) const {
    return lookup(threads, name, "scenario", "thread");
}

ScId Scenario::sc(const std::string& name) const {
    return lookup(scs, name, "scenario", "sc");
}

Scenario load_scenario(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }

    KernelConfig cfg;
    if (root.contains("config")) {
        const json& c = root["config"];
        cfg.priority_bits = static_cast<unsigned>(num(c, "priority_bits", "config", 8));
        cfg.criticality_levels =
            static_cast<unsigned>(num(c, "criticality_levels", "config", 1));
        cfg.kernel_wcet = num(c, "kernel_wcet", "config", 1);
        cfg.check_invariants = flag(c, "check_invariants", false);
    }

    Scenario sc;
    sc.horizon = num(root, "horizon", "scenario", 0);
    if (sc.horizon == 0) bad("scenario", "missing or zero 'horizon'");
    sc.engine = std::make_unique<Engine>(cfg);
    Kernel& k = sc.engine->kernel();

    for (const json& j : root.value("scs", json::array())) {
        std::string name = str(j, "name", "scs");
        if (sc.scs.count(name)) bad("scs", "duplicate name '" + name + "'");
        sc.scs[name] = k.add_sc(name, num(j, "budget", "scs", 0),
                                num(j, "period", "scs", 1));
    }
    for (const json& j : root.value("endpoints", json::array())) {
        std::string name = j.is_string() ? j.get<std::string>()
                                         : str(j, "name", "endpoints");
        if (sc.endpoints.count(name)) bad("endpoints", "duplicate name '" + name + "'");
        sc.endpoints[name] = k.add_endpoint(name);
    }
    for (const json& j : root.value("notifications", json::array())) {
        std::string name = j.is_string() ? j.get<std::string>()
                                         : str(j, "name", "notifications");
        if (sc.notifications.count(name))
            bad("notifications", "duplicate name '" + name + "'");
        std::uint64_t badge = j.is_object() ? num(j, "badge", "notifications", 0) : 0;
        sc.notifications[name] = k.add_notification(name, badge);
    }

    const json& threads = root.value("threads", json::array());
    // first pass: create every thread so scripts can name any of them
    for (const json& j : threads) {
        std::string name = str(j, "name", "threads");
        std::string where = "thread " + name;
        if (sc.threads.count(name)) bad("threads", "duplicate name '" + name + "'");
        unsigned prio = static_cast<unsigned>(num(j, "priority", where, 0));
        unsigned crit = static_cast<unsigned>(num(j, "criticality", where, 0));
        unsigned mcp = static_cast<unsigned>(num(j, "mcp", where, prio));
        unsigned mcc = static_cast<unsigned>(num(j, "mcc", where, crit));
        sc.threads[name] = k.add_thread(name, prio, crit, mcp, mcc);
    }
    // second pass: grants, bindings, scripts, start
    for (const json& j : threads) {
        std::string name = j["name"].get<std::string>();
        std::string where = "thread " + name;
        ThreadId t = sc.threads[name];
        if (flag(j, "grant_all", true)) k.grant_all(t);
        if (flag(j, "sched_control", false)) k.grant_sched_control(t);
        ScId home;
        if (j.contains("sc")) {
            home = lookup(sc.scs, str(j, "sc", where), where, "sc");
            Err e = k.bind_sc(t, home, t);
            if (e != Err::Ok)
                bad(where, std::string("bind_sc failed: ") + std::string(to_string(e)));
        }
        if (j.contains("timeout_handler"))
            k.set_timeout_handler(
                t, lookup(sc.endpoints, str(j, "timeout_handler", where), where,
                          "endpoint"));
        if (j.contains("bound_ntfn"))
            k.bind_notification(
                lookup(sc.notifications, str(j, "bound_ntfn", where), where,
                       "notification"),
                t);
        if (Tick dp = num(j, "deadline_period", where, 0); dp > 0)
            sc.deadline_period[name] = dp;

        if (j.contains("script")) {
            const json& script = j["script"];
            int loop = -1;
            if (auto it = script.find("loop"); it != script.end()) {
                if (it->is_boolean())
                    loop = *it ? 0 : -1;
                else
                    loop = it->get<int>();
            }
            std::vector<ScriptBehavior::Step> steps;
            StepParser sp{sc, t, home, where};
            for (const json& stj : need(script, "steps", where))
                steps.push_back(sp.parse(stj));
            sc.engine->set_behavior(
                t, std::make_unique<ScriptBehavior>(std::move(steps), loop));
        }
        if (flag(j, "start", true)) {
            Err e = k.start_thread(t, t);
            if (e != Err::Ok)
                bad(where, std::string("start failed: ") + std::string(to_string(e)));
        }
    }

    for (const json& j : root.value("external_signals", json::array())) {
        sc.engine->add_external_signal(
            num(j, "at", "external_signals", 0),
            lookup(sc.notifications, str(j, "ntfn", "external_signals"),
                   "external_signals", "notification"));
    }
    return sc;
}

Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return load_scenario(buf.str());
}

std::vector<MissRecord> deadline_misses(const Engine& eng, ThreadId t,
                                        const std::string& name, Tick period,
                                        Tick horizon) {
    std::vector<Tick> done;
    for (const JobRecord& j : eng.jobs())
        if (j.thread == t) done.push_back(j.completed);
    std::vector<MissRecord> out;
    Tick due = horizon / period;  // jobs whose deadline falls within the run
    for (Tick kjob = 0; kjob < due; ++kjob) {
        Tick deadline = (kjob + 1) * period;
        Tick completed = kjob < done.size() ? done[kjob] : kNever;
        if (completed > deadline) out.push_back({name, kjob, deadline, completed});
    }
    return out;
}

Summary summarize(const Scenario& s) {
    Summary out;
    const Engine& eng = *s.engine;
    const Kernel& k = eng.kernel();
    out.horizon = eng.now();
    out.idle = eng.idle_time();
    for (std::uint32_t i = 0; i < k.thread_count(); ++i) {
        const Thread& th = k.thread(ThreadId{i});
        out.thread_cpu.emplace_back(th.name, th.cpu_time);
    }
    for (std::uint32_t i = 0; i < k.sc_count(); ++i) {
        const SchedContext& c = k.sc(ScId{i});
        out.sc_charged.emplace_back(c.name, c.total_charged);
        out.charged_total += c.total_charged;
    }
    for (const auto& [name, period] : s.deadline_period) {
        auto m = deadline_misses(eng, s.threads.at(name), name, period, out.horizon);
        out.misses.insert(out.misses.end(), m.begin(), m.end());
    }
    out.ledger = const_cast<Kernel&>(k).ledger();
    out.time_conserved = out.charged_total + out.idle == out.horizon;
    return out;
}

std::string summary_csv(const Summary& s) {
    std::ostringstream o;
    o << "kind,name,value\n";
    o << "meta,horizon," << s.horizon << "\n";
    o << "meta,idle," << s.idle << "\n";
    o << "meta,charged_total," << s.charged_total << "\n";
    o << "meta,time_conserved," << (s.time_conserved ? 1 : 0) << "\n";
    for (const auto& [name, v] : s.thread_cpu) o << "thread_cpu," << name << "," << v << "\n";
    for (const auto& [name, v] : s.sc_charged) o << "sc_charged," << name << "," << v << "\n";
    for (const MissRecord& m : s.misses) {
        o << "miss," << m.thread << ",job=" << m.job << " deadline=" << m.deadline
          << " completed=";
        if (m.completed == kNever)
            o << "never";
        else
            o << m.completed;
        o << "\n";
    }
    for (const auto& [key, v] : s.ledger) o << "ledger," << key << "," << v << "\n";
    return o.str();
}

}  // namespace mcsim
