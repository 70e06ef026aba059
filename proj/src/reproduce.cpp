// Canned figure reproduction: each id runs a fixed experiment, renders
// its measured values as a small key=value text, and diffs that (plus a
// full event trace where one is committed) against the golden files.

#include "mcsim/reproduce.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mcsim/analysis.hpp"
#include "mcsim/scenario.hpp"
#include "mcsim/taskgen.hpp"
#include "mcsim/ulsched.hpp"

namespace mcsim {

namespace {

Tick usage_of(const Engine& eng, ThreadId t, Tick lo, Tick hi) {
    Tick sum = 0;
    for (const Span& s : eng.spans()) {
        if (s.thread != t) continue;
        Tick b = s.begin > lo ? s.begin : lo;
        Tick e = s.end < hi ? s.end : hi;
        if (b < e) sum += e - b;
    }
    return sum;
}

std::string util_str(Tick used, Tick window) {
    std::ostringstream o;
    o.setf(std::ios::fixed);
    o.precision(3);
    o << double(used) / double(window);
    return o.str();
}

// Table-style parameter set used by the fixed-priority figures:
// (budget low, budget high, period), highest priority first.
const std::vector<std::array<Tick, 3>> kMcTasks = {
    {2, 2, 10}, {2, 7, 20}, {5, 5, 25}, {4, 4, 40}, {6, 6, 60}};
const char* kMcNames[5] = {"T5", "T4", "T3", "T2", "T1"};

std::string scenario_path(const std::string& root, const std::string& id) {
    return root + "/scenarios/" + id + ".json";
}

std::string values_budget_ex_a(const std::string& root, std::string* trace) {
    Scenario s = load_scenario_file(scenario_path(root, "budget-ex-a"));
    s.run();
    std::ostringstream o;
    for (const char* n : {"A", "B", "C"})
        o << "u." << n << "=" << util_str(usage_of(*s.engine, s.thread(n), 0, 20), 20)
          << "\n";
    o << "idle=" << s.engine->idle_time() << "\n";
    o << "misses=" << summarize(s).misses.size() << "\n";
    *trace = s.engine->trace_log().to_csv();
    return o.str();
}

std::string values_budget_ex_b(const std::string& root, std::string* trace) {
    Scenario s = load_scenario_file(scenario_path(root, "budget-ex-b"));
    s.run();
    Engine& eng = *s.engine;
    std::ostringstream o;
    for (const char* n : {"rr1", "rr2", "lo"})
        o << "u." << n << "=" << util_str(usage_of(eng, s.thread(n), 0, 20), 20)
          << "\n";
    bool alternating = true;
    ThreadId prev;
    for (const Span& sp : eng.spans()) {
        if (sp.end - sp.begin != 1 || (prev.valid() && sp.thread == prev))
            alternating = false;
        prev = sp.thread;
    }
    o << "alternating=" << (alternating ? 1 : 0) << "\n";
    *trace = eng.trace_log().to_csv();
    return o.str();
}

std::string values_mc_params(const std::string& root, bool high) {
    Scenario s = load_scenario_file(
        scenario_path(root, high ? "mc-params-high" : "mc-params-low"));
    s.run();
    Summary sum = summarize(s);

    std::vector<TaskParams> set;
    for (const auto& t : kMcTasks) set.push_back({high ? t[1] : t[0], t[2]});
    std::vector<Tick> resp = response_times(set);

    std::ostringstream o;
    if (!high) {
        o << "misses=" << sum.misses.size() << "\n";
    } else {
        std::size_t t1 = 0;
        for (const MissRecord& m : sum.misses)
            if (m.thread == "T1") ++t1;
        o << "T1_misses=" << t1 << "\n";
    }
    for (std::size_t i = 0; i < resp.size(); ++i) {
        o << "R." << kMcNames[i] << "=";
        if (resp[i] == kNever)
            o << "never";
        else
            o << resp[i];
        o << "\n";
    }
    Rational u = total_utilization(set);
    o << "util=" << util_str(Tick(u.num()), Tick(u.den())) << "\n";
    if (high)
        o << "ll_bound4_exceeded=" << (u.to_double() > ll_bound(4) ? 1 : 0) << "\n";
    return o.str();
}

std::string values_mode_switch() {
    std::ostringstream o;
    std::uint64_t per_boost = 0;
    bool linear = true;
    for (unsigned level = 1; level <= 3; ++level) {
        KernelConfig cfg;
        cfg.criticality_levels = 4;
        Kernel k(cfg);
        ThreadId root_t = k.add_thread("root", 0);
        k.grant_all(root_t);
        const unsigned pop[4] = {32, 16, 8, 4};
        for (unsigned c = 0; c < 4; ++c)
            for (unsigned i = 0; i < pop[c]; ++i) {
                ThreadId t = k.add_thread(
                    "t" + std::to_string(c) + "_" + std::to_string(i),
                    1 + c * 10 + i % 7, c);
                k.grant_all(t);
                ScId s = k.add_sc("s", 1, 1000);
                k.bind_sc(t, s, t);
                k.start_thread(t, t);
            }
        auto r = k.set_system_criticality(root_t, level);
        o << "boost.to" << level << "=" << r.value << "\n";
        std::uint64_t ops = k.ledger()["crit-op"];
        if (r.value == 0 || ops % r.value != 0) linear = false;
        std::uint64_t kk = r.value ? ops / r.value : 0;
        if (per_boost == 0) per_boost = kk;
        if (kk != per_boost) linear = false;
    }
    o << "crit_ops_per_boost=" << (linear ? per_boost : 0) << "\n";
    return o.str();
}

std::string values_edf_sweep() {
    std::ostringstream o;
    std::vector<Tick> grid = divisors_in_range(100000, 10000, 100000);
    for (unsigned set = 1; set <= 10; ++set) {
        unsigned n = 2 + set % 7;  // 2..8 tasks
        std::vector<double> utils = randfixedsum(n, 1.0, set);
        std::mt19937_64 rng(0x5eedULL + set);
        std::vector<std::pair<Tick, Tick>> ct;
        for (double u : utils) {
            Tick period = grid[rng() % grid.size()];
            Tick c = std::max<Tick>(1, Tick(std::floor(u * double(period))));
            ct.emplace_back(c, period);
        }
        // floor keeps the sum under 100%; the minimum-one-tick rule can
        // push it back over, so trim the largest jobs until it fits
        auto load = [&] {
            Tick acc = 0;
            for (auto& [c, t] : ct) acc += c * (100000 / t);
            return acc;
        };
        while (load() > 100000) {
            auto big = ct.begin();
            for (auto it = ct.begin(); it != ct.end(); ++it)
                if (it->first * (100000 / it->second) >
                    big->first * (100000 / big->second))
                    big = it;
            big->first -= 1;
        }
        Tick hp = 1;
        for (auto& [c, t] : ct) hp = std::lcm(hp, t);
        ul::EdfStats st = ul::edf_simulate(ct, hp);
        std::uint64_t misses =
            std::accumulate(st.task_misses.begin(), st.task_misses.end(),
                            std::uint64_t{0});
        o << "set" << set << "_misses=" << misses << "\n";
    }
    // the overloaded variant: same demand profile as the fixed-priority
    // high-mode figure, fed to EDF
    std::vector<std::pair<Tick, Tick>> over = {
        {2, 10}, {7, 20}, {5, 25}, {8, 40}, {12, 60}};
    ul::EdfStats st = ul::edf_simulate(over, 600);
    std::uint64_t misses = std::accumulate(
        st.task_misses.begin(), st.task_misses.end(), std::uint64_t{0});
    unsigned tasks_missing = 0;
    for (auto m : st.task_misses)
        if (m > 0) ++tasks_missing;
    o << "overload_misses=" << misses << "\n";
    o << "overload_tasks_missing=" << tasks_missing << "\n";
    return o.str();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) return {};
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::filesystem::create_directories(
        std::filesystem::path(path).parent_path());
    std::ofstream out(path);
    out << content;
}

bool diff_one(const std::string& label, const std::string& path,
              const std::string& got, bool update, std::ostringstream& report) {
    if (update) {
        write_file(path, got);
        report << label << ": golden updated\n";
        return true;
    }
    std::string want = read_file(path);
    if (want.empty()) {
        report << label << ": golden file missing (" << path << ")\n";
        return false;
    }
    if (want == got) {
        report << label << ": match\n";
        return true;
    }
    report << label << ": MISMATCH\n--- expected\n" << want << "--- got\n" << got;
    return false;
}

}  // namespace

std::vector<std::string> figure_ids() {
    return {"budget-ex-a",    "budget-ex-b",        "mc-params-low",
            "mc-params-high", "mode-switch-counts", "edf-sweep"};
}

FigureResult reproduce_figure(const std::string& id, const std::string& root,
                              bool update) {
    std::string values;
    std::string trace;  // empty: no trace golden for this figure
    if (id == "budget-ex-a")
        values = values_budget_ex_a(root, &trace);
    else if (id == "budget-ex-b")
        values = values_budget_ex_b(root, &trace);
    else if (id == "mc-params-low")
        values = values_mc_params(root, false);
    else if (id == "mc-params-high")
        values = values_mc_params(root, true);
    else if (id == "mode-switch-counts")
        values = values_mode_switch();
    else if (id == "edf-sweep")
        values = values_edf_sweep();
    else
        throw std::invalid_argument("unknown figure id: " + id);

    std::string dir = root + "/data/golden/";
    std::ostringstream report;
    bool ok = diff_one("values", dir + id + ".txt", values, update, report);
    if (!trace.empty())
        ok &= diff_one("trace", dir + id + ".trace.csv", trace, update, report);
    return {ok, report.str()};
}

}  // namespace mcsim
