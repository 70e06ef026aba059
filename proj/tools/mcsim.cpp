// Command-line front end: run scenarios, analyze task sets, generate
// random ones, reproduce the canned figures and re-check invariants.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcsim/analysis.hpp"
#include "mcsim/reproduce.hpp"
#include "mcsim/scenario.hpp"
#include "mcsim/taskgen.hpp"

using namespace mcsim;
using nlohmann::json;

namespace {

int cmd_run(const std::string& path, const std::string& trace_out,
            const std::string& summary_out) {
    Scenario s = load_scenario_file(path);
    s.run();
    Summary sum = summarize(s);
    std::string csv = summary_csv(sum);
    if (!summary_out.empty())
        std::ofstream(summary_out) << csv;
    else
        std::cout << csv;
    if (!trace_out.empty()) s.engine->trace_log().write_csv(trace_out);
    if (!sum.time_conserved) {
        std::cerr << "warning: charged time + idle != horizon\n";
        return 1;
    }
    return 0;
}

std::vector<TaskParams> load_taskset(const std::string& path,
                                     std::vector<std::string>* names) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open task set: " + path);
    json root = json::parse(in);
    struct Row {
        std::string name;
        TaskParams p;
        long long prio;
    };
    std::vector<Row> rows;
    long long next = 0;
    for (const json& j : root.at("tasks")) {
        Row r;
        r.name = j.value("name", "t" + std::to_string(rows.size()));
        r.p.budget = j.at("budget").get<Tick>();
        r.p.period = j.at("period").get<Tick>();
        r.prio = j.contains("priority") ? j["priority"].get<long long>() : --next;
        rows.push_back(r);
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.prio > b.prio; });
    std::vector<TaskParams> out;
    for (const Row& r : rows) {
        out.push_back(r.p);
        if (names) names->push_back(r.name);
    }
    return out;
}

int cmd_analyze(const std::string& path) {
    std::vector<std::string> names;
    std::vector<TaskParams> set = load_taskset(path, &names);
    Rational u = total_utilization(set);
    std::vector<Tick> resp = response_times(set);
    std::cout << "tasks=" << set.size() << "\n";
    std::cout << "utilization=" << u.str() << " (" << u.to_double() << ")\n";
    std::cout << "ll_bound=" << ll_bound(set.size()) << "\n";
    std::cout << "hyperperiod=" << hyperperiod(set) << "\n";
    bool ok = true;
    for (std::size_t i = 0; i < set.size(); ++i) {
        std::cout << "R." << names[i] << "=";
        if (resp[i] == kNever) {
            std::cout << "unschedulable";
            ok = false;
        } else {
            std::cout << resp[i];
        }
        std::cout << " (B=" << set[i].budget << " T=" << set[i].period << ")\n";
    }
    std::cout << "verdict=" << (ok ? "schedulable" : "unschedulable") << "\n";
    return 0;
}

int cmd_gen(unsigned n, double u, unsigned sets, std::uint64_t seed,
            Tick period_lo, Tick period_hi, const std::string& out_prefix) {
    for (unsigned i = 0; i < sets; ++i) {
        std::uint64_t s = seed + i;
        TaskSet ts = make_taskset(randfixedsum(n, u, s), period_lo, period_hi, s);
        json root;
        root["requested_u"] = ts.requested_u;
        root["achieved_u"] = ts.achieved_u;
        root["tasks"] = json::array();
        for (const GenTask& t : ts.tasks)
            root["tasks"].push_back({{"name", "t" + std::to_string(t.priority)},
                                     {"budget", t.budget},
                                     {"period", t.period},
                                     {"priority", t.priority}});
        std::string text = root.dump(2) + "\n";
        if (out_prefix.empty()) {
            std::cout << text;
        } else {
            std::string path = out_prefix + std::to_string(i) + ".json";
            std::ofstream(path) << text;
            std::cout << path << "\n";
        }
    }
    return 0;
}

int cmd_reproduce(const std::string& id, const std::string& root, bool update) {
    bool all_ok = true;
    std::vector<std::string> ids =
        id == "all" ? figure_ids() : std::vector<std::string>{id};
    for (const std::string& fid : ids) {
        FigureResult r = reproduce_figure(fid, root, update);
        std::cout << fid << ": " << (r.pass ? "pass" : "FAIL") << "\n" << r.report;
        all_ok &= r.pass;
    }
    return all_ok ? 0 : 1;
}

int cmd_check(const std::string& path) {
    // force the per-event invariant checker on, whatever the file says
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    json root = json::parse(in);
    root["config"]["check_invariants"] = true;
    auto once = [&] {
        Scenario s = load_scenario(root.dump());
        s.run();
        return std::pair{summarize(s), s.engine->trace_log().to_csv()};
    };
    auto [sum1, trace1] = once();
    auto [sum2, trace2] = once();
    bool conserved = sum1.time_conserved;
    bool deterministic = trace1 == trace2;
    std::cout << "invariants=ok\n";  // the checker throws on violation
    std::cout << "time_conservation=" << (conserved ? "ok" : "VIOLATED") << "\n";
    std::cout << "deterministic=" << (deterministic ? "ok" : "VIOLATED") << "\n";
    return conserved && deterministic ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixed-criticality scheduling simulator"};
    app.require_subcommand(1);

    std::string scenario, trace_out, summary_out;
    std::uint64_t seed = 1;
    auto* run = app.add_subcommand("run", "run a scenario file");
    run->add_option("scenario", scenario)->required();
    run->add_option("--trace", trace_out, "write the event trace CSV here");
    run->add_option("--summary", summary_out, "write the summary CSV here");
    run->add_option("--seed", seed, "accepted for interface stability; runs are deterministic");

    std::string taskset;
    auto* analyze = app.add_subcommand("analyze", "response-time analysis of a task set");
    analyze->add_option("taskset", taskset)->required();

    unsigned gen_n = 4, gen_sets = 1;
    double gen_u = 0.7;
    std::uint64_t gen_seed = 1;
    Tick plo = 10000, phi = 100000;
    std::string out_prefix;
    auto* gen = app.add_subcommand("gen", "generate random task sets");
    gen->add_option("--n", gen_n, "tasks per set");
    gen->add_option("--u", gen_u, "total utilization");
    gen->add_option("--sets", gen_sets, "number of sets");
    gen->add_option("--seed", gen_seed);
    gen->add_option("--period-lo", plo);
    gen->add_option("--period-hi", phi);
    gen->add_option("--out", out_prefix, "file prefix; stdout when absent");

    std::string fig, root = ".";
    bool update = false;
    auto* rep = app.add_subcommand("reproduce", "re-run a canned figure and diff goldens");
    rep->add_option("figure", fig, "figure id, or 'all'")->required();
    rep->add_option("--root", root, "repository root (scenarios/ and data/)");
    rep->add_flag("--update", update, "rewrite the golden files");

    std::string check_path;
    auto* chk = app.add_subcommand("check-invariants",
                                   "run with the invariant checker forced on");
    chk->add_option("scenario", check_path)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(scenario, trace_out, summary_out);
        if (*analyze) return cmd_analyze(taskset);
        if (*gen)
            return cmd_gen(gen_n, gen_u, gen_sets, gen_seed, plo, phi, out_prefix);
        if (*rep) return cmd_reproduce(fig, root, update);
        if (*chk) return cmd_check(check_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
