// Fixed-sum utilization sampling (Stafford's algorithm) and task-set
// construction with log-uniform periods and rate-monotonic priorities.

#include "mcsim/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mcsim {

std::vector<double> randfixedsum(unsigned n, double total, std::uint64_t seed) {
    if (n == 0 || total <= 0.0 || total > static_cast<double>(n))
        throw std::invalid_argument("randfixedsum: need 0 < total <= n");

    // Transition-probability table over the simplices that partition the
    // {x in [0,1]^n : sum x = total} polytope.
    const unsigned k =
        std::min(static_cast<unsigned>(std::floor(total)), n - 1);
    double s = std::clamp(total, static_cast<double>(k),
                          static_cast<double>(k) + 1.0);
    std::vector<double> s1(n), s2(n);
    for (unsigned i = 0; i < n; ++i) {
        s1[i] = s - (static_cast<double>(k) - i);
        s2[i] = (static_cast<double>(k) + n - i) - s;
    }
    const double huge = std::numeric_limits<double>::max();
    const double tiny = std::numeric_limits<double>::denorm_min();
    std::vector<std::vector<double>> w(n, std::vector<double>(n + 2, 0.0));
    std::vector<std::vector<double>> t(n > 1 ? n - 1 : 0,
                                       std::vector<double>(n + 1, 0.0));
    w[0][1] = huge;  // scale only; cancels in the ratios below
    for (unsigned i = 2; i <= n; ++i) {
        for (unsigned c = 0; c < i; ++c) {
            double tmp1 = w[i - 2][c + 1] * s1[c] / i;
            double tmp2 = w[i - 2][c] * s2[n - i + c] / i;
            w[i - 1][c + 1] = tmp1 + tmp2;
            double tmp3 = w[i - 1][c + 1] + tiny;
            t[i - 2][c] = (s2[n - i + c] > s1[c]) ? tmp2 / tmp3
                                                  : 1.0 - tmp1 / tmp3;
        }
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> rt(n > 1 ? n - 1 : 0), rs(n > 1 ? n - 1 : 0);
    for (double& v : rt) v = uni(rng);
    for (double& v : rs) v = uni(rng);

    std::vector<double> x(n, 0.0);
    double sum = 0.0, prod = 1.0;
    unsigned j = k;  // column into t, counting down as we cross boundaries
    for (unsigned i = n - 1; i >= 1; --i) {
        bool e = rt[n - 1 - i] <= t[i - 1][j];
        double sx = std::pow(rs[n - 1 - i], 1.0 / i);
        sum += (1.0 - sx) * prod * s / (i + 1);
        prod *= sx;
        x[n - 1 - i] = sum + prod * (e ? 1.0 : 0.0);
        if (e) {
            s -= 1.0;
            --j;
        }
    }
    x[n - 1] = sum + prod * s;

    // random row order so no position is biased
    std::vector<double> rp(n);
    for (double& v : rp) v = uni(rng);
    std::vector<unsigned> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    std::sort(perm.begin(), perm.end(),
              [&](unsigned a, unsigned b) { return rp[a] < rp[b]; });
    std::vector<double> out(n);
    for (unsigned i = 0; i < n; ++i) out[perm[i]] = x[i];
    return out;
}

namespace {

TaskSet assemble(const std::vector<double>& utils, std::vector<Tick> periods) {
    TaskSet ts;
    ts.requested_u = std::accumulate(utils.begin(), utils.end(), 0.0);
    const std::size_t n = utils.size();
    ts.tasks.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        GenTask& g = ts.tasks[i];
        g.period = periods[i];
        g.budget = std::max<Tick>(
            1, static_cast<Tick>(std::floor(utils[i] * g.period + 0.5)));
        g.budget = std::min(g.budget, g.period);
        g.util = static_cast<double>(g.budget) / static_cast<double>(g.period);
        ts.achieved_u += g.util;
    }
    // rate-monotonic: shorter period = higher priority, ties by index
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ts.tasks[a].period > ts.tasks[b].period;
    });
    for (std::size_t pos = 0; pos < n; ++pos)
        ts.tasks[order[pos]].priority = static_cast<unsigned>(pos + 1);
    return ts;
}

}  // namespace

TaskSet make_taskset(const std::vector<double>& utils, Tick period_lo,
                     Tick period_hi, std::uint64_t seed) {
    if (period_lo == 0 || period_hi < period_lo)
        throw std::invalid_argument("make_taskset: bad period range");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(
        std::log(static_cast<double>(period_lo)),
        std::log(static_cast<double>(period_hi)));
    std::vector<Tick> periods(utils.size());
    for (Tick& p : periods)
        p = std::clamp<Tick>(static_cast<Tick>(std::llround(std::exp(uni(rng)))),
                             period_lo, period_hi);
    return assemble(utils, std::move(periods));
}

TaskSet make_taskset(const std::vector<double>& utils,
                     const std::vector<Tick>& period_choices,
                     std::uint64_t seed) {
    if (period_choices.empty())
        throw std::invalid_argument("make_taskset: no period choices");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, period_choices.size() - 1);
    std::vector<Tick> periods(utils.size());
    for (Tick& p : periods) p = period_choices[pick(rng)];
    return assemble(utils, std::move(periods));
}

std::vector<TaskParams> TaskSet::params_by_priority() const {
    std::vector<const GenTask*> order;
    order.reserve(tasks.size());
    for (const GenTask& g : tasks) order.push_back(&g);
    std::sort(order.begin(), order.end(), [](const GenTask* a, const GenTask* b) {
        return a->priority > b->priority;
    });
    std::vector<TaskParams> out;
    out.reserve(tasks.size());
    for (const GenTask* g : order) out.push_back({g->budget, g->period});
    return out;
}

std::vector<Tick> divisors_in_range(Tick value, Tick lo, Tick hi) {
    std::vector<Tick> out;
    for (Tick d = std::max<Tick>(lo, 1); d <= hi && d <= value; ++d)
        if (value % d == 0) out.push_back(d);
    return out;
}

}  // namespace mcsim
