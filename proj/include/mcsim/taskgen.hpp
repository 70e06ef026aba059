#pragma once

#include <cstdint>
#include <vector>

#include "mcsim/analysis.hpp"
#include "mcsim/types.hpp"

namespace mcsim {

/// Draw n values in (0,1] that sum to `total`, uniformly over that slice
/// of the hypercube (Stafford's fixed-sum algorithm). Requires
/// 0 < total <= n; throws std::invalid_argument otherwise.
std::vector<double> randfixedsum(unsigned n, double total, std::uint64_t seed);

struct GenTask {
    Tick budget = 1;
    Tick period = 1;
    unsigned priority = 0;  // rate-monotonic: shorter period = higher
    double util = 0;        // achieved budget/period after rounding
};

struct TaskSet {
    std::vector<GenTask> tasks;
    double requested_u = 0;
    double achieved_u = 0;

    [[nodiscard]] std::vector<TaskParams> params_by_priority() const;
};

/// Build a task set from per-task utilizations: periods drawn
/// log-uniformly in [period_lo, period_hi] ticks, budgets rounded
/// half-up with a floor of one tick, priorities rate-monotonic.
TaskSet make_taskset(const std::vector<double>& utils, Tick period_lo,
                     Tick period_hi, std::uint64_t seed);

/// Same, but periods drawn uniformly from an explicit list of choices
/// (used to bound hyperperiods in sweep experiments).
TaskSet make_taskset(const std::vector<double>& utils,
                     const std::vector<Tick>& period_choices,
                     std::uint64_t seed);

/// All divisors of `value` that lie in [lo, hi], ascending.
std::vector<Tick> divisors_in_range(Tick value, Tick lo, Tick hi);

}  // namespace mcsim
