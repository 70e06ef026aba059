#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcsim/types.hpp"

namespace mcsim {

/// A reservation with an implicit deadline equal to its period.
struct TaskParams {
    Tick budget = 0;
    Tick period = 1;
};

/// Exact rational arithmetic for utilization sums. Normalized, den > 0.
/// Throws std::overflow_error when a value leaves the 64-bit range.
class Rational {
public:
    Rational() = default;
    Rational(std::int64_t num, std::int64_t den);

    [[nodiscard]] std::int64_t num() const { return num_; }
    [[nodiscard]] std::int64_t den() const { return den_; }
    [[nodiscard]] double to_double() const {
        return static_cast<double>(num_) / static_cast<double>(den_);
    }

    Rational operator+(const Rational& o) const;
    Rational operator-(const Rational& o) const;
    Rational operator*(const Rational& o) const;
    bool operator==(const Rational& o) const = default;
    [[nodiscard]] int compare(const Rational& o) const;
    bool operator<(const Rational& o) const { return compare(o) < 0; }
    bool operator<=(const Rational& o) const { return compare(o) <= 0; }
    bool operator>(const Rational& o) const { return compare(o) > 0; }
    bool operator>=(const Rational& o) const { return compare(o) >= 0; }

    [[nodiscard]] std::string str() const;

private:
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

/// Sum of budget/period over the set, computed exactly.
Rational total_utilization(const std::vector<TaskParams>& tasks);

/// The rate-monotonic utilization bound n(2^(1/n) - 1).
double ll_bound(std::size_t n);

/// Least common multiple of all periods. Throws std::overflow_error if it
/// does not fit a Tick.
Tick hyperperiod(const std::vector<TaskParams>& tasks);

/// Exact worst-case response times under fixed-priority preemptive
/// scheduling with distinct priorities. `tasks` ordered highest priority
/// first. Entries that exceed their period come back as kNever.
std::vector<Tick> response_times(const std::vector<TaskParams>& tasks);

/// All response times within their periods.
bool rta_schedulable(const std::vector<TaskParams>& tasks);

}  // namespace mcsim
