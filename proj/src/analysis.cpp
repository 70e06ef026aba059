#include "mcsim/analysis.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mcsim {

namespace {

using Wide = __int128;

std::int64_t narrow(Wide v) {
    if (v > Wide(INT64_MAX) || v < Wide(INT64_MIN))
        throw std::overflow_error("rational arithmetic overflow");
    return static_cast<std::int64_t>(v);
}

Wide wgcd(Wide a, Wide b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b) {
        Wide t = a % b;
        a = b;
        b = t;
    }
    return a;
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
    if (den == 0) throw std::invalid_argument("rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g == 0) g = 1;
    num_ = num / g;
    den_ = den / g;
}

Rational Rational::operator+(const Rational& o) const {
    Wide n = Wide(num_) * o.den_ + Wide(o.num_) * den_;
    Wide d = Wide(den_) * o.den_;
    Wide g = wgcd(n, d);
    if (g == 0) g = 1;
    return Rational(narrow(n / g), narrow(d / g));
}

Rational Rational::operator-(const Rational& o) const {
    return *this + Rational(-o.num_, o.den_);
}

Rational Rational::operator*(const Rational& o) const {
    Wide n = Wide(num_) * o.num_;
    Wide d = Wide(den_) * o.den_;
    Wide g = wgcd(n, d);
    if (g == 0) g = 1;
    return Rational(narrow(n / g), narrow(d / g));
}

int Rational::compare(const Rational& o) const {
    Wide l = Wide(num_) * o.den_;
    Wide r = Wide(o.num_) * den_;
    return l < r ? -1 : l > r ? 1 : 0;
}

std::string Rational::str() const {
    return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational total_utilization(const std::vector<TaskParams>& tasks) {
    Rational sum(0, 1);
    for (const TaskParams& t : tasks) {
        if (t.period == 0) throw std::invalid_argument("zero period");
        sum = sum + Rational(static_cast<std::int64_t>(t.budget),
                             static_cast<std::int64_t>(t.period));
    }
    return sum;
}

double ll_bound(std::size_t n) {
    if (n == 0) return 0.0;
    double nd = static_cast<double>(n);
    return nd * (std::pow(2.0, 1.0 / nd) - 1.0);
}

Tick hyperperiod(const std::vector<TaskParams>& tasks) {
    Wide l = 1;
    for (const TaskParams& t : tasks) {
        Wide p = t.period;
        l = l / wgcd(l, p) * p;
        if (l > Wide(UINT64_MAX)) throw std::overflow_error("hyperperiod overflow");
    }
    return static_cast<Tick>(l);
}

std::vector<Tick> response_times(const std::vector<TaskParams>& tasks) {
    std::vector<Tick> out(tasks.size(), kNever);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        Tick r = tasks[i].budget;
        if (r == 0) {
            out[i] = 0;
            continue;
        }
        while (true) {
            Tick demand = tasks[i].budget;
            for (std::size_t j = 0; j < i; ++j) {
                Tick tj = tasks[j].period;
                Tick jobs = (r + tj - 1) / tj;  // ceil(r / T_j)
                demand += jobs * tasks[j].budget;
            }
            if (demand == r) {
                out[i] = r;
                break;
            }
            if (demand > tasks[i].period) break;  // diverged past the deadline
            r = demand;
        }
    }
    return out;
}

bool rta_schedulable(const std::vector<TaskParams>& tasks) {
    auto r = response_times(tasks);
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (r[i] == kNever || r[i] > tasks[i].period) return false;
    return true;
}

}  // namespace mcsim
