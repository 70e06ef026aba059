#include <doctest.h>

#include <cmath>

#include "mcsim/analysis.hpp"

using namespace mcsim;

TEST_CASE("rational arithmetic is exact and normalized") {
    Rational a(1, 3), b(1, 6);
    CHECK((a + b) == Rational(1, 2));
    CHECK((a - b) == Rational(1, 6));
    CHECK((a * b) == Rational(1, 18));
    CHECK(Rational(2, 4) == Rational(1, 2));
    CHECK(Rational(1, 3) < Rational(1, 2));
    CHECK(Rational(-1, -2) == Rational(1, 2));
    CHECK(Rational(1, -2).num() == -1);
    CHECK_THROWS(Rational(1, 0));
}

TEST_CASE("utilization sums stay rational") {
    std::vector<TaskParams> t{{1, 4}, {2, 6}, {3, 12}};
    Rational u = total_utilization(t);
    CHECK(u == Rational(5, 6));
    CHECK(u.to_double() == doctest::Approx(5.0 / 6.0));
}

TEST_CASE("utilization bound") {
    CHECK(ll_bound(1) == doctest::Approx(1.0));
    CHECK(ll_bound(2) == doctest::Approx(2.0 * (std::sqrt(2.0) - 1.0)));
    // decreases monotonically towards ln 2
    double prev = ll_bound(1);
    for (std::size_t n = 2; n <= 64; ++n) {
        double b = ll_bound(n);
        CHECK(b < prev);
        prev = b;
    }
    CHECK(ll_bound(100000) == doctest::Approx(std::log(2.0)).epsilon(1e-4));
    CHECK(ll_bound(100000) > std::log(2.0));
}

TEST_CASE("hyperperiod") {
    CHECK(hyperperiod({{1, 10}, {1, 4}, {1, 25}}) == 100);
    CHECK(hyperperiod({{1, 7}}) == 7);
    CHECK(hyperperiod({}) == 1);
}

TEST_CASE("exact response times, hand-computed fixpoints") {
    // R1 = 1; R2 = 3; R3 iterates 3,6,7,9,10,10
    std::vector<TaskParams> t{{1, 4}, {2, 6}, {3, 12}};
    auto r = response_times(t);
    REQUIRE(r.size() == 3);
    CHECK(r[0] == 1);
    CHECK(r[1] == 3);
    CHECK(r[2] == 10);
    CHECK(rta_schedulable(t));
}

TEST_CASE("response time analysis flags overload") {
    std::vector<TaskParams> t{{3, 5}, {3, 6}};
    auto r = response_times(t);
    CHECK(r[0] == 3);
    CHECK(r[1] == kNever);
    CHECK_FALSE(rta_schedulable(t));
}

TEST_CASE("utilization at most the bound implies schedulable") {
    // a set sitting just under the 3-task bound
    std::vector<TaskParams> t{{1, 4}, {1, 5}, {1, 13}};
    double u = total_utilization(t).to_double();
    REQUIRE(u < ll_bound(3));
    CHECK(rta_schedulable(t));
}

TEST_CASE("full utilization harmonic set is schedulable") {
    std::vector<TaskParams> t{{1, 2}, {1, 4}, {1, 4}};
    CHECK(total_utilization(t) == Rational(1, 1));
    CHECK(rta_schedulable(t));
}
