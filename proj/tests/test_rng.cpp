#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "autolap/rng.hpp"

using namespace autolap;

TEST_CASE("same seed, same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
    CHECK(same == 0);
}

TEST_CASE("named substreams are stable and distinct") {
    Rng a = Rng::substream(7, "actor");
    Rng a2 = Rng::substream(7, "actor");
    Rng c = Rng::substream(7, "critic");
    CHECK(a.next_u64() == a2.next_u64());
    Rng a3 = Rng::substream(7, "actor");
    CHECK(a3.next_u64() != c.next_u64());

    Rng i0 = Rng::substream(7, "seed", 0);
    Rng i1 = Rng::substream(7, "seed", 1);
    CHECK(i0.next_u64() != i1.next_u64());
}

TEST_CASE("uniform01 range and mean") {
    Rng r(9);
    double sum = 0;
    for (int i = 0; i < 100000; ++i) {
        double u = r.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("uniform_int covers the full inclusive range") {
    Rng r(5);
    std::set<int> seen;
    for (int i = 0; i < 2000; ++i) {
        int v = r.uniform_int(3, 9);
        CHECK(v >= 3);
        CHECK(v <= 9);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("normal moments") {
    Rng r(11);
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        s += x;
        s2 += x * x;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(mean == doctest::Approx(0.0).epsilon(1).scale(0.02));
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("uniform bounds") {
    Rng r(13);
    for (int i = 0; i < 1000; ++i) {
        double v = r.uniform(-2.5, 7.5);
        CHECK(v >= -2.5);
        CHECK(v < 7.5);
    }
}
