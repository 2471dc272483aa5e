#include <cmath>
#include <cstdint>

#include "doctest.h"
#include "motkit/rng.hpp"

using motkit::Rng;

TEST_CASE("rng: matches the published splitmix64 vectors for seed 0") {
    Rng rng(0);
    CHECK(rng.next_u64() == UINT64_C(0xE220A8397B1DCDAF));
    CHECK(rng.next_u64() == UINT64_C(0x6E789E6AA1B965F4));
    CHECK(rng.next_u64() == UINT64_C(0x06C45D188009454F));
}

TEST_CASE("rng: identical seeds replay identical sequences") {
    Rng a(20260814), b(20260814);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: streams with different purposes or indices diverge") {
    Rng a = Rng::stream(7, "detector");
    Rng b = Rng::stream(7, "benchmark");
    Rng c = Rng::stream(7, "detector", 1);
    const std::uint64_t va = a.next_u64(), vb = b.next_u64(), vc = c.next_u64();
    CHECK(va != vb);
    CHECK(va != vc);
    CHECK(vb != vc);

    Rng a2 = Rng::stream(7, "detector");
    CHECK(a2.next_u64() == va);
}

TEST_CASE("rng: uniform stays in [0,1) and fills the range") {
    Rng rng(3);
    double lo = 1.0, hi = 0.0, sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("rng: uniform_int covers both inclusive endpoints") {
    Rng rng(4);
    int counts[6] = {};
    for (int i = 0; i < 6000; ++i) {
        const auto v = rng.uniform_int(2, 7);
        REQUIRE(v >= 2);
        REQUIRE(v <= 7);
        counts[v - 2]++;
    }
    for (int c : counts) CHECK(c > 700);
}

TEST_CASE("rng: bernoulli frequency tracks p") {
    Rng rng(5);
    int hits = 0;
    const int n = 50000;
    for (int i = 0; i < n; ++i)
        if (rng.bernoulli(0.3)) ++hits;
    CHECK(static_cast<double>(hits) / n == doctest::Approx(0.3).epsilon(0.05));

    for (int i = 0; i < 100; ++i) {
        CHECK(rng.bernoulli(1.0));
        CHECK_FALSE(rng.bernoulli(0.0));
    }
}

TEST_CASE("rng: normal has the requested moments") {
    Rng rng(6);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal(2.0, 3.0);
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(mean == doctest::Approx(2.0).epsilon(0.02));
    CHECK(std::sqrt(var) == doctest::Approx(3.0).epsilon(0.02));
}
