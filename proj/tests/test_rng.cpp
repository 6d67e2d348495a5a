#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "plugid/rng.hpp"

using plugid::mix_seed;
using plugid::Rng;

TEST_CASE("identical seeds give identical streams") {
    Rng a(42), b(42);
    for (int k = 0; k < 1000; ++k) {
        REQUIRE(a.uniform() == b.uniform());
    }
    Rng c(42), d(43);
    bool differs = false;
    for (int k = 0; k < 10 && !differs; ++k) {
        differs = c.uniform() != d.uniform();
    }
    REQUIRE(differs);
}

TEST_CASE("uniform stays in [0,1) with the expected mean") {
    Rng rng(7);
    double sum = 0.0;
    const int n = 100000;
    for (int k = 0; k < n; ++k) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    REQUIRE(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("ranged uniform respects its bounds") {
    Rng rng(9);
    for (int k = 0; k < 1000; ++k) {
        const double u = rng.uniform(-3.0, 5.0);
        REQUIRE(u >= -3.0);
        REQUIRE(u < 5.0);
    }
}

TEST_CASE("below covers [0,n) roughly uniformly") {
    Rng rng(11);
    const std::uint64_t n = 7;
    std::vector<int> counts(n, 0);
    const int draws = 70000;
    for (int k = 0; k < draws; ++k) {
        const std::uint64_t v = rng.below(n);
        REQUIRE(v < n);
        ++counts[v];
    }
    const double expected = static_cast<double>(draws) / static_cast<double>(n);
    for (const int c : counts) {
        REQUIRE(std::abs(c - expected) < 0.2 * expected);
    }
}

TEST_CASE("normal draws match the requested moments") {
    Rng rng(13);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int k = 0; k < n; ++k) {
        const double v = rng.normal(1.0);
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sumsq / n - mean * mean);
    REQUIRE(std::abs(mean) < 0.02);
    REQUIRE(std::abs(sd - 1.0) < 0.02);

    Rng scaled_a(17), scaled_b(17);
    for (int k = 0; k < 10; ++k) {
        REQUIRE(scaled_a.normal(3.0) == 3.0 * scaled_b.normal(1.0));
    }
}

TEST_CASE("shuffle permutes without loss") {
    Rng rng(19);
    std::vector<int> v(100);
    for (int k = 0; k < 100; ++k) {
        v[static_cast<std::size_t>(k)] = k;
    }
    std::vector<int> shuffled = v;
    rng.shuffle(shuffled);
    REQUIRE(shuffled != v);  // 1/100! chance of false alarm
    std::vector<int> sorted = shuffled;
    std::sort(sorted.begin(), sorted.end());
    REQUIRE(sorted == v);

    std::vector<int> single = {5};
    rng.shuffle(single);
    REQUIRE(single == std::vector<int>{5});

    Rng r1(23), r2(23);
    std::vector<int> a = v, b = v;
    r1.shuffle(a);
    r2.shuffle(b);
    REQUIRE(a == b);
}

TEST_CASE("mix_seed separates nearby inputs") {
    std::set<std::uint64_t> outputs;
    for (std::uint64_t base = 0; base < 10; ++base) {
        for (std::uint64_t salt = 0; salt < 10; ++salt) {
            outputs.insert(mix_seed(base, salt));
        }
    }
    REQUIRE(outputs.size() == 100);
    REQUIRE(mix_seed(0, 0) != 0);
}
