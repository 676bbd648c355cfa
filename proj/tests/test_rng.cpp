#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "adasiam/rng.hpp"

using adasiam::Rng;

TEST_CASE("same seed reproduces the stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
    CHECK(same == 0);
}

TEST_CASE("substreams are stable and independent") {
    Rng root(7);
    Rng s1 = root.substream("frames");
    Rng s2 = root.substream("frames");
    Rng s3 = root.substream("motion");
    CHECK(s1.next_u64() == s2.next_u64());
    CHECK(s1.next_u64() != s3.next_u64());
    Rng i0 = root.substream("seq", 0);
    Rng i1 = root.substream("seq", 1);
    CHECK(i0.next_u64() != i1.next_u64());
}

TEST_CASE("uniform stays in range") {
    Rng r(3);
    for (int i = 0; i < 10000; ++i) {
        double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        double v = r.uniform(-2.0, 5.0);
        CHECK(v >= -2.0);
        CHECK(v < 5.0);
    }
}

TEST_CASE("uniform_int covers both endpoints") {
    Rng r(11);
    bool lo = false, hi = false;
    for (int i = 0; i < 1000; ++i) {
        int v = r.uniform_int(2, 5);
        CHECK(v >= 2);
        CHECK(v <= 5);
        lo |= v == 2;
        hi |= v == 5;
    }
    CHECK(lo);
    CHECK(hi);
}

TEST_CASE("normal moments are roughly standard") {
    Rng r(5);
    const int n = 50000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        sum += x;
        sq += x * x;
    }
    double mean = sum / n;
    double var = sq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.02);
    CHECK(std::fabs(var - 1.0) < 0.05);
}

TEST_CASE("shuffle permutes") {
    Rng r(9);
    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::vector<int> orig = v;
    r.shuffle(v.begin(), v.end());
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == orig);
}
