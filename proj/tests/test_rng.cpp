#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fedsim/rng.hpp"

using fedsim::rng::derive_key;
using fedsim::rng::sample_gamma;
using fedsim::rng::Stream;
using fedsim::rng::substream;

TEST_CASE("streams are pure functions of their key") {
    Stream a(derive_key(42, "grad", 1, 2, 3));
    Stream b(derive_key(42, "grad", 1, 2, 3));
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct tags and coordinates give distinct streams") {
    // Swapping coordinates or changing the tag must not collide.
    CHECK(derive_key(42, "grad", 1, 2) != derive_key(42, "grad", 2, 1));
    CHECK(derive_key(42, "grad", 1, 2) != derive_key(42, "pattern", 1, 2));
    CHECK(derive_key(42, "grad", 1, 2) != derive_key(43, "grad", 1, 2));
    Stream a(derive_key(0, "x", 0));
    Stream b(derive_key(0, "x", 1));
    int same = 0;
    for (int i = 0; i < 64; ++i) same += (a.next_u64() == b.next_u64());
    CHECK(same == 0);
}

TEST_CASE("uniform doubles live in their half-open ranges") {
    auto s = substream(7, "unit");
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = s.next_double();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 0.01);

    auto sp = substream(7, "unitpos");
    for (int i = 0; i < 20000; ++i) {
        const double u = sp.next_double_pos();
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
    }
}

TEST_CASE("normal deviates match N(0,1) moments") {
    auto s = substream(11, "normal");
    const int n = 50000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = s.next_normal();
        sum += z;
        sumsq += z * z;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n))); // 3 std-errs
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("next_below is in range and roughly uniform") {
    auto s = substream(13, "below");
    const int n = 70000;
    std::vector<int> counts(7, 0);
    for (int i = 0; i < n; ++i) {
        const auto v = s.next_below(7);
        REQUIRE(v < 7);
        ++counts[static_cast<std::size_t>(v)];
    }
    for (int c : counts) CHECK(std::abs(c - n / 7) < 400);
}

TEST_CASE("shuffle produces a permutation, deterministically") {
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    auto s1 = substream(3, "shuffle");
    s1.shuffle(v.begin(), v.end());
    std::vector<int> w(50);
    std::iota(w.begin(), w.end(), 0);
    auto s2 = substream(3, "shuffle");
    s2.shuffle(w.begin(), w.end());
    CHECK(v == w);
    std::sort(v.begin(), v.end());
    std::vector<int> id(50);
    std::iota(id.begin(), id.end(), 0);
    CHECK(v == id);
}

TEST_CASE("gamma sampler matches Gamma(alpha,1) moments") {
    const int n = 40000;
    for (double alpha : {0.3, 2.5}) { // boost path and main path
        auto s = substream(17, "gamma", static_cast<std::uint64_t>(alpha * 10));
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double g = sample_gamma(s, alpha);
            CHECK(g > 0.0);
            sum += g;
            sumsq += g * g;
        }
        const double mean = sum / n;
        const double var = sumsq / n - mean * mean;
        CHECK(std::abs(mean - alpha) < 0.05);   // E = alpha
        CHECK(std::abs(var - alpha) < 0.15);    // Var = alpha
    }
}
