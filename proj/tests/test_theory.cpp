#include <doctest.h>

#include <cmath>

#include "fedsim/errors.hpp"
#include "fedsim/theory.hpp"

using namespace fedsim;

namespace {

ProblemConstants base_constants() {
    ProblemConstants c;
    c.L = 1.0;
    c.sigma = 1.0;
    c.delta_f = 2.0;
    c.F0 = 1.0;
    c.N = 20;
    c.K = 10;
    c.T = 2000;
    return c;
}

} // namespace

TEST_CASE("prescribed rates: smoothness branch") {
    const auto c = base_constants();
    const DelaySummary d{4, 2.0};
    const auto r = theorem1_rates(c, d);
    CHECK(r.eta_g == doctest::Approx(0.5).epsilon(1e-15));
    // 1/(10 sqrt(4) * 10 * 1) beats the variance branch here.
    CHECK(r.eta_l == doctest::Approx(0.005).epsilon(1e-15));
}

TEST_CASE("prescribed rates: variance branch and its T-scaling") {
    auto c = base_constants();
    c.sigma = 20.0;
    const DelaySummary d{4, 2.0};
    const auto r = theorem1_rates(c, d);
    // sqrt(N tau Df) / sqrt(tau_avg K T L sigma^2) = sqrt(10)/1000.
    CHECK(r.eta_l == doctest::Approx(0.0031622776601683794).epsilon(1e-14));

    c.T *= 2;
    const auto r2 = theorem1_rates(c, d);
    CHECK(r2.eta_l == doctest::Approx(r.eta_l / std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("prescribed rates: edge behaviors") {
    auto c = base_constants();

    SUBCASE("full participation treats tau_max as one") {
        const auto r = theorem1_rates(c, DelaySummary{0, 0.0});
        CHECK(r.eta_g == 1.0);
        CHECK(r.eta_l == doctest::Approx(0.01).epsilon(1e-15)); // 1/(10*1*10*1)
    }
    SUBCASE("sigma = 0 always selects the smoothness branch") {
        c.sigma = 0.0;
        c.delta_f = 0.0; // would zero the other branch's numerator
        const auto r = theorem1_rates(c, DelaySummary{9, 4.0});
        CHECK(r.eta_l == doctest::Approx(1.0 / (10.0 * 3.0 * 10.0)).epsilon(1e-15));
    }
    SUBCASE("prescription satisfies its own stability conditions") {
        for (std::int64_t tau : {0, 1, 4, 25, 100}) {
            const DelaySummary d{tau, static_cast<double>(tau) / 2.0};
            const auto r = theorem1_rates(c, d);
            const double t_eff = std::max<double>(1.0, static_cast<double>(tau));
            CHECK(r.eta_l <= 1.0 / (10.0 * std::sqrt(t_eff) * c.K * c.L) + 1e-15);
            CHECK(r.eta_g * r.eta_l <= 1.0 / (10.0 * t_eff * c.K * c.L) + 1e-15);
        }
    }
}

TEST_CASE("convergence bound: frozen value and structure") {
    const auto c = base_constants();
    const DelaySummary d{4, 2.0};
    // 30 sqrt(3*2)/sqrt(400000) + 20*4*3/2000
    CHECK(theorem1_bound(c, d) == doctest::Approx(0.2361895003862225).epsilon(1e-14));

    SUBCASE("noiseless, fully synchronized problem has a zero bound") {
        ProblemConstants z = c;
        z.sigma = 0.0;
        z.delta_f = 0.0;
        z.F0 = 0.0;
        CHECK(theorem1_bound(z, DelaySummary{0, 0.0}) == 0.0);
    }
    SUBCASE("monotone in both delay statistics") {
        CHECK(theorem1_bound(c, DelaySummary{4, 3.0}) > theorem1_bound(c, d));
        CHECK(theorem1_bound(c, DelaySummary{5, 2.0}) > theorem1_bound(c, d));
    }
    SUBCASE("vanishes as T grows") {
        ProblemConstants big = c;
        big.T = 2000000000;
        CHECK(theorem1_bound(big, d) < 1e-3);
        CHECK(theorem1_bound(big, d) > 0.0);
    }
}

TEST_CASE("delay estimates per pattern kind") {
    const auto uni = delay_bound(PatternSpec::Kind::UniformSample, 20, 5, 0.0, 200);
    REQUIRE(uni.has_value());
    CHECK(uni->value == doctest::Approx(132.70479424163244).epsilon(1e-14));
    CHECK(uni->type == BoundType::InExpectation);

    const auto ind = delay_bound(PatternSpec::Kind::IndependentProb, 20, 0, 1.0, 200);
    REQUIRE(ind.has_value());
    CHECK(ind->value == doctest::Approx(33.17619856040811).epsilon(1e-14));

    const auto ind2 = delay_bound(PatternSpec::Kind::IndependentProb, 20, 0, 0.2, 200);
    REQUIRE(ind2.has_value());
    CHECK(ind2->value == doctest::Approx(165.88099280204057).epsilon(1e-14));

    // Tiny floor: the log(1/delta) term takes over.
    const auto ind3 = delay_bound(PatternSpec::Kind::IndependentProb, 2, 0, 1e-4, 2);
    REQUIRE(ind3.has_value());
    CHECK(ind3->value == doctest::Approx(368413.6148790473).epsilon(1e-12));

    const auto rs = delay_bound(PatternSpec::Kind::ReshuffledCyclic, 12, 3, 0.0, 100);
    REQUIRE(rs.has_value());
    CHECK(rs->value == 16.0);
    CHECK(rs->type == BoundType::InExpectation);

    const auto cyc = delay_bound(PatternSpec::Kind::DeterministicCyclic, 100, 20, 0.0, 100);
    REQUIRE(cyc.has_value());
    CHECK(cyc->value == 10.0);
    CHECK(cyc->type == BoundType::Deterministic);

    CHECK(!delay_bound(PatternSpec::Kind::SineProb, 20, 5, 0.0, 100).has_value());
    CHECK(!delay_bound(PatternSpec::Kind::BiasedTiers, 20, 5, 0.0, 100).has_value());
    CHECK(!delay_bound(PatternSpec::Kind::Replay, 20, 5, 0.0, 100).has_value());
}

TEST_CASE("per-case corollary rates") {
    ProblemConstants c;
    c.L = 1.0;
    c.sigma = 1.0;
    c.delta_f = 1.0;
    c.F0 = 1.0;
    c.N = 100;
    c.K = 10;
    c.T = 2000;

    const double c4 = case_rate(4, c, 20, 0.0);
    CHECK(c4 == doctest::Approx(0.4948683298050514).epsilon(1e-14));
    CHECK(case_rate(3, c, 20, 0.0) == c4); // cases 3 and 4 share the formula

    const double c1 = case_rate(1, c, 20, 0.0);
    CHECK(c1 == doctest::Approx(5.213872347191906).epsilon(1e-13));
    // Case 1 is the shared formula inflated by sqrt(log NT) and log NT.
    const double lnNT = std::log(100.0 * 2000.0);
    const double t1 = 60.0 * std::sqrt(1.0) / std::sqrt(20.0 * 10 * 2000);
    const double t2 = 80.0 * 100 * 2.0 / (20.0 * 2000);
    CHECK(c1 == doctest::Approx(t1 * std::sqrt(lnNT) + t2 * lnNT).epsilon(1e-13));

    CHECK(case_rate(2, c, 0, 0.2) == doctest::Approx(6.040398783572641).epsilon(1e-13));

    SUBCASE("rates vanish as T grows") {
        ProblemConstants big = c;
        big.T = 4000000000L;
        for (int id : {1, 3, 4}) CHECK(case_rate(id, big, 20, 0.0) < 1e-2);
        CHECK(case_rate(2, big, 0, 0.2) < 1e-2);
    }
}

TEST_CASE("theory input validation") {
    auto c = base_constants();
    const DelaySummary d{4, 2.0};

    ProblemConstants bad = c;
    bad.N = 0;
    CHECK_THROWS_AS(theorem1_rates(bad, d), ConfigError);
    bad = c;
    bad.L = -1.0;
    CHECK_THROWS_AS(theorem1_bound(bad, d), ConfigError);
    bad = c;
    bad.T = 0;
    CHECK_THROWS_AS(theorem1_bound(bad, d), ConfigError);
    bad = c;
    bad.L = 0.0;
    CHECK_THROWS_AS(theorem1_rates(bad, d), ConfigError); // rates divide by L

    CHECK_THROWS_AS(theorem1_bound(c, DelaySummary{-1, 0.0}), ConfigError);
    CHECK_THROWS_AS(theorem1_bound(c, DelaySummary{2, 3.0}), ConfigError);

    CHECK_THROWS_AS(delay_bound(PatternSpec::Kind::UniformSample, 20, 0, 0.0, 100), ConfigError);
    CHECK_THROWS_AS(delay_bound(PatternSpec::Kind::UniformSample, 20, 21, 0.0, 100), ConfigError);
    CHECK_THROWS_AS(delay_bound(PatternSpec::Kind::IndependentProb, 20, 0, 0.0, 100), ConfigError);
    CHECK_THROWS_AS(delay_bound(PatternSpec::Kind::DeterministicCyclic, 0, 1, 0.0, 100),
                    ConfigError);

    CHECK_THROWS_AS(case_rate(0, c, 20, 0.0), ConfigError);
    CHECK_THROWS_AS(case_rate(5, c, 20, 0.0), ConfigError);
    CHECK_THROWS_AS(case_rate(1, c, 0, 0.0), ConfigError);
    CHECK_THROWS_AS(case_rate(2, c, 0, 0.0), ConfigError);
    CHECK_THROWS_AS(case_rate(2, c, 0, 1.5), ConfigError);
}
