#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "fedsim/errors.hpp"
#include "fedsim/participation.hpp"

using namespace fedsim;

namespace {

// Closed-form last-selection time: a_{i,t} = max{ j <= t : i in S_j }, -1 if none.
std::int64_t brute_force_a(const std::vector<ActiveSet>& schedule, int client,
                           std::int64_t t) {
    std::int64_t a = -1;
    for (std::int64_t j = 0; j <= t; ++j) {
        const auto& m = schedule[static_cast<std::size_t>(j)].members;
        if (std::find(m.begin(), m.end(), client) != m.end()) a = j;
    }
    return a;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

} // namespace

TEST_CASE("deterministic cyclic blocks wrap around") {
    const auto p = PatternSpec::cyclic(4, 2);
    CHECK(next_active_set(p, 0, 9).members == std::vector<ClientId>{0, 1});
    CHECK(next_active_set(p, 1, 9).members == std::vector<ClientId>{2, 3});
    CHECK(next_active_set(p, 2, 9).members == std::vector<ClientId>{0, 1});
    // No randomness consumed: any seed gives the same sets.
    CHECK(next_active_set(p, 1, 12345).members == std::vector<ClientId>{2, 3});
}

TEST_CASE("cyclic with S not dividing N wraps within the epoch") {
    const auto p = PatternSpec::cyclic(5, 2);
    CHECK(next_active_set(p, 0, 0).members == std::vector<ClientId>{0, 1});
    CHECK(next_active_set(p, 1, 0).members == std::vector<ClientId>{2, 3});
    CHECK(next_active_set(p, 2, 0).members == std::vector<ClientId>{0, 4}); // 4, then 5 % 5
}

TEST_CASE("independent probability one activates everyone") {
    const auto p = PatternSpec::independent(6, 1.0);
    for (std::int64_t t : {0, 3, 17}) {
        CHECK(next_active_set(p, t, 4).members == std::vector<ClientId>{0, 1, 2, 3, 4, 5});
    }
}

TEST_CASE("uniform sampling: exact size, sorted unique, marginal near S/N") {
    const auto p = PatternSpec::uniform(20, 5);
    std::vector<int> hits(20, 0);
    const int rounds = 10000;
    for (int t = 0; t < rounds; ++t) {
        const auto s = next_active_set(p, t, 123);
        REQUIRE(s.members.size() == 5);
        CHECK(std::is_sorted(s.members.begin(), s.members.end()));
        CHECK(std::adjacent_find(s.members.begin(), s.members.end()) == s.members.end());
        for (ClientId c : s.members) {
            REQUIRE(c >= 0);
            REQUIRE(c < 20);
            ++hits[static_cast<std::size_t>(c)];
        }
    }
    for (int h : hits) {
        const double freq = static_cast<double>(h) / rounds;
        CHECK(std::abs(freq - 0.25) < 0.02);
    }
}

TEST_CASE("active sets are pure functions of (pattern, round, seed)") {
    for (const auto& p :
         {PatternSpec::uniform(9, 3), PatternSpec::independent(9, 0.4),
          PatternSpec::reshuffled(9, 3), PatternSpec::sine(9, 3),
          PatternSpec::tiers(9, 2, 0.9, -0.2)}) {
        for (std::int64_t t = 0; t < 12; ++t) {
            CHECK(next_active_set(p, t, 77).members == next_active_set(p, t, 77).members);
        }
        // Different seeds must be able to differ somewhere.
        bool any_diff = false;
        for (std::int64_t t = 0; t < 12 && !any_diff; ++t) {
            any_diff = next_active_set(p, t, 77).members != next_active_set(p, t, 78).members;
        }
        CHECK(any_diff);
    }
}

TEST_CASE("negative round is a usage error") {
    const auto p = PatternSpec::cyclic(4, 2);
    CHECK_THROWS_AS(next_active_set(p, -1, 0), UsageError);
}

TEST_CASE("pattern parameter validation") {
    CHECK_THROWS_AS(PatternSpec::uniform(4, 5), ConfigError);
    CHECK_THROWS_AS(PatternSpec::uniform(4, 0), ConfigError);
    CHECK_THROWS_AS(PatternSpec::independent(4, 1.5), ConfigError);
    CHECK_THROWS_AS(PatternSpec::independent(4, std::vector<double>{0.5, 0.5}), ConfigError);
    CHECK_THROWS_AS(PatternSpec::sine(4, 2, 0.0), ConfigError);
    CHECK_THROWS_AS(PatternSpec::tiers(4, 0), ConfigError);
    CHECK_THROWS_AS(PatternSpec::from_replay(4, {{0, 4}}), ConfigError);
    CHECK_THROWS_AS(PatternSpec::from_replay(4, {{-1}}), ConfigError);
}

TEST_CASE("full participation keeps every delay at zero") {
    const auto p = PatternSpec::independent(5, 1.0);
    DelayTracker tracker(5);
    for (std::int64_t t = 0; t < 10; ++t) {
        CHECK(tracker.record_round(next_active_set(p, t, 0)) == 0);
    }
    CHECK(tracker.tau_max() == 0);
    CHECK(tracker.tau_avg() == 0.0);
}

TEST_CASE("hand-traced delays for schedule {0}, {1,2}, {0}") {
    DelayTracker tracker(3);
    CHECK(tracker.record_round({0, {0}}) == 1);    // 1,2 never seen: 0-(-1)
    CHECK(tracker.record_round({1, {1, 2}}) == 1); // client 0 last at 0
    CHECK(tracker.record_round({2, {0}}) == 1);    // clients 1,2 last at 1
    CHECK(tracker.tau_max() == 1);
    CHECK(tracker.tau_avg() == doctest::Approx(1.0));
    CHECK(tracker.last_selected() == std::vector<std::int64_t>{2, 1, 1});
}

TEST_CASE("cyclic N=4 S=2 keeps tau at N/S - 1 from the start") {
    const auto p = PatternSpec::cyclic(4, 2);
    DelayTracker tracker(4);
    for (std::int64_t t = 0; t < 6; ++t) {
        CHECK(tracker.record_round(next_active_set(p, t, 0)) == 1);
    }
    CHECK(tracker.tau_max() == 1);
}

TEST_CASE("cyclic warm-up: tau_t = min(t+1, N/S-1)") {
    // Until every client has appeared once, never-seen clients dominate with
    // gap t+1; afterwards the steady state N/S - 1 takes over.
    const auto p = PatternSpec::cyclic(20, 4);
    DelayTracker tracker(20);
    for (std::int64_t t = 0; t < 30; ++t) {
        const auto tau = tracker.record_round(next_active_set(p, t, 0));
        CHECK(tau == std::min<std::int64_t>(t + 1, 20 / 4 - 1));
    }
    CHECK(tracker.tau_max() == 4);
}

TEST_CASE("incremental tracker equals the closed-form scan on random schedules") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto p = PatternSpec::independent(6, 0.35);
        const auto schedule = generate_schedule(p, 25, seed);
        DelayTracker tracker(6);
        for (std::int64_t t = 0; t < 25; ++t) {
            tracker.record_round(schedule[static_cast<std::size_t>(t)]);
            std::int64_t tau_brute = 0;
            for (int i = 0; i < 6; ++i) {
                const auto a = brute_force_a(schedule, i, t);
                CHECK(tracker.last_selected()[static_cast<std::size_t>(i)] == a);
                tau_brute = std::max(tau_brute, t - a);
            }
            CHECK(tracker.tau_history()[static_cast<std::size_t>(t)] == tau_brute);
        }
        CHECK(tracker.tau_avg() <= static_cast<double>(tracker.tau_max()));
    }
}

TEST_CASE("out-of-order rounds are rejected") {
    DelayTracker tracker(3);
    tracker.record_round({0, {0}});
    CHECK_THROWS_AS(tracker.record_round({2, {1}}), UsageError);
    CHECK_THROWS_AS(tracker.record_round({0, {1}}), UsageError);
    ActiveSet bad{1, {2, 1}}; // unsorted
    CHECK_THROWS_AS(tracker.record_round(bad), UsageError);
}

TEST_CASE("empty active sets are legal and widen the delay") {
    DelayTracker tracker(2);
    tracker.record_round({0, {0, 1}});
    CHECK(tracker.record_round({1, {}}) == 1);
    CHECK(tracker.record_round({2, {}}) == 2);
    CHECK(tracker.tau_max() == 2);
}

TEST_CASE("min_last_selection: full participation and cyclic hand trace") {
    {
        const auto p = PatternSpec::independent(4, 1.0);
        DelayTracker tracker(4);
        for (std::int64_t t = 0; t < 5; ++t) tracker.record_round(next_active_set(p, t, 0));
        CHECK(tracker.min_last_selection(3) == 3); // tau_max = 0
    }
    {
        const auto p = PatternSpec::cyclic(4, 2);
        DelayTracker tracker(4);
        for (std::int64_t t = 0; t < 4; ++t) tracker.record_round(next_active_set(p, t, 0));
        CHECK(tracker.tau_max() == 1);
        CHECK(tracker.min_last_selection(2) == 2); // min_i a_{i,3}
    }
}

TEST_CASE("delay lemma: min_i a_{i, k+tau_max} >= k on every recorded run") {
    for (const auto& p : {PatternSpec::uniform(8, 3), PatternSpec::independent(8, 0.5),
                          PatternSpec::reshuffled(8, 2)}) {
        const std::int64_t T = 40;
        DelayTracker tracker(8);
        for (std::int64_t t = 0; t < T; ++t) {
            tracker.record_round(next_active_set(p, t, 99));
        }
        for (std::int64_t k = 0; k + tracker.tau_max() <= T - 1; ++k) {
            CHECK(tracker.min_last_selection(k) >= k);
        }
    }
    DelayTracker fresh(3);
    CHECK_THROWS_AS(fresh.min_last_selection(0), UsageError);
}

TEST_CASE("reshuffled cyclic: epoch covers everyone, per-run bound 2*floor(N/S)") {
    const int N = 12, S = 3;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto p = PatternSpec::reshuffled(N, S);
        DelayTracker tracker(N);
        std::vector<ClientId> first_epoch;
        for (std::int64_t t = 0; t < 60; ++t) {
            const auto s = next_active_set(p, t, seed);
            REQUIRE(s.members.size() == static_cast<std::size_t>(S));
            if (t < N / S) {
                first_epoch.insert(first_epoch.end(), s.members.begin(), s.members.end());
            }
            tracker.record_round(s);
        }
        std::sort(first_epoch.begin(), first_epoch.end());
        std::vector<ClientId> everyone(N);
        for (int i = 0; i < N; ++i) everyone[static_cast<std::size_t>(i)] = i;
        CHECK(first_epoch == everyone); // one full pass per epoch
        CHECK(tracker.tau_max() <= 2 * (N / S));
    }
}

TEST_CASE("restored tracker carries counters but not history") {
    const auto p = PatternSpec::uniform(6, 2);
    DelayTracker a(6);
    for (std::int64_t t = 0; t < 12; ++t) a.record_round(next_active_set(p, t, 5));

    auto b = DelayTracker::restore(a.last_selected(), a.tau_max(), a.tau_sum(),
                                   a.rounds_recorded());
    CHECK(b.tau_max() == a.tau_max());
    CHECK(b.tau_avg() == doctest::Approx(a.tau_avg()));
    CHECK_THROWS_AS(b.min_last_selection(0), UsageError);

    // Continuing both trackers in lockstep stays identical.
    for (std::int64_t t = 12; t < 20; ++t) {
        const auto s = next_active_set(p, t, 5);
        CHECK(a.record_round(s) == b.record_round(s));
    }
    CHECK(a.tau_max() == b.tau_max());
    CHECK(a.tau_avg() == doctest::Approx(b.tau_avg()));
}

TEST_CASE("sine probabilities clamp to [0,1]") {
    // amplitude 2, offset 0: p_0 clamps to 0 (empty set), peak clamps to 1
    // (full set).
    const auto p = PatternSpec::sine(10, 10, 4.0, 2.0, 0.0);
    CHECK(next_active_set(p, 0, 1).members.empty());
    const auto peak = next_active_set(p, 2, 1); // sin(pi/2) = 1 -> p = 2 -> clamp 1
    CHECK(peak.members.size() == 10);
}

TEST_CASE("tier probabilities step down and clamp") {
    // Tier 0 at p=1 always participates; tier 1 at p=0 never does.
    const auto p = PatternSpec::tiers(4, 2, 1.0, -1.0);
    for (std::int64_t t = 0; t < 8; ++t) {
        CHECK(next_active_set(p, t, 3).members == std::vector<ClientId>{0, 1});
    }
    CHECK(p.participation_floor() == 0.0);
    CHECK(PatternSpec::tiers(4, 2, 0.9, -0.2).participation_floor() ==
          doctest::Approx(0.7));
    CHECK(PatternSpec::independent(4, 0.3).participation_floor() == doctest::Approx(0.3));
}

TEST_CASE("replay schedules round-trip through the JSONL file") {
    const auto p = PatternSpec::uniform(7, 3);
    const auto schedule = generate_schedule(p, 9, 21);
    const auto path = temp_file("fedsim_test_replay.jsonl");
    save_replay_schedule(schedule, path.string());

    const auto loaded = load_replay_schedule(path.string());
    REQUIRE(loaded.size() == 9);
    const auto rp = PatternSpec::from_replay(7, loaded);
    for (std::int64_t t = 0; t < 9; ++t) {
        CHECK(next_active_set(rp, t, 999).members ==
              schedule[static_cast<std::size_t>(t)].members);
    }
    CHECK_THROWS_AS(next_active_set(rp, 9, 0), ConfigError); // exhausted
    std::filesystem::remove(path);

    CHECK_THROWS_AS(load_replay_schedule("/nonexistent/replay.jsonl"), IoError);
}

TEST_CASE("replay loader rejects malformed lines") {
    const auto path = temp_file("fedsim_test_replay_bad.jsonl");
    {
        std::FILE* f = std::fopen(path.string().c_str(), "w");
        REQUIRE(f != nullptr);
        std::fputs("[0,1]\nnot json\n", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_replay_schedule(path.string()), ConfigError);
    std::filesystem::remove(path);
}
