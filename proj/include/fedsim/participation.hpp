#pragma once

// Client-participation patterns and delay bookkeeping.
//
// A pattern turns (round, seed) into the active set S_t. The DelayTracker
// maintains, incrementally, the last-selection times
//     a_{i,t} = max{ j <= t : i in S_j }   (-1 if client i was never active),
// the per-round delay tau_t = max_i (t - a_{i,t}), and the run statistics
// tau_max / tau_avg. A never-selected client contributes t - (-1) = t + 1 —
// no special casing anywhere.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/errors.hpp"

namespace fedsim {

using ClientId = std::int32_t;

struct ActiveSet {
    std::int64_t round = 0;
    std::vector<ClientId> members; // sorted ascending, duplicate-free
};

struct PatternSpec {
    enum class Kind {
        UniformSample,      // S clients without replacement, uniformly
        IndependentProb,    // independent per-client Bernoulli(p_i)
        DeterministicCyclic,// fixed order, block of S consecutive, wraps
        ReshuffledCyclic,   // like cyclic, order reshuffled every epoch
        SineProb,           // p_t = (S/N)(amp*sin(pi*t/period) + offset)
        BiasedTiers,        // tiers of clients with stepped fixed probabilities
        Replay,             // explicit list of active sets
    };

    Kind kind = Kind::UniformSample;
    int N = 0;

    // UniformSample / cyclic variants / SineProb base rate.
    int S = 0;

    // IndependentProb: either one probability for everyone ...
    double prob = 0.0;
    // ... or a per-client vector (overrides `prob` when nonempty).
    std::vector<double> probs;

    // SineProb.
    double period = 5.0;
    double amplitude = 0.3;
    double offset = 0.7;

    // BiasedTiers: client i gets p_start + (i / tier_size) * p_step, clamped.
    int tier_size = 11;
    double p_start = 0.5;
    double p_step = -0.05;

    // Replay.
    std::vector<std::vector<ClientId>> replay;

    static PatternSpec uniform(int N, int S);
    static PatternSpec independent(int N, double prob);
    static PatternSpec independent(int N, std::vector<double> probs);
    static PatternSpec cyclic(int N, int S);
    static PatternSpec reshuffled(int N, int S);
    static PatternSpec sine(int N, int S, double period = 5.0,
                            double amplitude = 0.3, double offset = 0.7);
    static PatternSpec tiers(int N, int tier_size = 11, double p_start = 0.5,
                             double p_step = -0.05);
    static PatternSpec from_replay(int N, std::vector<std::vector<ClientId>> sets);

    // Throws ConfigError on out-of-range parameters.
    void validate() const;

    // Participation floor delta for the independent-probability delay bound:
    // min_i p_i. Only meaningful for the probability-based kinds.
    double participation_floor() const;
};

// Generate S_t. Pure in (pattern, round, master_seed): the randomized kinds
// derive their streams from (master_seed, "pattern", round[, client]), so no
// draw depends on anything but the round; DeterministicCyclic and Replay
// consume no randomness at all. Throws ConfigError when a Replay pattern is
// asked for a round beyond its schedule.
ActiveSet next_active_set(const PatternSpec& pattern, std::int64_t round,
                          std::uint64_t master_seed);

// Convenience: the full schedule for rounds 0..T-1.
std::vector<ActiveSet> generate_schedule(const PatternSpec& pattern, std::int64_t T,
                                         std::uint64_t master_seed);

// Replay schedules persist as JSON lines: one array of client ids per round.
std::vector<std::vector<ClientId>> load_replay_schedule(const std::string& path);
void save_replay_schedule(const std::vector<ActiveSet>& schedule, const std::string& path);

class DelayTracker {
public:
    explicit DelayTracker(int N);

    // Record S_t for the next round (rounds must arrive as 0,1,2,...;
    // anything else is a UsageError). Returns tau_t.
    std::int64_t record_round(const ActiveSet& active);

    std::int64_t rounds_recorded() const { return next_round_; }
    std::int64_t tau_max() const { return tau_max_; }
    double tau_avg() const {
        return next_round_ == 0 ? 0.0
                                : static_cast<double>(tau_sum_) / static_cast<double>(next_round_);
    }
    const std::vector<std::int64_t>& last_selected() const { return last_selected_; }
    const std::vector<std::int64_t>& tau_history() const { return tau_history_; }
    int clients() const { return static_cast<int>(last_selected_.size()); }

    // min_i a_{i, k + tau_max} — the quantity the delay lemma lower-bounds by
    // k. Test oracle only; needs the recorded history (absent after a
    // checkpoint restore, in which case this throws UsageError).
    std::int64_t min_last_selection(std::int64_t k) const;

    // Restore from checkpointed counters (history is not carried over).
    static DelayTracker restore(std::vector<std::int64_t> last_selected,
                                std::int64_t tau_max, std::int64_t tau_sum,
                                std::int64_t rounds);
    std::int64_t tau_sum() const { return tau_sum_; }

private:
    std::vector<std::int64_t> last_selected_;           // a_{i, t} for the latest t
    std::vector<std::int64_t> tau_history_;
    std::vector<std::vector<ClientId>> active_history_; // empty after restore
    std::int64_t tau_max_ = 0;
    std::int64_t tau_sum_ = 0;
    std::int64_t next_round_ = 0;
    bool has_history_ = true;
};

} // namespace fedsim
