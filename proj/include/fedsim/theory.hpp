#pragma once

// Learning-rate prescriptions, the convergence bound, delay estimates, and
// per-case rates — all as pure functions of problem constants and delay
// statistics.
//
// Naming note: the per-case delay estimates are keyed by pattern kind, not by
// case number. The analysis appendix swaps the cyclic labels relative to the
// main-text numbering (its "case 3" bound is the reshuffled one, "case 4" the
// deterministic one); keying by kind sidesteps the ambiguity. case_rate()
// follows the corollary's own numbering, where cases 3 and 4 share one
// formula anyway.

#include <cstdint>
#include <optional>

#include "fedsim/participation.hpp"

namespace fedsim {

struct ProblemConstants {
    double L = 0.0;
    double sigma = 0.0;
    double delta_f = 0.0; // f(x^(0)) - f*
    double F0 = 0.0;      // (1/N) sum_i ||grad f_i(x^(0))||^2
    int N = 0;
    int K = 1;
    std::int64_t T = 1;

    void validate() const;
};

struct DelaySummary {
    std::int64_t tau_max = 0;
    double tau_avg = 0.0;

    void validate() const;
};

struct Rates {
    double eta_g = 0.0;
    double eta_l = 0.0;
};

// eta_g = 1/sqrt(tau_max),
// eta_l = min{ 1/(10 sqrt(tau_max) K L),
//              sqrt(N tau_max delta_f) / sqrt(max{1,tau_avg} K T L sigma^2) }.
// tau_max = 0 (full participation) is treated as 1; sigma = 0 makes the
// second branch infinite, so the first branch is returned.
Rates theorem1_rates(const ProblemConstants& c, const DelaySummary& d);

// 30 sqrt((1 + tau_avg) L sigma^2 delta_f) / sqrt(N K T)
//   + 20 tau_max (L delta_f + F0) / T.
// (The eta_l prescription uses max{1, tau_avg} while the bound uses
// 1 + tau_avg; both are coded exactly as printed.)
double theorem1_bound(const ProblemConstants& c, const DelaySummary& d);

enum class BoundType { Deterministic, InExpectation };

struct DelayBound {
    double value = 0.0;
    BoundType type = BoundType::InExpectation;
};

// tau_max estimates per pattern kind:
//   uniform sampling       (4N/S) ln(NT)                       in expectation
//   independent, floor d   (4/d) max{ln(NT), ln(1/d)}          in expectation
//   reshuffled cyclic      4N/S                                in expectation
//   deterministic cyclic   2N/S                                deterministic
// Patterns without a closed-form estimate (sine, tiers, replay) return
// nullopt.
std::optional<DelayBound> delay_bound(PatternSpec::Kind kind, int N, int S, double delta,
                                      std::int64_t T);

// Right-hand sides of the per-case corollary (S = per-round cohort for cases
// 1/3/4, delta = participation floor for case 2):
//   case 1: 60 sqrt(L s^2 Df log(NT))/sqrt(SKT) + 80 (L Df + F0) N log(NT)/(ST)
//   case 2: 60 sqrt(L s^2 Df) max{log NT, log 1/d}/sqrt(d N K T)
//           + 80 (L Df + F0) max{log NT, log 1/d}/(d T)
//   cases 3 and 4: 60 sqrt(L s^2 Df)/sqrt(SKT) + 80 N (L Df + F0)/(ST)
double case_rate(int case_id, const ProblemConstants& c, int S, double delta);

} // namespace fedsim
