#include "fedsim/theory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fedsim {

namespace {

double log_nt(int N, std::int64_t T) {
    return std::log(static_cast<double>(N) * static_cast<double>(T));
}

} // namespace

void ProblemConstants::validate() const {
    if (L < 0 || sigma < 0 || delta_f < 0 || F0 < 0)
        throw ConfigError("theory: constants must be >= 0");
    if (N < 1 || K < 1 || T < 1) throw ConfigError("theory: need N, K, T >= 1");
}

void DelaySummary::validate() const {
    if (tau_max < 0 || tau_avg < 0) throw ConfigError("theory: delays must be >= 0");
    if (tau_avg > static_cast<double>(tau_max))
        throw ConfigError("theory: tau_avg cannot exceed tau_max");
}

Rates theorem1_rates(const ProblemConstants& c, const DelaySummary& d) {
    c.validate();
    d.validate();
    if (c.L <= 0) throw ConfigError("theorem1_rates: L must be > 0");
    const double tau_max = std::max<double>(1.0, static_cast<double>(d.tau_max));

    Rates r;
    r.eta_g = 1.0 / std::sqrt(tau_max);
    const double branch1 = 1.0 / (10.0 * std::sqrt(tau_max) * c.K * c.L);
    if (c.sigma == 0.0) {
        r.eta_l = branch1;
        return r;
    }
    const double branch2 =
        std::sqrt(static_cast<double>(c.N) * tau_max * c.delta_f) /
        std::sqrt(std::max(1.0, d.tau_avg) * c.K * static_cast<double>(c.T) * c.L *
                  c.sigma * c.sigma);
    r.eta_l = std::min(branch1, branch2);
    return r;
}

double theorem1_bound(const ProblemConstants& c, const DelaySummary& d) {
    c.validate();
    d.validate();
    const double stochastic =
        30.0 * std::sqrt((1.0 + d.tau_avg) * c.L * c.sigma * c.sigma * c.delta_f) /
        std::sqrt(static_cast<double>(c.N) * c.K * static_cast<double>(c.T));
    const double drift = 20.0 * static_cast<double>(d.tau_max) * (c.L * c.delta_f + c.F0) /
                         static_cast<double>(c.T);
    return stochastic + drift;
}

std::optional<DelayBound> delay_bound(PatternSpec::Kind kind, int N, int S, double delta,
                                      std::int64_t T) {
    if (N < 1 || T < 1) throw ConfigError("delay_bound: need N >= 1 and T >= 1");
    switch (kind) {
        case PatternSpec::Kind::UniformSample:
            if (S < 1 || S > N) throw ConfigError("delay_bound: need 1 <= S <= N");
            return DelayBound{4.0 * N / S * log_nt(N, T), BoundType::InExpectation};
        case PatternSpec::Kind::IndependentProb:
            if (!(delta > 0) || delta > 1)
                throw ConfigError("delay_bound: need participation floor in (0, 1]");
            return DelayBound{4.0 / delta * std::max(log_nt(N, T), std::log(1.0 / delta)),
                              BoundType::InExpectation};
        case PatternSpec::Kind::ReshuffledCyclic:
            if (S < 1 || S > N) throw ConfigError("delay_bound: need 1 <= S <= N");
            return DelayBound{4.0 * N / S, BoundType::InExpectation};
        case PatternSpec::Kind::DeterministicCyclic:
            if (S < 1 || S > N) throw ConfigError("delay_bound: need 1 <= S <= N");
            return DelayBound{2.0 * N / S, BoundType::Deterministic};
        default:
            return std::nullopt; // no closed-form estimate for this pattern
    }
}

double case_rate(int case_id, const ProblemConstants& c, int S, double delta) {
    c.validate();
    const double L = c.L, s2 = c.sigma * c.sigma, Df = c.delta_f;
    const double head = L * Df + c.F0;
    const double T = static_cast<double>(c.T);
    const double lnNT = log_nt(c.N, c.T);

    switch (case_id) {
        case 1: {
            if (S < 1) throw ConfigError("case_rate: need S >= 1");
            return 60.0 * std::sqrt(L * s2 * Df * lnNT) / std::sqrt(S * c.K * T) +
                   80.0 * head * c.N * lnNT / (S * T);
        }
        case 2: {
            if (!(delta > 0) || delta > 1)
                throw ConfigError("case_rate: need participation floor in (0, 1]");
            const double lg = std::max(lnNT, std::log(1.0 / delta));
            return 60.0 * std::sqrt(L * s2 * Df) * lg / std::sqrt(delta * c.N * c.K * T) +
                   80.0 * head * lg / (delta * T);
        }
        case 3:
        case 4: {
            if (S < 1) throw ConfigError("case_rate: need S >= 1");
            return 60.0 * std::sqrt(L * s2 * Df) / std::sqrt(S * c.K * T) +
                   80.0 * c.N * head / (S * T);
        }
        default:
            throw ConfigError("case_rate: case id must be 1..4, got " + std::to_string(case_id));
    }
}

} // namespace fedsim
