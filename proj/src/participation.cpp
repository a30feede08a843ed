#include "fedsim/participation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>

#include <json.hpp>

#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

double clamp01(double p) { return std::min(1.0, std::max(0.0, p)); }

// Shared by every probability-based kind: one independent coin per client,
// each from its own (seed, "pattern", round, client) stream.
ActiveSet bernoulli_set(int N, std::int64_t round, std::uint64_t seed,
                        const std::function<double(int)>& prob_of) {
    ActiveSet out;
    out.round = round;
    for (int i = 0; i < N; ++i) {
        auto s = rng::substream(seed, "pattern", static_cast<std::uint64_t>(round),
                                static_cast<std::uint64_t>(i));
        if (s.next_double() < prob_of(i)) out.members.push_back(i);
    }
    return out;
}

// Reshuffled cyclic order: a continuous block pointer walks a stream of
// concatenated per-epoch permutations; round t covers stream positions
// tS..tS+S-1, and position p belongs to epoch p/N. When S | N this is exactly
// "reshuffle every N/S rounds"; when a block straddles an epoch boundary the
// two permutation fragments may repeat a client, so duplicates are merged.
std::vector<ClientId> epoch_permutation(int N, std::uint64_t seed, std::int64_t epoch) {
    std::vector<ClientId> perm(static_cast<std::size_t>(N));
    std::iota(perm.begin(), perm.end(), 0);
    auto s = rng::substream(seed, "pattern-epoch", static_cast<std::uint64_t>(epoch));
    s.shuffle(perm.begin(), perm.end());
    return perm;
}

} // namespace

PatternSpec PatternSpec::uniform(int N, int S) {
    PatternSpec p;
    p.kind = Kind::UniformSample;
    p.N = N;
    p.S = S;
    p.validate();
    return p;
}

PatternSpec PatternSpec::independent(int N, double prob) {
    PatternSpec p;
    p.kind = Kind::IndependentProb;
    p.N = N;
    p.prob = prob;
    p.validate();
    return p;
}

PatternSpec PatternSpec::independent(int N, std::vector<double> probs) {
    PatternSpec p;
    p.kind = Kind::IndependentProb;
    p.N = N;
    p.probs = std::move(probs);
    p.validate();
    return p;
}

PatternSpec PatternSpec::cyclic(int N, int S) {
    PatternSpec p;
    p.kind = Kind::DeterministicCyclic;
    p.N = N;
    p.S = S;
    p.validate();
    return p;
}

PatternSpec PatternSpec::reshuffled(int N, int S) {
    PatternSpec p;
    p.kind = Kind::ReshuffledCyclic;
    p.N = N;
    p.S = S;
    p.validate();
    return p;
}

PatternSpec PatternSpec::sine(int N, int S, double period, double amplitude, double offset) {
    PatternSpec p;
    p.kind = Kind::SineProb;
    p.N = N;
    p.S = S;
    p.period = period;
    p.amplitude = amplitude;
    p.offset = offset;
    p.validate();
    return p;
}

PatternSpec PatternSpec::tiers(int N, int tier_size, double p_start, double p_step) {
    PatternSpec p;
    p.kind = Kind::BiasedTiers;
    p.N = N;
    p.tier_size = tier_size;
    p.p_start = p_start;
    p.p_step = p_step;
    p.validate();
    return p;
}

PatternSpec PatternSpec::from_replay(int N, std::vector<std::vector<ClientId>> sets) {
    PatternSpec p;
    p.kind = Kind::Replay;
    p.N = N;
    p.replay = std::move(sets);
    p.validate();
    return p;
}

void PatternSpec::validate() const {
    require(N >= 1, "pattern: N must be >= 1");
    switch (kind) {
        case Kind::UniformSample:
        case Kind::DeterministicCyclic:
        case Kind::ReshuffledCyclic:
            require(S >= 1 && S <= N, "pattern: need 1 <= S <= N");
            break;
        case Kind::IndependentProb:
            if (!probs.empty()) {
                require(static_cast<int>(probs.size()) == N,
                        "pattern: per-client probability vector must have N entries");
                for (double p : probs)
                    require(p >= 0.0 && p <= 1.0, "pattern: probabilities must lie in [0,1]");
            } else {
                require(prob >= 0.0 && prob <= 1.0, "pattern: probability must lie in [0,1]");
            }
            break;
        case Kind::SineProb:
            require(S >= 1 && S <= N, "pattern: need 1 <= S <= N");
            require(period > 0.0, "pattern: sine period must be positive");
            // offset - amplitude < 0 is allowed; negative momentary
            // probabilities clamp to 0.
            break;
        case Kind::BiasedTiers:
            require(tier_size >= 1, "pattern: tier_size must be >= 1");
            break;
        case Kind::Replay:
            for (const auto& s : replay) {
                for (ClientId c : s)
                    require(c >= 0 && c < N, "pattern: replay client id out of range");
            }
            break;
    }
}

double PatternSpec::participation_floor() const {
    switch (kind) {
        case Kind::IndependentProb:
            if (!probs.empty()) return *std::min_element(probs.begin(), probs.end());
            return prob;
        case Kind::SineProb: {
            const double lo = clamp01(static_cast<double>(S) / N * (offset - amplitude));
            return lo;
        }
        case Kind::BiasedTiers: {
            const int tiers = (N + tier_size - 1) / tier_size;
            double lo = 1.0;
            for (int k = 0; k < tiers; ++k) lo = std::min(lo, clamp01(p_start + k * p_step));
            return lo;
        }
        default:
            return 0.0;
    }
}

ActiveSet next_active_set(const PatternSpec& pattern, std::int64_t round,
                          std::uint64_t master_seed) {
    if (round < 0) throw UsageError("next_active_set: negative round");
    const int N = pattern.N;
    ActiveSet out;
    out.round = round;

    switch (pattern.kind) {
        case PatternSpec::Kind::UniformSample: {
            // Partial Fisher–Yates over 0..N-1; first S slots are the sample.
            auto s = rng::substream(master_seed, "pattern", static_cast<std::uint64_t>(round));
            std::vector<ClientId> idx(static_cast<std::size_t>(N));
            std::iota(idx.begin(), idx.end(), 0);
            for (int j = 0; j < pattern.S; ++j) {
                const auto k = j + static_cast<int>(s.next_below(static_cast<std::uint64_t>(N - j)));
                std::swap(idx[static_cast<std::size_t>(j)], idx[static_cast<std::size_t>(k)]);
            }
            out.members.assign(idx.begin(), idx.begin() + pattern.S);
            break;
        }
        case PatternSpec::Kind::IndependentProb: {
            out = bernoulli_set(N, round, master_seed, [&](int i) {
                return pattern.probs.empty() ? pattern.prob
                                             : pattern.probs[static_cast<std::size_t>(i)];
            });
            break;
        }
        case PatternSpec::Kind::DeterministicCyclic: {
            for (int j = 0; j < pattern.S; ++j) {
                out.members.push_back(static_cast<ClientId>(
                    (round * pattern.S + j) % N));
            }
            break;
        }
        case PatternSpec::Kind::ReshuffledCyclic: {
            const std::int64_t base = round * pattern.S;
            std::int64_t epoch = base / N;
            auto perm = epoch_permutation(N, master_seed, epoch);
            for (int j = 0; j < pattern.S; ++j) {
                const std::int64_t pos = base + j;
                if (pos / N != epoch) {
                    epoch = pos / N;
                    perm = epoch_permutation(N, master_seed, epoch);
                }
                out.members.push_back(perm[static_cast<std::size_t>(pos % N)]);
            }
            break;
        }
        case PatternSpec::Kind::SineProb: {
            const double p = clamp01(
                static_cast<double>(pattern.S) / N *
                (pattern.amplitude * std::sin(kPi * static_cast<double>(round) / pattern.period) +
                 pattern.offset));
            out = bernoulli_set(N, round, master_seed, [&](int) { return p; });
            break;
        }
        case PatternSpec::Kind::BiasedTiers: {
            out = bernoulli_set(N, round, master_seed, [&](int i) {
                return clamp01(pattern.p_start + (i / pattern.tier_size) * pattern.p_step);
            });
            break;
        }
        case PatternSpec::Kind::Replay: {
            if (round >= static_cast<std::int64_t>(pattern.replay.size())) {
                throw ConfigError("replay schedule exhausted at round " + std::to_string(round) +
                                  " (file has " + std::to_string(pattern.replay.size()) +
                                  " rounds)");
            }
            out.members = pattern.replay[static_cast<std::size_t>(round)];
            break;
        }
    }

    std::sort(out.members.begin(), out.members.end());
    out.members.erase(std::unique(out.members.begin(), out.members.end()), out.members.end());
    return out;
}

std::vector<ActiveSet> generate_schedule(const PatternSpec& pattern, std::int64_t T,
                                         std::uint64_t master_seed) {
    std::vector<ActiveSet> out;
    out.reserve(static_cast<std::size_t>(T));
    for (std::int64_t t = 0; t < T; ++t) out.push_back(next_active_set(pattern, t, master_seed));
    return out;
}

std::vector<std::vector<ClientId>> load_replay_schedule(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open replay schedule: " + path);
    std::vector<std::vector<ClientId>> out;
    std::string line;
    std::int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_array()) {
            throw ConfigError("replay schedule " + path + ": line " + std::to_string(lineno) +
                              " is not a JSON array");
        }
        std::vector<ClientId> row;
        for (const auto& v : j) {
            if (!v.is_number_integer())
                throw ConfigError("replay schedule " + path + ": line " +
                                  std::to_string(lineno) + " has a non-integer client id");
            row.push_back(v.get<ClientId>());
        }
        out.push_back(std::move(row));
    }
    return out;
}

void save_replay_schedule(const std::vector<ActiveSet>& schedule, const std::string& path) {
    std::ofstream outf(path);
    if (!outf) throw IoError("cannot write replay schedule: " + path);
    for (const auto& s : schedule) {
        outf << '[';
        for (std::size_t i = 0; i < s.members.size(); ++i) {
            if (i) outf << ',';
            outf << s.members[i];
        }
        outf << "]\n";
    }
    if (!outf) throw IoError("write failed for replay schedule: " + path);
}

DelayTracker::DelayTracker(int N) {
    if (N < 1) throw UsageError("DelayTracker: N must be >= 1");
    last_selected_.assign(static_cast<std::size_t>(N), -1);
}

std::int64_t DelayTracker::record_round(const ActiveSet& active) {
    if (active.round != next_round_) {
        throw UsageError("record_round: expected round " + std::to_string(next_round_) +
                         ", got " + std::to_string(active.round));
    }
    ClientId prev = -1;
    for (ClientId c : active.members) {
        if (c < 0 || c >= clients() || c <= prev)
            throw UsageError("record_round: active set must be sorted, unique, in range");
        prev = c;
        last_selected_[static_cast<std::size_t>(c)] = next_round_;
    }
    std::int64_t tau = 0;
    for (std::int64_t a : last_selected_) tau = std::max(tau, next_round_ - a);
    tau_history_.push_back(tau);
    if (has_history_) active_history_.push_back(active.members);
    tau_max_ = std::max(tau_max_, tau);
    tau_sum_ += tau;
    ++next_round_;
    return tau;
}

std::int64_t DelayTracker::min_last_selection(std::int64_t k) const {
    if (!has_history_)
        throw UsageError("min_last_selection: tracker restored without history");
    const std::int64_t target = k + tau_max_;
    if (k < 0 || target >= next_round_)
        throw UsageError("min_last_selection: round " + std::to_string(target) +
                         " not recorded yet");
    // Rebuild a_{i, target} from the stored schedule prefix.
    std::vector<std::int64_t> a(last_selected_.size(), -1);
    for (std::int64_t t = 0; t <= target; ++t) {
        for (ClientId c : active_history_[static_cast<std::size_t>(t)])
            a[static_cast<std::size_t>(c)] = t;
    }
    return *std::min_element(a.begin(), a.end());
}

DelayTracker DelayTracker::restore(std::vector<std::int64_t> last_selected,
                                   std::int64_t tau_max, std::int64_t tau_sum,
                                   std::int64_t rounds) {
    DelayTracker t(static_cast<int>(last_selected.size()));
    t.last_selected_ = std::move(last_selected);
    t.tau_max_ = tau_max;
    t.tau_sum_ = tau_sum;
    t.next_round_ = rounds;
    t.has_history_ = false;
    return t;
}

} // namespace fedsim
