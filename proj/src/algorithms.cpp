#include "fedsim/algorithms.hpp"

#include <chrono>
#include <cmath>

namespace fedsim {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

rng::Stream grad_stream(std::uint64_t seed, std::int64_t t, ClientId i, int k) {
    // One stream per (round, client, local step), shared across algorithms so
    // that e.g. the K=1 trajectories of the three SUM variants see identical
    // noise.
    return rng::substream(seed, "grad", static_cast<std::uint64_t>(t),
                          static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k));
}

void start_report(RoundReport& rep, const ServerState& server,
                  const ActiveSet& active, const GlobalObjective& objective,
                  const HyperParams& hp, bool evaluate) {
    rep.t = server.t;
    rep.active_count = static_cast<int>(active.members.size());
    rep.eta_l_used = hp.eta_l;
    if (evaluate) {
        rep.loss = objective.eval(server.x);
        rep.grad_norm_sq = objective.grad(server.x).squaredNorm();
        rep.evaluated = true;
    }
}

void check_round(const ServerState& server, const ActiveSet& active, const HyperParams& hp,
                 const GlobalObjective& objective) {
    hp.validate();
    if (active.round != server.t)
        throw UsageError("run_round: active set round " + std::to_string(active.round) +
                         " does not match server round " + std::to_string(server.t));
    if (hp.N != objective.N())
        throw UsageError("run_round: HyperParams.N disagrees with objective");
}

// Shared final server line of Algorithms 1-3.
void server_merge_update(ServerState& server, const Vector& delta_sum, const HyperParams& hp) {
    server.y += delta_sum;
    server.x -= (hp.eta_g * hp.eta_l * hp.K / static_cast<double>(hp.N)) * server.y;
    server.t += 1;
}

void log_y(GradientLog* log, const ServerState& server) {
    if (log) log->y_history.push_back(server.y);
}

} // namespace

const char* algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::FedSumB: return "fedsum_b";
        case Algorithm::FedSum: return "fedsum";
        case Algorithm::FedSumCR: return "fedsum_cr";
        case Algorithm::FedAvg: return "fedavg";
        case Algorithm::Scaffold: return "scaffold";
    }
    return "?";
}

std::optional<Algorithm> algorithm_from_name(const std::string& name) {
    if (name == "fedsum_b") return Algorithm::FedSumB;
    if (name == "fedsum") return Algorithm::FedSum;
    if (name == "fedsum_cr") return Algorithm::FedSumCR;
    if (name == "fedavg") return Algorithm::FedAvg;
    if (name == "scaffold") return Algorithm::Scaffold;
    return std::nullopt;
}

void HyperParams::validate() const {
    if (!(eta_g > 0) || !(eta_l > 0)) throw ConfigError("hyper: learning rates must be > 0");
    if (K < 1) throw ConfigError("hyper: K must be >= 1");
    if (N < 1) throw ConfigError("hyper: N must be >= 1");
}

ServerState ServerState::init(const Vector& x0, Algorithm alg) {
    ServerState s;
    s.x = x0;
    s.y = Vector::Zero(x0.size());
    if (alg == Algorithm::Scaffold) s.c = Vector::Zero(x0.size());
    s.t = 0;
    return s;
}

std::vector<ClientPersistentState> ClientPersistentState::init(int N, int dim, Algorithm alg,
                                                               const Vector& x0) {
    std::vector<ClientPersistentState> out(static_cast<std::size_t>(N));
    for (auto& c : out) {
        c.h = Vector::Zero(dim);
        if (alg == Algorithm::FedSumCR) {
            c.z = x0;
            c.a = -1;
        }
        if (alg == Algorithm::Scaffold) c.ci = Vector::Zero(dim);
    }
    return out;
}

Vector reconstruct_y_direct(const GradientLog& log, int dim) {
    Vector y = Vector::Zero(dim);
    for (const auto& cr : log.latest) {
        if (cr.round < 0) continue;
        Vector sum = Vector::Zero(dim);
        for (const auto& g : cr.grads) sum += g;
        y += sum / static_cast<double>(cr.grads.size());
    }
    return y;
}

RoundReport run_round_fedsum_b(ServerState& server, std::vector<ClientPersistentState>& clients,
                               const ActiveSet& active, const GlobalObjective& objective,
                               const HyperParams& hp, std::uint64_t seed,
                               bool evaluate, GradientLog* log) {
    const auto t0 = Clock::now();
    check_round(server, active, hp, objective);
    RoundReport rep;
    start_report(rep, server, active, objective, hp, evaluate);

    Vector delta_sum = Vector::Zero(objective.dim);
    for (ClientId i : active.members) { // ascending order: reproducible sums
        auto& cs = clients[static_cast<std::size_t>(i)];
        GradientLog::ClientRound* lr = nullptr;
        if (log) {
            lr = &log->latest[static_cast<std::size_t>(i)];
            *lr = GradientLog::ClientRound{};
            lr->round = server.t;
            lr->h_prev = cs.h;
            lr->eta_l = hp.eta_l;
        }
        // All K minibatch gradients at the received model.
        Vector sum_g = Vector::Zero(objective.dim);
        for (int k = 0; k < hp.K; ++k) {
            auto s = grad_stream(seed, server.t, i, k);
            Vector g = objective.clients[static_cast<std::size_t>(i)]->stoch_grad(server.x, s);
            if (lr) lr->grads.push_back(g);
            sum_g += g;
        }
        const Vector avg_g = sum_g / static_cast<double>(hp.K);
        delta_sum += avg_g - cs.h;
        cs.h = avg_g;
    }
    server_merge_update(server, delta_sum, hp);
    log_y(log, server);

    rep.down_units = rep.active_count;
    rep.up_units = rep.active_count;
    rep.wall_ms = elapsed_ms(t0);
    return rep;
}

namespace {

// Common body of FedSUM and FedSUM-CR: K corrected local steps from x^(t),
// delta from the gradient average. `y_i` is the variant-specific correction.
void corrected_local_round(const Vector& x, const Vector& y_i, ClientId i,
                           const GlobalObjective& objective, const HyperParams& hp,
                           std::uint64_t seed, std::int64_t t,
                           ClientPersistentState& cs, Vector& delta_sum,
                           GradientLog::ClientRound* lr) {
    Vector xi = x;
    Vector sum_g = Vector::Zero(objective.dim);
    for (int k = 0; k < hp.K; ++k) {
        auto s = grad_stream(seed, t, i, k);
        Vector g = objective.clients[static_cast<std::size_t>(i)]->stoch_grad(xi, s);
        if (lr) lr->grads.push_back(g);
        sum_g += g;
        xi -= (hp.eta_l / static_cast<double>(hp.N)) * (g + y_i);
    }
    const Vector avg_g = sum_g / static_cast<double>(hp.K);
    // delta_i = N(x - x_i^(t,K))/(eta_l K) - y_i - h_i, which telescopes to
    // avg_g - h_i; h_i <- N(x - x_i^(t,K))/(eta_l K) - y_i = avg_g.
    delta_sum += avg_g - cs.h;
    cs.h = avg_g;
    if (lr) {
        lr->local_end = xi;
        lr->y_i = y_i;
    }
}

} // namespace

RoundReport run_round_fedsum(ServerState& server, std::vector<ClientPersistentState>& clients,
                             const ActiveSet& active, const GlobalObjective& objective,
                             const HyperParams& hp, std::uint64_t seed,
                             bool evaluate, GradientLog* log) {
    const auto t0 = Clock::now();
    check_round(server, active, hp, objective);
    RoundReport rep;
    start_report(rep, server, active, objective, hp, evaluate);

    Vector delta_sum = Vector::Zero(objective.dim);
    for (ClientId i : active.members) {
        auto& cs = clients[static_cast<std::size_t>(i)];
        GradientLog::ClientRound* lr = nullptr;
        if (log) {
            lr = &log->latest[static_cast<std::size_t>(i)];
            *lr = GradientLog::ClientRound{};
            lr->round = server.t;
            lr->h_prev = cs.h;
            lr->eta_l = hp.eta_l;
        }
        // Correction from the broadcast direction: y_i = y^(t-1) - h_i.
        const Vector y_i = server.y - cs.h;
        corrected_local_round(server.x, y_i, i, objective, hp, seed, server.t, cs, delta_sum, lr);
    }
    server_merge_update(server, delta_sum, hp);
    log_y(log, server);

    rep.down_units = 2 * rep.active_count; // x and y
    rep.up_units = rep.active_count;       // delta only
    rep.wall_ms = elapsed_ms(t0);
    return rep;
}

RoundReport run_round_fedsum_cr(ServerState& server, std::vector<ClientPersistentState>& clients,
                                const ActiveSet& active, const GlobalObjective& objective,
                                const HyperParams& hp, std::uint64_t seed,
                                bool evaluate, GradientLog* log) {
    const auto t0 = Clock::now();
    check_round(server, active, hp, objective);
    RoundReport rep;
    start_report(rep, server, active, objective, hp, evaluate);

    Vector delta_sum = Vector::Zero(objective.dim);
    for (ClientId i : active.members) {
        auto& cs = clients[static_cast<std::size_t>(i)];
        GradientLog::ClientRound* lr = nullptr;
        if (log) {
            lr = &log->latest[static_cast<std::size_t>(i)];
            *lr = GradientLog::ClientRound{};
            lr->round = server.t;
            lr->h_prev = cs.h;
            lr->eta_l = hp.eta_l;
        }
        // Client-side reconstruction of the correction from the model drift
        // since the last participation; a = -1 gives divisor t + 1 (and zero
        // drift at t = 0, since z starts at x^(0)).
        const auto gap = static_cast<double>(server.t - cs.a);
        if (gap <= 0) throw UsageError("fedsum_cr: non-positive participation gap");
        const Vector y_i =
            static_cast<double>(hp.N) / (hp.eta_g * hp.eta_l * hp.K) * (cs.z - server.x) / gap -
            cs.h;
        if (log) {
            log->cr_probes.push_back({server.t, i, cs.a, y_i, cs.h});
        }
        corrected_local_round(server.x, y_i, i, objective, hp, seed, server.t, cs, delta_sum, lr);
        cs.z = server.x;
        cs.a = server.t;
    }
    server_merge_update(server, delta_sum, hp);
    log_y(log, server);

    rep.down_units = rep.active_count; // x only
    rep.up_units = rep.active_count;
    rep.wall_ms = elapsed_ms(t0);
    return rep;
}

RoundReport run_round_fedavg(ServerState& server, std::vector<ClientPersistentState>& clients,
                             const ActiveSet& active, const GlobalObjective& objective,
                             const HyperParams& hp, std::uint64_t seed,
                             bool evaluate, GradientLog* log) {
    (void)clients;
    const auto t0 = Clock::now();
    check_round(server, active, hp, objective);
    RoundReport rep;
    start_report(rep, server, active, objective, hp, evaluate);

    if (!active.members.empty()) {
        Vector delta_mean = Vector::Zero(objective.dim);
        for (ClientId i : active.members) {
            Vector xi = server.x;
            for (int k = 0; k < hp.K; ++k) {
                auto s = grad_stream(seed, server.t, i, k);
                xi -= hp.eta_l * objective.clients[static_cast<std::size_t>(i)]->stoch_grad(xi, s);
            }
            delta_mean += xi - server.x;
        }
        delta_mean /= static_cast<double>(active.members.size());
        server.x += hp.eta_g * delta_mean;
    }
    server.t += 1;
    log_y(log, server);

    rep.down_units = rep.active_count;
    rep.up_units = rep.active_count;
    rep.wall_ms = elapsed_ms(t0);
    return rep;
}

RoundReport run_round_scaffold(ServerState& server, std::vector<ClientPersistentState>& clients,
                               const ActiveSet& active, const GlobalObjective& objective,
                               const HyperParams& hp, std::uint64_t seed,
                               bool evaluate, GradientLog* log) {
    const auto t0 = Clock::now();
    check_round(server, active, hp, objective);
    if (server.c.size() != objective.dim)
        throw UsageError("scaffold: server control variate not initialized");
    RoundReport rep;
    start_report(rep, server, active, objective, hp, evaluate);

    if (!active.members.empty()) {
        Vector dy_mean = Vector::Zero(objective.dim);
        Vector dc_sum = Vector::Zero(objective.dim);
        for (ClientId i : active.members) {
            auto& cs = clients[static_cast<std::size_t>(i)];
            Vector xi = server.x;
            for (int k = 0; k < hp.K; ++k) {
                auto s = grad_stream(seed, server.t, i, k);
                const Vector g =
                    objective.clients[static_cast<std::size_t>(i)]->stoch_grad(xi, s);
                xi -= hp.eta_l * (g - cs.ci + server.c);
            }
            // Option II: c_i+ = c_i - c + (x - x_i)/(K eta_l).
            const Vector ci_new =
                cs.ci - server.c + (server.x - xi) / (hp.K * hp.eta_l);
            dy_mean += xi - server.x;
            dc_sum += ci_new - cs.ci;
            cs.ci = ci_new;
        }
        dy_mean /= static_cast<double>(active.members.size());
        server.x += hp.eta_g * dy_mean;
        server.c += dc_sum / static_cast<double>(hp.N);
    }
    server.t += 1;
    log_y(log, server);

    rep.down_units = 2 * rep.active_count; // x and c
    rep.up_units = 2 * rep.active_count;   // dy and dc
    rep.wall_ms = elapsed_ms(t0);
    return rep;
}

RoundReport run_round(Algorithm alg, ServerState& server,
                      std::vector<ClientPersistentState>& clients, const ActiveSet& active,
                      const GlobalObjective& objective, const HyperParams& hp,
                      std::uint64_t seed, bool evaluate, GradientLog* log) {
    switch (alg) {
        case Algorithm::FedSumB:
            return run_round_fedsum_b(server, clients, active, objective, hp, seed, evaluate, log);
        case Algorithm::FedSum:
            return run_round_fedsum(server, clients, active, objective, hp, seed, evaluate, log);
        case Algorithm::FedSumCR:
            return run_round_fedsum_cr(server, clients, active, objective, hp, seed, evaluate, log);
        case Algorithm::FedAvg:
            return run_round_fedavg(server, clients, active, objective, hp, seed, evaluate, log);
        case Algorithm::Scaffold:
            return run_round_scaffold(server, clients, active, objective, hp, seed, evaluate, log);
    }
    throw UsageError("run_round: unknown algorithm");
}

} // namespace fedsim
