#pragma once

// Round engines.
//
// All three SUM variants share the server update
//     y^(t) = y^(t-1) + sum_{i in S_t} delta_i,
//     x^(t+1) = x^(t) - (eta_g * eta_l * K / N) * y^(t),
// where delta_i is the difference between the client's freshly aggregated
// gradient and the one it last uploaded (its control vector h_i). After the
// merge, y^(t) equals the sum of every ever-active client's most recent
// aggregated gradient — the invariant the oracle reconstruction checks.
//
// The variants differ only in how a client builds its K gradients:
//   - FedSUM-B evaluates all K minibatch gradients at the received model;
//   - FedSUM runs K corrected local steps, the correction y_i = y^(t-1) - h_i
//     broadcast by the server (two downlink units);
//   - FedSUM-CR reconstructs that correction locally from the drift of the
//     global model since its last participation (one downlink unit):
//     y_i = (N / (eta_g eta_l K)) (z_i - x^(t)) / (t - a_i) - h_i.
// In every case delta_i = (1/K) sum_k g_i^(t,k) - h_i; we aggregate gradients
// directly (the displacement forms are algebraically identical and asserted
// equal in tests).
//
// FedAvg and SCAFFOLD (option II) are included as baselines.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/participation.hpp"
#include "fedsim/problems.hpp"

namespace fedsim {

enum class Algorithm { FedSumB, FedSum, FedSumCR, FedAvg, Scaffold };

const char* algorithm_name(Algorithm a);
std::optional<Algorithm> algorithm_from_name(const std::string& name);

struct HyperParams {
    double eta_g = 1.0;
    double eta_l = 0.01; // resolved per round by the driver when scheduled
    int K = 1;
    int N = 0;           // population size (server update divides by N)
    std::int64_t T = 0;  // informational; engines don't read it

    void validate() const;
};

struct ServerState {
    Vector x;
    Vector y;        // accumulated direction, y^(-1) = 0
    Vector c;        // SCAFFOLD server control variate (empty otherwise)
    std::int64_t t = 0;

    static ServerState init(const Vector& x0, Algorithm alg);
};

struct ClientPersistentState {
    Vector h;         // last uploaded aggregated gradient, h^(0) = 0
    Vector z;         // FedSUM-CR: stored global model, z^(0) = x^(0)
    std::int64_t a = -1; // FedSUM-CR: last participation round
    Vector ci;        // SCAFFOLD client control variate

    static std::vector<ClientPersistentState> init(int N, int dim, Algorithm alg,
                                                   const Vector& x0);
};

struct RoundReport {
    std::int64_t t = 0;
    int active_count = 0;
    double loss = 0.0;           // f(x^(t)), round-start iterate
    double grad_norm_sq = 0.0;   // ||grad f(x^(t))||^2
    bool evaluated = false;
    std::int64_t down_units = 0; // this round
    std::int64_t up_units = 0;
    double eta_l_used = 0.0;
    double wall_ms = 0.0;
};

// Test instrumentation: raw per-step gradients from each client's most recent
// participation (enough to rebuild y^(t) directly), the server-direction
// history, and per-participation probes for the FedSUM-CR identity and the
// displacement-form checks. Never allocated in normal runs.
struct GradientLog {
    struct ClientRound {
        std::int64_t round = -1;
        std::vector<Vector> grads;  // g_i^(t,k), k = 0..K-1
        Vector local_end;           // x_i^(t,K) (local-update variants)
        Vector y_i;                 // correction used (FedSUM / FedSUM-CR)
        Vector h_prev;              // h_i before the round's update
        double eta_l = 0.0;
    };
    struct CrProbe {
        std::int64_t t = 0;
        int client = 0;
        std::int64_t a_prev = -1;
        Vector y_i;
        Vector h_prev;
    };
    std::vector<ClientRound> latest; // indexed by client
    std::vector<Vector> y_history;   // y^(0), y^(1), ...
    std::vector<CrProbe> cr_probes;

    explicit GradientLog(int N) : latest(static_cast<std::size_t>(N)) {}
};

// Direct evaluation of the merge invariant: y = (1/K) sum over ever-active
// clients of their last-participation gradient sums.
Vector reconstruct_y_direct(const GradientLog& log, int dim);

RoundReport run_round_fedsum_b(ServerState& server, std::vector<ClientPersistentState>& clients,
                               const ActiveSet& active, const GlobalObjective& objective,
                               const HyperParams& hp, std::uint64_t seed,
                               bool evaluate = true, GradientLog* log = nullptr);
RoundReport run_round_fedsum(ServerState& server, std::vector<ClientPersistentState>& clients,
                             const ActiveSet& active, const GlobalObjective& objective,
                             const HyperParams& hp, std::uint64_t seed,
                             bool evaluate = true, GradientLog* log = nullptr);
RoundReport run_round_fedsum_cr(ServerState& server, std::vector<ClientPersistentState>& clients,
                                const ActiveSet& active, const GlobalObjective& objective,
                                const HyperParams& hp, std::uint64_t seed,
                                bool evaluate = true, GradientLog* log = nullptr);
RoundReport run_round_fedavg(ServerState& server, std::vector<ClientPersistentState>& clients,
                             const ActiveSet& active, const GlobalObjective& objective,
                             const HyperParams& hp, std::uint64_t seed,
                             bool evaluate = true, GradientLog* log = nullptr);
RoundReport run_round_scaffold(ServerState& server, std::vector<ClientPersistentState>& clients,
                               const ActiveSet& active, const GlobalObjective& objective,
                               const HyperParams& hp, std::uint64_t seed,
                               bool evaluate = true, GradientLog* log = nullptr);

RoundReport run_round(Algorithm alg, ServerState& server,
                      std::vector<ClientPersistentState>& clients, const ActiveSet& active,
                      const GlobalObjective& objective, const HyperParams& hp,
                      std::uint64_t seed, bool evaluate = true, GradientLog* log = nullptr);

} // namespace fedsim
