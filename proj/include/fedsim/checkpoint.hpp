#pragma once

// Checkpoint = <base>.json (metadata, section index, integer state) plus
// <base>.bin (raw little-endian float64 vectors). Doubles round-trip
// bit-exactly, so a resumed run replays the remaining rounds byte-identically
// — everything else the rounds consume (noise, schedules, learning rates) is
// a pure function of (seed, round).

#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/algorithms.hpp"

namespace fedsim {

struct CheckpointState {
    std::string algorithm;
    std::uint64_t seed = 0;
    int N = 0;
    int dim = 0;
    std::int64_t t = 0; // next round to run
    ServerState server;
    std::vector<ClientPersistentState> clients;
    // Delay-tracker counters.
    std::vector<std::int64_t> last_selected;
    std::int64_t tau_max = 0;
    std::int64_t tau_sum = 0;
    // Workload counters.
    std::int64_t cum_down = 0;
    std::int64_t cum_up = 0;
    // Summary accumulators.
    double grad_sum = 0.0;
    double loss_sum = 0.0;
    std::int64_t eval_count = 0;
    double last_loss = 0.0;
    double last_grad_norm_sq = 0.0;
};

void save_checkpoint(const CheckpointState& st, const std::string& base_path);
CheckpointState load_checkpoint(const std::string& base_path);

} // namespace fedsim
