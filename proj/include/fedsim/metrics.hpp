#pragma once

// Communication-workload accounting and trace serialization.
//
// One workload unit = one full model-sized vector over the wire. Per active
// client per round:
//     FedAvg     1 down + 1 up        (x down, model delta up)
//     FedSUM-B   1 down + 1 up        (x down, delta up)
//     FedSUM     2 down + 1 up        (x and y down, delta up)
//     FedSUM-CR  1 down + 1 up        (x down, delta up)
//     SCAFFOLD   2 down + 2 up        (x and c down, dy and dc up)
// Scalars (round index, learning rates) are free.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedsim/algorithms.hpp"

namespace fedsim {

struct UnitCosts {
    int down = 0;
    int up = 0;
};
UnitCosts unit_costs(Algorithm alg);

struct CommLedger {
    std::int64_t cum_down = 0;
    std::int64_t cum_up = 0;

    // Incorporate one round; returns (down, up) added by this round.
    std::pair<std::int64_t, std::int64_t> record(Algorithm alg, int active_count);
};

struct TraceRow {
    std::int64_t round = 0;
    int active = 0;
    std::int64_t tau = 0;
    double loss = 0.0;
    double grad_norm_sq = 0.0;
    std::int64_t cum_down = 0;
    std::int64_t cum_up = 0;
    double eta_l = 0.0;
};

enum class TraceFormat { Csv, Jsonl };

inline constexpr const char* kTraceCsvHeader =
    "round,active,tau,loss,grad_norm_sq,cum_down,cum_up,eta_l";

// Shortest round-trippable decimal rendering (17 significant digits).
std::string format_double(double v);

// Serialize one row without a trailing newline (shared by emit/append paths).
std::string format_trace_row(const TraceRow& row, TraceFormat format);

// Write a whole trace. Rows must be nonempty (UsageError otherwise); I/O
// failures raise IoError carrying the path.
void emit_trace(const std::vector<TraceRow>& rows, const std::filesystem::path& path,
                TraceFormat format);

// Parse-back used by tests and sweep aggregation (CSV only).
std::vector<TraceRow> parse_trace_csv(const std::filesystem::path& path);

} // namespace fedsim
