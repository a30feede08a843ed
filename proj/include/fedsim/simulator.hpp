#pragma once

// Experiment driver: one full run (round loop, trace streaming, checkpoints,
// summary) and the (value, seed) sweep runner built on top of it.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsim/config.hpp"

namespace fedsim {

// Filled when hyper.theorem1 is set: the prescribed rates, the delay inputs
// they were computed from, and the convergence bound next to the measured
// average gradient norm.
struct TheoryReport {
    double eta_g = 0.0;
    double eta_l = 0.0;
    std::int64_t tau_max_used = 0;
    double tau_avg_used = 0.0;
    double delta_f_used = 0.0;
    double bound = 0.0;
    double avg_grad_norm_sq = 0.0;
    bool bound_holds = false;
};

struct RunSummary {
    std::string algorithm;
    std::uint64_t seed = 0;
    std::int64_t T = 0;
    std::int64_t start_round = 0; // nonzero when resumed from a checkpoint
    std::int64_t rounds_run = 0;  // absolute round count reached (== T when completed)
    bool completed = false;       // false when stop_after ended the run early
    bool diverged = false;

    // Post-run iterate x^(rounds_run).
    double final_loss = 0.0;
    double final_grad_norm_sq = 0.0;
    // Means over evaluated rounds (round-start iterates), checkpoint-safe.
    double avg_loss = 0.0;
    double avg_grad_norm_sq = 0.0;
    std::int64_t eval_count = 0;

    std::int64_t tau_max = 0;
    double tau_avg = 0.0;
    std::vector<std::int64_t> a_final; // last-selection round per client

    std::int64_t cum_down = 0;
    std::int64_t cum_up = 0;
    double wall_seconds = 0.0;

    std::optional<TheoryReport> theory;
    std::string trace_path; // empty when outputs were not written

    // In-memory instrument series for this invocation's evaluated rounds
    // (round-start values; starts at the resume point, not serialized).
    std::vector<std::int64_t> eval_rounds;
    std::vector<double> loss_series;
    std::vector<double> grad_series;
};

nlohmann::json summary_to_json(const RunSummary& s);

// Execute cfg. With write_outputs, the out directory receives config.json,
// trace.csv|trace.jsonl (appended to when resuming) and summary.json.
// Throws ConfigError on invalid configuration and DivergenceError when
// ||x|| explodes (partial outputs are still written first).
RunSummary run_simulation(const RunConfig& cfg, bool write_outputs = true);

struct SweepCell {
    nlohmann::json value;
    std::uint64_t seed = 0;
    std::string run_dir;
    RunSummary summary;
};

struct SweepReport {
    std::string axis;
    std::vector<SweepCell> cells;
    std::string aggregate_csv_path;
    std::string aggregate_json_path;
};

// One run per (value, seed); axis is a dotted path into the config JSON
// ("pattern.prob", "hyper.K", "algorithm", "seed", ...). Empty values is a
// UsageError; empty seeds means {base.seed}. Runs execute in parallel across
// FEDSIM_THREADS workers; outputs land under out_dir, plus aggregate.csv and
// aggregate_summary.json with per-value mean/median gradient statistics.
SweepReport run_sweep(const RunConfig& base, const std::string& axis,
                      const std::vector<nlohmann::json>& values,
                      std::vector<std::uint64_t> seeds, const std::string& out_dir);

// FEDSIM_THREADS, default 1; a non-positive or unparsable value is a
// ConfigError.
int threads_from_env();

// The objective exactly as run_simulation builds it (shared by `bounds`).
GlobalObjective build_objective(const RunConfig& cfg);

// Payload of the `bounds` subcommand: problem constants, delay statistics
// (measured from the schedule unless provided in hyper), the prescribed
// rates, the convergence bound, the pattern's closed-form tau_max estimate
// (null when none exists) and the matching per-case corollary rate.
nlohmann::json bounds_report(const RunConfig& cfg);

} // namespace fedsim
