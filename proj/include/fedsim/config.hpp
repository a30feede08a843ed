#pragma once

// Run configuration: JSON round-trippable, validated before any compute.
// Every CLI flag overrides the corresponding JSON key (flags win).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsim/algorithms.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/participation.hpp"

namespace fedsim {

enum class ProblemKind { Quadratic, Logistic };
enum class EtaSchedule { Constant, SqrtDecay };

struct PatternConfig {
    std::string kind = "cyclic"; // uniform|independent|cyclic|reshuffled|sine|tiers|replay
    int S = 4;
    double prob = 0.2;
    std::vector<double> probs;
    double period = 5.0;
    double amplitude = 0.3;
    double offset = 0.7;
    int tier_size = 11;
    double p_start = 0.5;
    double p_step = -0.05;
    std::string replay_path;
};

struct ProblemConfig {
    std::string kind = "quadratic";
    int N = 20;
    int dim = 5;
    double radius = 3.0;
    double sigma = 0.1;
    std::vector<double> x0;     // empty = zeros
    std::vector<double> x_star; // empty = zeros (quadratic recenter target)
    // logistic
    int samples_per_class = 200;
    double alpha = 0.1;
    double l2 = 1e-3;
    int batch = 16;
};

struct HyperConfig {
    double eta_g = 1.0;
    std::string schedule = "sqrt_decay"; // constant | sqrt_decay
    double eta_l = 0.01;                 // constant-schedule value
    double eta0 = 0.01;                  // decay base: eta0 / sqrt(t/10 + 1)
    int K = 10;
    bool theorem1 = false;               // derive rates from theorem1_rates
    std::optional<double> tau_max;       // theorem1 inputs; measured if absent
    std::optional<double> tau_avg;
    std::optional<double> delta_f;       // override when f* is unknown
};

struct CheckpointConfig {
    std::int64_t every = 0;     // rounds between saves; 0 = off
    std::string path;           // base path (.json/.bin appended); default out/checkpoint
    std::string resume;         // base path of a checkpoint to resume from
    std::int64_t stop_after = -1; // stop (with a save) after this many rounds; test hook
};

struct RunConfig {
    std::string algorithm = "fedsum";
    std::int64_t T = 2000;
    std::uint64_t seed = 0;
    std::int64_t eval_every = 1;
    std::string out = "out";
    std::string format = "csv"; // csv | jsonl
    PatternConfig pattern;
    ProblemConfig problem;
    HyperConfig hyper;
    CheckpointConfig checkpoint;

    // Throws ConfigError with a specific message on any invalid field.
    void validate() const;

    Algorithm algorithm_kind() const;
    ProblemKind problem_kind() const;
    EtaSchedule eta_schedule() const;
    TraceFormat format_kind() const;

    // Build the participation pattern (loads the replay file if needed).
    PatternSpec build_pattern() const;
    // Local learning rate for round t under the configured schedule.
    double eta_l_at(std::int64_t t) const;
};

nlohmann::json to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);

// Recursive object merge used for "flags win over JSON".
void merge_into(nlohmann::json& base, const nlohmann::json& overlay);

} // namespace fedsim
