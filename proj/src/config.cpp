#include "fedsim/config.hpp"

#include <cmath>

namespace fedsim {

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

void read_optional(const nlohmann::json& j, const char* key, std::optional<double>& out) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    try {
        out = j.at(key).get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

} // namespace

void RunConfig::validate() const {
    if (!algorithm_from_name(algorithm))
        throw ConfigError("config: unknown algorithm '" + algorithm +
                          "' (fedsum_b|fedsum|fedsum_cr|fedavg|scaffold)");
    if (T < 1) throw ConfigError("config: T must be >= 1");
    if (eval_every < 1) throw ConfigError("config: eval_every must be >= 1");
    if (format != "csv" && format != "jsonl")
        throw ConfigError("config: format must be csv or jsonl");
    if (problem.kind != "quadratic" && problem.kind != "logistic")
        throw ConfigError("config: problem kind must be quadratic or logistic");
    if (problem.N < 1 || problem.dim < 1)
        throw ConfigError("config: need problem.N >= 1 and problem.dim >= 1");
    if (problem.sigma < 0 || problem.radius < 0)
        throw ConfigError("config: problem.sigma and problem.radius must be >= 0");
    if (!problem.x0.empty() && static_cast<int>(problem.x0.size()) != problem.dim)
        throw ConfigError("config: problem.x0 must have dim entries");
    if (!problem.x_star.empty() && static_cast<int>(problem.x_star.size()) != problem.dim)
        throw ConfigError("config: problem.x_star must have dim entries");
    if (problem.kind == "logistic") {
        if (problem.samples_per_class < 1)
            throw ConfigError("config: problem.samples_per_class must be >= 1");
        if (problem.alpha <= 0) throw ConfigError("config: problem.alpha must be > 0");
        if (problem.l2 < 0) throw ConfigError("config: problem.l2 must be >= 0");
        if (problem.batch < 1) throw ConfigError("config: problem.batch must be >= 1");
    }
    if (hyper.eta_g <= 0) throw ConfigError("config: hyper.eta_g must be > 0");
    if (hyper.schedule != "constant" && hyper.schedule != "sqrt_decay")
        throw ConfigError("config: hyper.schedule must be constant or sqrt_decay");
    if (hyper.schedule == "constant" && hyper.eta_l <= 0)
        throw ConfigError("config: hyper.eta_l must be > 0");
    if (hyper.schedule == "sqrt_decay" && hyper.eta0 <= 0)
        throw ConfigError("config: hyper.eta0 must be > 0");
    if (hyper.K < 1) throw ConfigError("config: hyper.K must be >= 1");
    if (hyper.tau_max && *hyper.tau_max < 0)
        throw ConfigError("config: hyper.tau_max must be >= 0");
    if (hyper.tau_avg && *hyper.tau_avg < 0)
        throw ConfigError("config: hyper.tau_avg must be >= 0");
    if (checkpoint.every < 0) throw ConfigError("config: checkpoint.every must be >= 0");
    build_pattern(); // pattern-specific validation (may read the replay file)
}

Algorithm RunConfig::algorithm_kind() const {
    auto a = algorithm_from_name(algorithm);
    if (!a) throw ConfigError("config: unknown algorithm '" + algorithm + "'");
    return *a;
}

ProblemKind RunConfig::problem_kind() const {
    return problem.kind == "logistic" ? ProblemKind::Logistic : ProblemKind::Quadratic;
}

EtaSchedule RunConfig::eta_schedule() const {
    return hyper.schedule == "constant" ? EtaSchedule::Constant : EtaSchedule::SqrtDecay;
}

TraceFormat RunConfig::format_kind() const {
    return format == "jsonl" ? TraceFormat::Jsonl : TraceFormat::Csv;
}

PatternSpec RunConfig::build_pattern() const {
    const int N = problem.N;
    const auto& p = pattern;
    if (p.kind == "uniform") return PatternSpec::uniform(N, p.S);
    if (p.kind == "independent") {
        if (!p.probs.empty()) return PatternSpec::independent(N, p.probs);
        return PatternSpec::independent(N, p.prob);
    }
    if (p.kind == "cyclic") return PatternSpec::cyclic(N, p.S);
    if (p.kind == "reshuffled") return PatternSpec::reshuffled(N, p.S);
    if (p.kind == "sine") return PatternSpec::sine(N, p.S, p.period, p.amplitude, p.offset);
    if (p.kind == "tiers") return PatternSpec::tiers(N, p.tier_size, p.p_start, p.p_step);
    if (p.kind == "replay") {
        if (p.replay_path.empty())
            throw ConfigError("config: replay pattern needs pattern.replay_path");
        return PatternSpec::from_replay(N, load_replay_schedule(p.replay_path));
    }
    throw ConfigError("config: unknown pattern kind '" + p.kind +
                      "' (uniform|independent|cyclic|reshuffled|sine|tiers|replay)");
}

double RunConfig::eta_l_at(std::int64_t t) const {
    if (eta_schedule() == EtaSchedule::Constant) return hyper.eta_l;
    return hyper.eta0 / std::sqrt(static_cast<double>(t) / 10.0 + 1.0);
}

nlohmann::json to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["algorithm"] = cfg.algorithm;
    j["T"] = cfg.T;
    j["seed"] = cfg.seed;
    j["eval_every"] = cfg.eval_every;
    j["out"] = cfg.out;
    j["format"] = cfg.format;

    nlohmann::json p;
    p["kind"] = cfg.pattern.kind;
    p["S"] = cfg.pattern.S;
    p["prob"] = cfg.pattern.prob;
    p["probs"] = cfg.pattern.probs;
    p["period"] = cfg.pattern.period;
    p["amplitude"] = cfg.pattern.amplitude;
    p["offset"] = cfg.pattern.offset;
    p["tier_size"] = cfg.pattern.tier_size;
    p["p_start"] = cfg.pattern.p_start;
    p["p_step"] = cfg.pattern.p_step;
    p["replay_path"] = cfg.pattern.replay_path;
    j["pattern"] = std::move(p);

    nlohmann::json q;
    q["kind"] = cfg.problem.kind;
    q["N"] = cfg.problem.N;
    q["dim"] = cfg.problem.dim;
    q["radius"] = cfg.problem.radius;
    q["sigma"] = cfg.problem.sigma;
    q["x0"] = cfg.problem.x0;
    q["x_star"] = cfg.problem.x_star;
    q["samples_per_class"] = cfg.problem.samples_per_class;
    q["alpha"] = cfg.problem.alpha;
    q["l2"] = cfg.problem.l2;
    q["batch"] = cfg.problem.batch;
    j["problem"] = std::move(q);

    nlohmann::json h;
    h["eta_g"] = cfg.hyper.eta_g;
    h["schedule"] = cfg.hyper.schedule;
    h["eta_l"] = cfg.hyper.eta_l;
    h["eta0"] = cfg.hyper.eta0;
    h["K"] = cfg.hyper.K;
    h["theorem1"] = cfg.hyper.theorem1;
    h["tau_max"] = cfg.hyper.tau_max ? nlohmann::json(*cfg.hyper.tau_max) : nlohmann::json();
    h["tau_avg"] = cfg.hyper.tau_avg ? nlohmann::json(*cfg.hyper.tau_avg) : nlohmann::json();
    h["delta_f"] = cfg.hyper.delta_f ? nlohmann::json(*cfg.hyper.delta_f) : nlohmann::json();
    j["hyper"] = std::move(h);

    nlohmann::json c;
    c["every"] = cfg.checkpoint.every;
    c["path"] = cfg.checkpoint.path;
    c["resume"] = cfg.checkpoint.resume;
    c["stop_after"] = cfg.checkpoint.stop_after;
    j["checkpoint"] = std::move(c);
    return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: top-level JSON must be an object");
    RunConfig cfg;
    read_field(j, "algorithm", cfg.algorithm);
    read_field(j, "T", cfg.T);
    read_field(j, "seed", cfg.seed);
    read_field(j, "eval_every", cfg.eval_every);
    read_field(j, "out", cfg.out);
    read_field(j, "format", cfg.format);

    if (j.contains("pattern")) {
        const auto& p = j.at("pattern");
        read_field(p, "kind", cfg.pattern.kind);
        read_field(p, "S", cfg.pattern.S);
        read_field(p, "prob", cfg.pattern.prob);
        read_field(p, "probs", cfg.pattern.probs);
        read_field(p, "period", cfg.pattern.period);
        read_field(p, "amplitude", cfg.pattern.amplitude);
        read_field(p, "offset", cfg.pattern.offset);
        read_field(p, "tier_size", cfg.pattern.tier_size);
        read_field(p, "p_start", cfg.pattern.p_start);
        read_field(p, "p_step", cfg.pattern.p_step);
        read_field(p, "replay_path", cfg.pattern.replay_path);
    }
    if (j.contains("problem")) {
        const auto& q = j.at("problem");
        read_field(q, "kind", cfg.problem.kind);
        read_field(q, "N", cfg.problem.N);
        read_field(q, "dim", cfg.problem.dim);
        read_field(q, "radius", cfg.problem.radius);
        read_field(q, "sigma", cfg.problem.sigma);
        read_field(q, "x0", cfg.problem.x0);
        read_field(q, "x_star", cfg.problem.x_star);
        read_field(q, "samples_per_class", cfg.problem.samples_per_class);
        read_field(q, "alpha", cfg.problem.alpha);
        read_field(q, "l2", cfg.problem.l2);
        read_field(q, "batch", cfg.problem.batch);
    }
    if (j.contains("hyper")) {
        const auto& h = j.at("hyper");
        read_field(h, "eta_g", cfg.hyper.eta_g);
        read_field(h, "schedule", cfg.hyper.schedule);
        read_field(h, "eta_l", cfg.hyper.eta_l);
        read_field(h, "eta0", cfg.hyper.eta0);
        read_field(h, "K", cfg.hyper.K);
        read_field(h, "theorem1", cfg.hyper.theorem1);
        read_optional(h, "tau_max", cfg.hyper.tau_max);
        read_optional(h, "tau_avg", cfg.hyper.tau_avg);
        read_optional(h, "delta_f", cfg.hyper.delta_f);
    }
    if (j.contains("checkpoint")) {
        const auto& c = j.at("checkpoint");
        read_field(c, "every", cfg.checkpoint.every);
        read_field(c, "path", cfg.checkpoint.path);
        read_field(c, "resume", cfg.checkpoint.resume);
        read_field(c, "stop_after", cfg.checkpoint.stop_after);
    }
    return cfg;
}

void merge_into(nlohmann::json& base, const nlohmann::json& overlay) {
    if (!overlay.is_object() || !base.is_object()) {
        base = overlay;
        return;
    }
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
        if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object()) {
            merge_into(base[it.key()], it.value());
        } else {
            base[it.key()] = it.value();
        }
    }
}

} // namespace fedsim
