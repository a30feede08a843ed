#include "fedsim/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include "fedsim/checkpoint.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/theory.hpp"

namespace fedsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr double kDivergenceNorm = 1e12;
} // namespace

GlobalObjective build_objective(const RunConfig& cfg) {
    const auto& p = cfg.problem;
    Vector x0, x_star;
    const Vector* x0_ptr = nullptr;
    const Vector* x_star_ptr = nullptr;
    if (!p.x0.empty()) {
        x0 = Eigen::Map<const Vector>(p.x0.data(), static_cast<Eigen::Index>(p.x0.size()));
        x0_ptr = &x0;
    }
    if (!p.x_star.empty()) {
        x_star = Eigen::Map<const Vector>(p.x_star.data(),
                                          static_cast<Eigen::Index>(p.x_star.size()));
        x_star_ptr = &x_star;
    } else {
        // Default the quadratic minimizer to a unit vector so the run does not
        // start at the optimum (x0 defaults to zero): delta_f = 1/2 exactly.
        x_star = Vector::Constant(p.dim, 1.0 / std::sqrt(static_cast<double>(p.dim)));
        x_star_ptr = &x_star;
    }
    switch (cfg.problem_kind()) {
    case ProblemKind::Quadratic:
        return make_quadratic_ensemble(p.N, p.dim, p.radius, p.sigma, cfg.seed, x_star_ptr,
                                       x0_ptr);
    case ProblemKind::Logistic:
        return make_logistic_ensemble(p.N, p.dim, p.samples_per_class, p.alpha, p.l2, p.batch,
                                      cfg.seed, x0_ptr);
    }
    throw ConfigError("unknown problem kind");
}

namespace {

struct ResolvedRates {
    double eta_g;
    double eta_l_constant; // only meaningful in theorem mode
    bool theorem_mode;
    std::optional<TheoryReport> theory;
};

// In theorem mode the delay statistics are needed before the run; unless
// supplied they are measured from the schedule, which is a pure function of
// (pattern, seed) and therefore matches the run exactly.
ResolvedRates resolve_rates(const RunConfig& cfg, const GlobalObjective& objective,
                            const PatternSpec& pattern) {
    ResolvedRates r{cfg.hyper.eta_g, 0.0, false, std::nullopt};
    if (!cfg.hyper.theorem1) return r;

    DelaySummary delays;
    if (cfg.hyper.tau_max.has_value() && cfg.hyper.tau_avg.has_value()) {
        delays.tau_max = static_cast<std::int64_t>(*cfg.hyper.tau_max);
        delays.tau_avg = *cfg.hyper.tau_avg;
    } else {
        DelayTracker tracker(pattern.N);
        for (const auto& s : generate_schedule(pattern, cfg.T, cfg.seed)) {
            tracker.record_round(s);
        }
        delays.tau_max = tracker.tau_max();
        delays.tau_avg = tracker.tau_avg();
    }

    double delta_f = 0.0;
    if (cfg.hyper.delta_f.has_value()) {
        delta_f = *cfg.hyper.delta_f;
    } else if (objective.delta_f.has_value()) {
        delta_f = *objective.delta_f;
    } else {
        throw ConfigError("theorem1 mode needs delta_f: pass hyper.delta_f "
                          "(the problem's f* is unknown)");
    }

    ProblemConstants constants{objective.L, objective.sigma, delta_f,
                               objective.F0,  objective.N(),  cfg.hyper.K,
                               cfg.T};
    const Rates rates = theorem1_rates(constants, delays);

    TheoryReport report;
    report.eta_g = rates.eta_g;
    report.eta_l = rates.eta_l;
    report.tau_max_used = delays.tau_max;
    report.tau_avg_used = delays.tau_avg;
    report.delta_f_used = delta_f;
    report.bound = theorem1_bound(constants, delays);

    r.eta_g = rates.eta_g;
    r.eta_l_constant = rates.eta_l;
    r.theorem_mode = true;
    r.theory = report;
    return r;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::string sanitize_label(const json& v) {
    std::string raw = v.is_string() ? v.get<std::string>() : v.dump();
    for (char& c : raw) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '.' || c == '-' || c == '_';
        if (!ok) c = '_';
    }
    return raw;
}

} // namespace

json summary_to_json(const RunSummary& s) {
    json j;
    j["algorithm"] = s.algorithm;
    j["seed"] = s.seed;
    j["T"] = s.T;
    j["start_round"] = s.start_round;
    j["rounds_run"] = s.rounds_run;
    j["completed"] = s.completed;
    j["diverged"] = s.diverged;
    j["final_loss"] = s.final_loss;
    j["final_grad_norm_sq"] = s.final_grad_norm_sq;
    j["avg_loss"] = s.avg_loss;
    j["avg_grad_norm_sq"] = s.avg_grad_norm_sq;
    j["eval_count"] = s.eval_count;
    j["tau_max"] = s.tau_max;
    j["tau_avg"] = s.tau_avg;
    j["a_final"] = s.a_final;
    j["cum_down"] = s.cum_down;
    j["cum_up"] = s.cum_up;
    j["wall_seconds"] = s.wall_seconds;
    j["trace_path"] = s.trace_path;
    if (s.theory.has_value()) {
        const auto& t = *s.theory;
        j["theory"] = {{"eta_g", t.eta_g},
                       {"eta_l", t.eta_l},
                       {"tau_max_used", t.tau_max_used},
                       {"tau_avg_used", t.tau_avg_used},
                       {"delta_f_used", t.delta_f_used},
                       {"bound", t.bound},
                       {"avg_grad_norm_sq", t.avg_grad_norm_sq},
                       {"bound_holds", t.bound_holds}};
    } else {
        j["theory"] = nullptr;
    }
    return j;
}

RunSummary run_simulation(const RunConfig& cfg, bool write_outputs) {
    const auto wall_start = std::chrono::steady_clock::now();
    cfg.validate();

    const Algorithm alg = cfg.algorithm_kind();
    const PatternSpec pattern = cfg.build_pattern();
    GlobalObjective objective = build_objective(cfg);
    const ResolvedRates rates = resolve_rates(cfg, objective, pattern);

    HyperParams hp;
    hp.eta_g = rates.eta_g;
    hp.K = cfg.hyper.K;
    hp.N = objective.N();
    hp.T = cfg.T;
    hp.eta_l = rates.theorem_mode ? rates.eta_l_constant : cfg.eta_l_at(0);
    hp.validate();

    // State: fresh or restored.
    ServerState server;
    std::vector<ClientPersistentState> clients;
    DelayTracker tracker(objective.N());
    CommLedger ledger;
    double loss_sum = 0.0, grad_sum = 0.0;
    std::int64_t eval_count = 0;
    std::int64_t t0 = 0;

    const bool resuming = !cfg.checkpoint.resume.empty();
    if (resuming) {
        CheckpointState st = load_checkpoint(cfg.checkpoint.resume);
        if (st.algorithm != cfg.algorithm) {
            throw ConfigError("checkpoint algorithm '" + st.algorithm +
                              "' does not match configured '" + cfg.algorithm + "'");
        }
        if (st.seed != cfg.seed || st.N != objective.N() || st.dim != objective.dim) {
            throw ConfigError("checkpoint (seed, N, dim) does not match the configuration");
        }
        server = std::move(st.server);
        clients = std::move(st.clients);
        tracker = DelayTracker::restore(st.last_selected, st.tau_max, st.tau_sum, st.t);
        ledger.cum_down = st.cum_down;
        ledger.cum_up = st.cum_up;
        loss_sum = st.loss_sum;
        grad_sum = st.grad_sum;
        eval_count = st.eval_count;
        t0 = st.t;
    } else {
        server = ServerState::init(objective.x0, alg);
        clients = ClientPersistentState::init(objective.N(), objective.dim, alg, objective.x0);
    }

    // Output plumbing.
    const TraceFormat format = cfg.format_kind();
    fs::path out_dir(cfg.out);
    fs::path trace_path;
    std::ofstream trace;
    if (write_outputs) {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw IoError("cannot create output directory " + out_dir.string());
        write_text_file(out_dir / "config.json", to_json(cfg).dump(2) + "\n");
        trace_path = out_dir / (format == TraceFormat::Csv ? "trace.csv" : "trace.jsonl");
        const bool append = resuming && fs::exists(trace_path);
        trace.open(trace_path, append ? std::ios::app : std::ios::trunc);
        if (!trace) throw IoError("cannot open trace file " + trace_path.string());
        if (!append && format == TraceFormat::Csv) trace << kTraceCsvHeader << '\n';
    }

    std::string checkpoint_base = cfg.checkpoint.path;
    if (checkpoint_base.empty()) checkpoint_base = (out_dir / "checkpoint").string();

    auto save_state = [&](std::int64_t t_next) {
        CheckpointState st;
        st.algorithm = cfg.algorithm;
        st.seed = cfg.seed;
        st.N = objective.N();
        st.dim = objective.dim;
        st.t = t_next;
        st.server = server;
        st.clients = clients;
        st.last_selected = tracker.last_selected();
        st.tau_max = tracker.tau_max();
        st.tau_sum = tracker.tau_sum();
        st.cum_down = ledger.cum_down;
        st.cum_up = ledger.cum_up;
        st.grad_sum = grad_sum;
        st.loss_sum = loss_sum;
        st.eval_count = eval_count;
        trace.flush();
        save_checkpoint(st, checkpoint_base);
    };

    RunSummary summary;
    summary.algorithm = cfg.algorithm;
    summary.seed = cfg.seed;
    summary.T = cfg.T;
    summary.start_round = t0;
    summary.theory = rates.theory;
    if (write_outputs) summary.trace_path = trace_path.string();

    auto finalize = [&](std::int64_t t_reached, bool completed, bool diverged) {
        summary.rounds_run = t_reached;
        summary.completed = completed;
        summary.diverged = diverged;
        summary.tau_max = tracker.tau_max();
        summary.tau_avg = tracker.tau_avg();
        summary.a_final = tracker.last_selected();
        summary.cum_down = ledger.cum_down;
        summary.cum_up = ledger.cum_up;
        summary.eval_count = eval_count;
        summary.avg_loss = eval_count > 0 ? loss_sum / static_cast<double>(eval_count) : 0.0;
        summary.avg_grad_norm_sq =
            eval_count > 0 ? grad_sum / static_cast<double>(eval_count) : 0.0;
        if (!diverged) {
            summary.final_loss = objective.eval(server.x);
            summary.final_grad_norm_sq = objective.grad(server.x).squaredNorm();
        } else {
            summary.final_loss = std::numeric_limits<double>::quiet_NaN();
            summary.final_grad_norm_sq = std::numeric_limits<double>::quiet_NaN();
        }
        if (summary.theory.has_value()) {
            summary.theory->avg_grad_norm_sq = summary.avg_grad_norm_sq;
            summary.theory->bound_holds =
                !diverged && summary.avg_grad_norm_sq <= summary.theory->bound;
        }
        summary.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start)
                .count();
        if (write_outputs) {
            trace.flush();
            write_text_file(out_dir / "summary.json", summary_to_json(summary).dump(2) + "\n");
        }
    };

    const std::int64_t stop_at = cfg.checkpoint.stop_after >= 0
                                     ? std::min<std::int64_t>(cfg.T, cfg.checkpoint.stop_after)
                                     : cfg.T;

    std::int64_t t = t0;
    for (; t < stop_at; ++t) {
        const ActiveSet active = next_active_set(pattern, t, cfg.seed);
        const std::int64_t tau_t = tracker.record_round(active);
        const bool evaluate = (t % cfg.eval_every == 0) || (t == cfg.T - 1);

        hp.eta_l = rates.theorem_mode ? rates.eta_l_constant : cfg.eta_l_at(t);
        const RoundReport report =
            run_round(alg, server, clients, active, objective, hp, cfg.seed, evaluate);
        ledger.record(alg, report.active_count);

        if (evaluate) {
            loss_sum += report.loss;
            grad_sum += report.grad_norm_sq;
            ++eval_count;
            summary.eval_rounds.push_back(t);
            summary.loss_series.push_back(report.loss);
            summary.grad_series.push_back(report.grad_norm_sq);
            if (write_outputs) {
                TraceRow row{t,
                             report.active_count,
                             tau_t,
                             report.loss,
                             report.grad_norm_sq,
                             ledger.cum_down,
                             ledger.cum_up,
                             hp.eta_l};
                trace << format_trace_row(row, format) << '\n';
                if (!trace) throw IoError("failed writing trace file " + trace_path.string());
            }
        }

        if (!server.x.allFinite() || server.x.norm() > kDivergenceNorm) {
            finalize(t + 1, false, true);
            throw DivergenceError("||x|| exceeded " + std::to_string(kDivergenceNorm) +
                                  " at round " + std::to_string(t));
        }

        if (cfg.checkpoint.every > 0 && (t + 1) % cfg.checkpoint.every == 0 &&
            write_outputs) {
            save_state(t + 1);
        }
    }

    const bool completed = (t >= cfg.T);
    if (!completed && write_outputs) save_state(t); // stop_after always leaves a checkpoint
    finalize(t, completed, false);
    return summary;
}

int threads_from_env() {
    const char* raw = std::getenv("FEDSIM_THREADS");
    if (raw == nullptr || *raw == '\0') return 1;
    char* end = nullptr;
    const long v = std::strtol(raw, &end, 10);
    if (end == raw || *end != '\0' || v <= 0 || v > 1024) {
        throw ConfigError("FEDSIM_THREADS must be a positive integer, got '" +
                          std::string(raw) + "'");
    }
    return static_cast<int>(v);
}

SweepReport run_sweep(const RunConfig& base, const std::string& axis,
                      const std::vector<json>& values, std::vector<std::uint64_t> seeds,
                      const std::string& out_dir) {
    if (values.empty()) throw UsageError("sweep requires a nonempty list of axis values");
    if (axis.empty()) throw UsageError("sweep requires an axis (dotted config path)");
    if (seeds.empty()) seeds.push_back(base.seed);

    std::string pointer = "/" + axis;
    std::replace(pointer.begin(), pointer.end(), '.', '/');
    const json base_json = to_json(base);
    try {
        (void)base_json.at(json::json_pointer(pointer));
    } catch (const json::exception&) {
        throw UsageError("sweep axis '" + axis + "' does not name a config field");
    }

    fs::path root(out_dir);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw IoError("cannot create sweep directory " + root.string());

    SweepReport report;
    report.axis = axis;

    struct Job {
        RunConfig cfg;
        json value;
        std::uint64_t seed;
        std::string dir;
    };
    std::vector<Job> jobs;
    for (const json& v : values) {
        json patched = base_json;
        patched[json::json_pointer(pointer)] = v;
        RunConfig cfg = config_from_json(patched);
        for (std::uint64_t seed : seeds) {
            cfg.seed = (axis == "seed") ? cfg.seed : seed;
            const std::string label = sanitize_label(v) + "_seed" + std::to_string(cfg.seed);
            cfg.out = (root / label).string();
            cfg.checkpoint = CheckpointConfig{}; // sweeps never checkpoint
            jobs.push_back(Job{cfg, v, cfg.seed, cfg.out});
            if (axis == "seed") break; // seed axis: one cell per value
        }
    }
    for (const Job& job : jobs) job.cfg.validate(); // fail fast before spawning work

    std::vector<RunSummary> summaries(jobs.size());
    std::vector<std::exception_ptr> failures(jobs.size());
    const int threads = std::min<int>(threads_from_env(), static_cast<int>(jobs.size()));
    if (threads <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            summaries[i] = run_simulation(jobs[i].cfg);
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
                try {
                    summaries[i] = run_simulation(jobs[i].cfg);
                } catch (...) {
                    failures[i] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
        for (const auto& failure : failures) {
            if (failure) std::rethrow_exception(failure);
        }
    }

    // Aggregate CSV, one line per (value, seed).
    std::string csv = "axis,value,seed,final_loss,final_grad_norm_sq,avg_grad_norm_sq,"
                      "tau_max,tau_avg,cum_down,cum_up,run_dir\n";
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const RunSummary& s = summaries[i];
        csv += axis + ',' + sanitize_label(jobs[i].value) + ',' +
               std::to_string(jobs[i].seed) + ',' + format_double(s.final_loss) + ',' +
               format_double(s.final_grad_norm_sq) + ',' +
               format_double(s.avg_grad_norm_sq) + ',' + std::to_string(s.tau_max) + ',' +
               format_double(s.tau_avg) + ',' + std::to_string(s.cum_down) + ',' +
               std::to_string(s.cum_up) + ',' + jobs[i].dir + '\n';
        report.cells.push_back(SweepCell{jobs[i].value, jobs[i].seed, jobs[i].dir, s});
    }
    const fs::path csv_path = root / "aggregate.csv";
    write_text_file(csv_path, csv);
    report.aggregate_csv_path = csv_path.string();

    // Per-value mean/median summary.
    json per_value = json::array();
    for (const json& v : values) {
        std::vector<double> finals, avgs;
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            if (jobs[i].value == v) {
                finals.push_back(summaries[i].final_grad_norm_sq);
                avgs.push_back(summaries[i].avg_grad_norm_sq);
            }
        }
        per_value.push_back({{"value", v},
                             {"n", finals.size()},
                             {"mean_final_grad_norm_sq", mean(finals)},
                             {"median_final_grad_norm_sq", median(finals)},
                             {"mean_avg_grad_norm_sq", mean(avgs)},
                             {"median_avg_grad_norm_sq", median(avgs)}});
    }
    const json agg = {{"axis", axis}, {"per_value", per_value}};
    const fs::path json_path = root / "aggregate_summary.json";
    write_text_file(json_path, agg.dump(2) + "\n");
    report.aggregate_json_path = json_path.string();
    return report;
}

json bounds_report(const RunConfig& cfg) {
    cfg.validate();
    const PatternSpec pattern = cfg.build_pattern();
    const GlobalObjective objective = build_objective(cfg);

    DelaySummary delays;
    std::string delay_source;
    if (cfg.hyper.tau_max.has_value() && cfg.hyper.tau_avg.has_value()) {
        delays.tau_max = static_cast<std::int64_t>(*cfg.hyper.tau_max);
        delays.tau_avg = *cfg.hyper.tau_avg;
        delay_source = "provided";
    } else {
        DelayTracker tracker(pattern.N);
        for (const auto& s : generate_schedule(pattern, cfg.T, cfg.seed)) {
            tracker.record_round(s);
        }
        delays.tau_max = tracker.tau_max();
        delays.tau_avg = tracker.tau_avg();
        delay_source = "measured";
    }

    double delta_f = 0.0;
    if (cfg.hyper.delta_f.has_value()) {
        delta_f = *cfg.hyper.delta_f;
    } else if (objective.delta_f.has_value()) {
        delta_f = *objective.delta_f;
    } else {
        throw ConfigError("bounds needs delta_f: pass hyper.delta_f "
                          "(the problem's f* is unknown)");
    }

    const ProblemConstants constants{objective.L, objective.sigma, delta_f,
                                     objective.F0,  objective.N(),  cfg.hyper.K,
                                     cfg.T};
    const Rates rates = theorem1_rates(constants, delays);

    json j;
    j["constants"] = {{"L", constants.L},   {"sigma", constants.sigma},
                      {"delta_f", delta_f}, {"F0", constants.F0},
                      {"N", constants.N},   {"K", constants.K},
                      {"T", constants.T}};
    j["delays"] = {{"tau_max", delays.tau_max},
                   {"tau_avg", delays.tau_avg},
                   {"source", delay_source}};
    j["rates"] = {{"eta_g", rates.eta_g}, {"eta_l", rates.eta_l}};
    j["bound"] = theorem1_bound(constants, delays);

    const double floor = pattern.participation_floor();
    if (const auto db = delay_bound(pattern.kind, pattern.N, pattern.S, floor, cfg.T)) {
        j["delay_bound"] = {
            {"value", db->value},
            {"type", db->type == BoundType::Deterministic ? "deterministic"
                                                          : "in_expectation"}};
    } else {
        j["delay_bound"] = nullptr;
    }

    int case_id = 0;
    switch (pattern.kind) {
    case PatternSpec::Kind::UniformSample: case_id = 1; break;
    case PatternSpec::Kind::IndependentProb: case_id = 2; break;
    case PatternSpec::Kind::DeterministicCyclic: case_id = 3; break;
    case PatternSpec::Kind::ReshuffledCyclic: case_id = 4; break;
    default: break;
    }
    if (case_id != 0) {
        j["case_rate"] = {{"case", case_id},
                          {"value", case_rate(case_id, constants, pattern.S, floor)}};
    } else {
        j["case_rate"] = nullptr;
    }
    return j;
}

} // namespace fedsim
