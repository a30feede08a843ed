// fedsim CLI: run | sweep | bounds | replay-schedule.
//
// Configuration comes from defaults, then an optional JSON file (--config),
// then individual flags — later layers win. Exit codes: 0 success, 2 invalid
// configuration or usage, 3 numeric divergence.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedsim/config.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/participation.hpp"
#include "fedsim/simulator.hpp"

namespace {

using nlohmann::json;

struct Flags {
    std::string config_path;

    std::string algorithm;
    std::int64_t T = 0;
    std::uint64_t seed = 0;
    std::int64_t eval_every = 1;
    std::string out;
    std::string format;

    std::string pattern;
    int clients = 0;
    int active = 0;
    double prob = 0.0;
    double period = 0.0, amplitude = 0.0, offset = 0.0;
    int tier_size = 0;
    double p_start = 0.0, p_step = 0.0;
    std::string replay;

    std::string problem;
    int dim = 0;
    double radius = 0.0, sigma = 0.0, alpha = 0.0, l2 = 0.0;
    int samples = 0, batch = 0;
    std::vector<double> x0, x_star;

    double eta_g = 0.0, eta_l = 0.0, eta0 = 0.0;
    std::string schedule;
    int K = 0;
    bool theorem1 = false;
    double tau_max = 0.0, tau_avg = 0.0, delta_f = 0.0;

    std::int64_t checkpoint_every = 0;
    std::string checkpoint_path, resume;
    std::int64_t stop_after = -1;

    // sweep-only
    std::string axis, values_csv, seeds_csv;
};

void add_config_options(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file (flags override its keys)");
    cmd->add_option("--algorithm,-a", f.algorithm,
                    "fedsum_b | fedsum | fedsum_cr | fedavg | scaffold");
    cmd->add_option("--rounds,-T", f.T, "number of rounds T");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--eval-every", f.eval_every, "evaluate f and grad every k rounds");
    cmd->add_option("--out,-o", f.out, "output directory");
    cmd->add_option("--format", f.format, "trace format: csv | jsonl");

    cmd->add_option("--pattern", f.pattern,
                    "uniform | independent | cyclic | reshuffled | sine | tiers | replay");
    cmd->add_option("--clients,-N", f.clients, "population size N");
    cmd->add_option("--active,-S", f.active, "cohort size S (uniform/cyclic/reshuffled/sine)");
    cmd->add_option("--prob", f.prob, "independent-pattern participation probability");
    cmd->add_option("--period", f.period, "sine-pattern period");
    cmd->add_option("--amplitude", f.amplitude, "sine-pattern amplitude");
    cmd->add_option("--offset", f.offset, "sine-pattern offset");
    cmd->add_option("--tier-size", f.tier_size, "tiers-pattern clients per tier");
    cmd->add_option("--p-start", f.p_start, "tiers-pattern first-tier probability");
    cmd->add_option("--p-step", f.p_step, "tiers-pattern per-tier probability step");
    cmd->add_option("--replay", f.replay, "replay-pattern schedule file (JSON lines)");

    cmd->add_option("--problem", f.problem, "quadratic | logistic");
    cmd->add_option("--dim,-d", f.dim, "model dimension");
    cmd->add_option("--radius", f.radius, "quadratic heterogeneity radius");
    cmd->add_option("--sigma", f.sigma, "quadratic gradient-noise level");
    cmd->add_option("--samples", f.samples, "logistic samples per class");
    cmd->add_option("--alpha", f.alpha, "logistic Dirichlet concentration");
    cmd->add_option("--l2", f.l2, "logistic l2 regularization");
    cmd->add_option("--batch", f.batch, "logistic minibatch size");
    cmd->add_option("--x0", f.x0, "initial iterate (dim comma-separated values)")
        ->delimiter(',');
    cmd->add_option("--x-star", f.x_star, "quadratic minimizer target")->delimiter(',');

    cmd->add_option("--eta-g", f.eta_g, "server learning rate");
    cmd->add_option("--eta-l", f.eta_l,
                    "constant local learning rate (implies --schedule constant)");
    cmd->add_option("--eta0", f.eta0, "sqrt-decay base rate: eta0/sqrt(t/10+1)");
    cmd->add_option("--schedule", f.schedule, "constant | sqrt_decay");
    cmd->add_option("--local-steps,-K", f.K, "local steps per round K");
    cmd->add_flag("--theorem1", f.theorem1, "derive eta_g/eta_l from the theorem rates");
    cmd->add_option("--tau-max", f.tau_max, "theorem mode: supply tau_max");
    cmd->add_option("--tau-avg", f.tau_avg, "theorem mode: supply tau_avg");
    cmd->add_option("--delta-f", f.delta_f, "theorem mode: supply f(x0) - f*");

    cmd->add_option("--checkpoint-every", f.checkpoint_every, "save a checkpoint every k rounds");
    cmd->add_option("--checkpoint", f.checkpoint_path, "checkpoint base path");
    cmd->add_option("--resume", f.resume, "resume from this checkpoint base path");
    cmd->add_option("--stop-after", f.stop_after,
                    "stop (with a checkpoint) once this round is reached");
}

json overlay_from(const CLI::App* cmd, const Flags& f) {
    json o = json::object();
    auto set = [&](const char* opt, const char* path, json v) {
        if (cmd->count(opt) > 0) o[json::json_pointer(path)] = std::move(v);
    };
    set("--algorithm", "/algorithm", f.algorithm);
    set("--rounds", "/T", f.T);
    set("--seed", "/seed", f.seed);
    set("--eval-every", "/eval_every", f.eval_every);
    set("--out", "/out", f.out);
    set("--format", "/format", f.format);

    set("--pattern", "/pattern/kind", f.pattern);
    set("--clients", "/problem/N", f.clients);
    set("--active", "/pattern/S", f.active);
    set("--prob", "/pattern/prob", f.prob);
    set("--period", "/pattern/period", f.period);
    set("--amplitude", "/pattern/amplitude", f.amplitude);
    set("--offset", "/pattern/offset", f.offset);
    set("--tier-size", "/pattern/tier_size", f.tier_size);
    set("--p-start", "/pattern/p_start", f.p_start);
    set("--p-step", "/pattern/p_step", f.p_step);
    set("--replay", "/pattern/replay_path", f.replay);

    set("--problem", "/problem/kind", f.problem);
    set("--dim", "/problem/dim", f.dim);
    set("--radius", "/problem/radius", f.radius);
    set("--sigma", "/problem/sigma", f.sigma);
    set("--samples", "/problem/samples_per_class", f.samples);
    set("--alpha", "/problem/alpha", f.alpha);
    set("--l2", "/problem/l2", f.l2);
    set("--batch", "/problem/batch", f.batch);
    set("--x0", "/problem/x0", f.x0);
    set("--x-star", "/problem/x_star", f.x_star);

    set("--eta-g", "/hyper/eta_g", f.eta_g);
    set("--eta-l", "/hyper/eta_l", f.eta_l);
    set("--eta0", "/hyper/eta0", f.eta0);
    set("--schedule", "/hyper/schedule", f.schedule);
    set("--local-steps", "/hyper/K", f.K);
    set("--theorem1", "/hyper/theorem1", f.theorem1);
    set("--tau-max", "/hyper/tau_max", f.tau_max);
    set("--tau-avg", "/hyper/tau_avg", f.tau_avg);
    set("--delta-f", "/hyper/delta_f", f.delta_f);

    set("--checkpoint-every", "/checkpoint/every", f.checkpoint_every);
    set("--checkpoint", "/checkpoint/path", f.checkpoint_path);
    set("--resume", "/checkpoint/resume", f.resume);
    set("--stop-after", "/checkpoint/stop_after", f.stop_after);

    if (cmd->count("--eta-l") > 0 && cmd->count("--schedule") == 0) {
        o[json::json_pointer("/hyper/schedule")] = "constant";
    }
    return o;
}

fedsim::RunConfig build_config(const CLI::App* cmd, const Flags& f) {
    json base = fedsim::to_json(fedsim::RunConfig{});
    if (cmd->count("--config") > 0) {
        std::ifstream in(f.config_path);
        if (!in) throw fedsim::IoError("cannot open config file " + f.config_path);
        json file;
        try {
            in >> file;
        } catch (const json::exception& e) {
            throw fedsim::ConfigError("config file " + f.config_path + ": " + e.what());
        }
        fedsim::merge_into(base, file);
    }
    fedsim::merge_into(base, overlay_from(cmd, f));
    return fedsim::config_from_json(base);
}

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

std::vector<json> parse_values(const std::string& csv) {
    std::vector<json> out;
    for (const auto& tok : split_csv(csv)) {
        try {
            out.push_back(json::parse(tok));
        } catch (const json::exception&) {
            out.push_back(tok); // bare words (algorithm names, pattern kinds)
        }
    }
    return out;
}

// "0,1,5" or "0..9" (inclusive range), mixable per comma token.
std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
    std::vector<std::uint64_t> out;
    for (const auto& tok : split_csv(csv)) {
        const auto dots = tok.find("..");
        try {
            if (dots != std::string::npos) {
                const std::uint64_t lo = std::stoull(tok.substr(0, dots));
                const std::uint64_t hi = std::stoull(tok.substr(dots + 2));
                if (hi < lo) throw fedsim::UsageError("--seeds range '" + tok + "' is empty");
                for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
            } else {
                out.push_back(std::stoull(tok));
            }
        } catch (const std::logic_error&) {
            throw fedsim::UsageError("--seeds token '" + tok + "' is not a seed or range");
        }
    }
    return out;
}

int do_run(const CLI::App* cmd, const Flags& f) {
    const fedsim::RunConfig cfg = build_config(cmd, f);
    const fedsim::RunSummary s = fedsim::run_simulation(cfg);
    std::cout << "run " << s.algorithm << " seed=" << s.seed << ": " << s.rounds_run << "/"
              << s.T << " rounds" << (s.completed ? "" : " (stopped early)") << "\n"
              << "  final f = " << s.final_loss << ", final ||grad f||^2 = "
              << s.final_grad_norm_sq << "\n"
              << "  avg ||grad f||^2 = " << s.avg_grad_norm_sq << " over " << s.eval_count
              << " evaluated rounds\n"
              << "  tau_max = " << s.tau_max << ", tau_avg = " << s.tau_avg
              << ", downlink = " << s.cum_down << ", uplink = " << s.cum_up << "\n";
    if (s.theory) {
        std::cout << "  theorem rates: eta_g = " << s.theory->eta_g << ", eta_l = "
                  << s.theory->eta_l << "; bound = " << s.theory->bound << " ("
                  << (s.theory->bound_holds ? "holds" : "violated") << ")\n";
    }
    std::cout << "  trace: " << s.trace_path << "\n";
    return 0;
}

int do_sweep(const CLI::App* cmd, const Flags& f) {
    const fedsim::RunConfig base = build_config(cmd, f);
    const auto values = parse_values(f.values_csv);
    const auto seeds = f.seeds_csv.empty() ? std::vector<std::uint64_t>{}
                                           : parse_seeds(f.seeds_csv);
    const fedsim::SweepReport report =
        fedsim::run_sweep(base, f.axis, values, seeds, base.out);
    std::cout << "sweep over " << report.axis << ": " << report.cells.size() << " runs\n"
              << "  aggregate: " << report.aggregate_csv_path << "\n"
              << "  summary:   " << report.aggregate_json_path << "\n";
    return 0;
}

int do_bounds(const CLI::App* cmd, const Flags& f) {
    const fedsim::RunConfig cfg = build_config(cmd, f);
    std::cout << fedsim::bounds_report(cfg).dump(2) << "\n";
    return 0;
}

int do_replay_schedule(const CLI::App* cmd, const Flags& f) {
    const fedsim::RunConfig cfg = build_config(cmd, f);
    const fedsim::PatternSpec pattern = cfg.build_pattern();
    const auto schedule = fedsim::generate_schedule(pattern, cfg.T, cfg.seed);
    const std::string path = cmd->count("--out") > 0 ? f.out : "schedule.jsonl";
    fedsim::save_replay_schedule(schedule, path);
    std::cout << "wrote " << schedule.size() << " rounds to " << path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fedsim: deterministic federated-optimization simulator"};
    app.require_subcommand(1);

    Flags f;
    CLI::App* run_cmd = app.add_subcommand("run", "Execute one configured run");
    add_config_options(run_cmd, f);

    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "One run per (axis value, seed), plus aggregates");
    add_config_options(sweep_cmd, f);
    sweep_cmd->add_option("--axis", f.axis, "dotted config path, e.g. pattern.prob")
        ->required();
    sweep_cmd->add_option("--values", f.values_csv, "comma-separated axis values")
        ->required();
    sweep_cmd->add_option("--seeds", f.seeds_csv, "comma-separated seeds, ranges like 0..9");

    CLI::App* bounds_cmd =
        app.add_subcommand("bounds", "Print rates, bounds and delay estimates as JSON");
    add_config_options(bounds_cmd, f);

    CLI::App* replay_cmd = app.add_subcommand(
        "replay-schedule", "Materialize a pattern's schedule as a replay file");
    add_config_options(replay_cmd, f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e); // prints help or the parse error
        return code == 0 ? 0 : 2;
    }

    try {
        if (run_cmd->parsed()) return do_run(run_cmd, f);
        if (sweep_cmd->parsed()) return do_sweep(sweep_cmd, f);
        if (bounds_cmd->parsed()) return do_bounds(bounds_cmd, f);
        if (replay_cmd->parsed()) return do_replay_schedule(replay_cmd, f);
        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const fedsim::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const fedsim::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const fedsim::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const fedsim::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const fedsim::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
