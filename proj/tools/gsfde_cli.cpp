// Command-line front end: feasibility report, single experiments, the full
// suite, and the pathwise lemma checks.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gsfde/harness.hpp"
#include "gsfde/parallel.hpp"

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::string out = "gsfde_out";
    std::size_t threads = 0;
    bool quiet = false;
    std::string experiment;
};

gsfde::Config load(const Options& o) {
    gsfde::Config cfg = o.config.empty() ? gsfde::default_config() : gsfde::load_config(o.config);
    if (o.seed) {
        cfg.experiments.seed = *o.seed;
    }
    if (o.paths) {
        cfg.experiments.paths = *o.paths;
    }
    return cfg;
}

void attach_log(gsfde::ExperimentSession& s, const Options& o) {
    if (!o.quiet) {
        s.log = [](const std::string& msg) { std::cerr << "[gsfde] " << msg << std::endl; };
    }
}

int report_infeasible(const gsfde::ExperimentSession& s) {
    std::cerr << "infeasible configuration:\n";
    for (const std::string& v : s.violations()) {
        std::cerr << "  " << v << "\n";
    }
    return 2;
}

void print_verdict(const gsfde::Verdict& v) {
    std::cout << "[" << v.name << "] " << v.status_text() << "\n";
    for (const std::string& n : v.notes) {
        std::cout << "  " << n << "\n";
    }
    for (const auto& r : v.rows) {
        std::printf("  t=%-6g empirical=%-12.6g se=%-10.3g bound=%-12.6g %s  %s\n", r.t, r.empirical,
                    r.standard_error, r.bound, r.pass ? "ok" : "VIOLATED", r.label.c_str());
    }
}

int cmd_feasibility(const Options& o) {
    gsfde::ExperimentSession s(load(o));
    std::cout << s.bounds().text();
    return s.feasible() ? 0 : report_infeasible(s);
}

int cmd_run(const Options& o, const std::string& name) {
    gsfde::ExperimentSession s(load(o));
    attach_log(s, o);
    const gsfde::Verdict v = s.run(name);
    print_verdict(v);
    gsfde::write_outputs(o.out, s, {v});
    return v.passed() ? 0 : 1;
}

int cmd_run_all(const Options& o) {
    gsfde::ExperimentSession s(load(o));
    attach_log(s, o);
    if (!s.feasible()) {
        gsfde::write_outputs(o.out, s, {});
        std::cout << s.bounds().text();
        return report_infeasible(s);
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto verdicts = s.run_all();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    gsfde::write_outputs(o.out, s, verdicts);
    s.write_trajectories(o.out, s.config().experiments.dump_trajectories);
    std::cout << gsfde::verdict_table(verdicts);
    std::printf("elapsed %.1f s, outputs in %s\n", secs, o.out.c_str());
    for (const auto& v : verdicts) {
        if (v.status == gsfde::Verdict::Status::Fail) {
            return 1;
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo checks for delay equations driven by G-Brownian motion"};
    app.require_subcommand(1);
    Options o;
    auto common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON configuration (default: the bundled one)");
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--paths", o.paths, "paths per scenario for the sweeps");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--threads", o.threads, "worker threads (0: all cores)");
        sub->add_flag("--quiet", o.quiet, "no progress messages");
    };
    CLI::App* feas = app.add_subcommand("feasibility", "print the bound report and the admissible rates");
    CLI::App* run = app.add_subcommand("run", "run one experiment");
    run->add_option("experiment", o.experiment, "experiment name")
        ->required()
        ->check(CLI::IsMember(gsfde::experiment_names()));
    CLI::App* all = app.add_subcommand("run-all", "run every enabled experiment");
    CLI::App* lemma = app.add_subcommand("lemma-check", "pathwise lemma checks on simulated trajectories");
    for (CLI::App* sub : {feas, run, all, lemma}) {
        common(sub);
    }
    CLI11_PARSE(app, argc, argv);
    gsfde::parallel_workers() = o.threads;

    try {
        if (feas->parsed()) return cmd_feasibility(o);
        if (run->parsed()) return cmd_run(o, o.experiment);
        if (all->parsed()) return cmd_run_all(o);
        if (lemma->parsed()) return cmd_run(o, "lemmas");
    } catch (const gsfde::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
