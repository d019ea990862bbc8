// drcs: distributionally robust covariance steering from the command line.
//
//   drcs solve      --preset double_integrator --out runs/di
//   drcs ira        --preset spacecraft_cone --out runs/cone
//   drcs montecarlo --config my.json --trials 500 --seed 7 --out runs/mc
//
// Exit codes: 0 success, 1 I/O failure, 2 infeasible, 3 parse error,
// 4 solver failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "drcs/errors.hpp"
#include "problem_config.hpp"
#include "run.hpp"

namespace {

constexpr int kExitIo = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitParse = 3;
constexpr int kExitSolver = 4;

struct Flags {
    std::string command;
    std::optional<std::string> preset;
    std::optional<std::string> config;
    std::optional<std::string> mode;
    std::optional<std::string> constraint;
    std::optional<std::string> family;
    std::optional<int> trials;
    std::optional<std::uint64_t> seed;
    std::optional<double> rho;
    std::optional<int> max_iters;
    std::optional<std::string> controller;
    std::optional<std::string> dump_config;
    std::string out = "out";
    bool causal = false;
    bool verbose = false;
};

drcs::app::ProblemConfig build_config(const Flags& f) {
    using namespace drcs;
    using namespace drcs::app;
    if (f.preset.has_value() == f.config.has_value()) {
        throw ParseError("arguments", "give exactly one of --preset or --config");
    }
    ProblemConfig cfg;
    if (f.preset) {
        std::string name = *f.preset;
        // The spacecraft presets differ in the initial mean as well as the geometry.
        if (name == "spacecraft" || (f.constraint && name.rfind("spacecraft_", 0) == 0)) {
            name = "spacecraft_" + f.constraint.value_or("polytope");
        }
        cfg = make_preset(name);
    } else {
        cfg = load_config(*f.config);
    }
    if (f.mode) {
        try {
            cfg.mode = risk_mode_from_string(*f.mode);
        } catch (const DomainError& e) {
            throw ParseError("--mode", e.what());
        }
    }
    if (f.constraint) {
        if (*f.constraint == "polytope") {
            cfg.constraint = ConstraintKind::polytope;
        } else if (*f.constraint == "cone") {
            cfg.constraint = ConstraintKind::cone;
        } else {
            throw ParseError("--constraint", "expected polytope or cone");
        }
    }
    if (f.family) {
        try {
            cfg.montecarlo.family = noise_family_from_string(*f.family);
        } catch (const DomainError& e) {
            throw ParseError("--noise", e.what());
        }
    }
    if (f.trials) {
        if (*f.trials < 1) {
            throw ParseError("--trials", "must be at least 1");
        }
        cfg.montecarlo.trials = *f.trials;
    }
    if (f.seed) {
        cfg.montecarlo.seed = *f.seed;
    }
    if (f.rho) {
        cfg.ira.rho = *f.rho;
    }
    if (f.max_iters) {
        cfg.ira.max_iterations = *f.max_iters;
    }
    if (f.causal) {
        cfg.causal_feedback = true;
    }
    try {
        cfg.ira.validate();
    } catch (const DomainError& e) {
        throw ParseError("ira", e.what());
    }
    return cfg;
}

void print_report(const drcs::app::RunReport& r) {
    std::printf("%s  %s  (%s, %s)\n", r.command.c_str(), r.config_name.c_str(), r.mode.c_str(), r.constraint.c_str());
    if (!r.note.empty()) {
        std::printf("note: %s\n", r.note.c_str());
    }
    std::printf("status %s after %d iterations, J* = %.10g\n", r.status.c_str(), r.solver_iterations, r.cost);
    if (r.trace.size() > 1) {
        for (const auto& it : r.trace) {
            std::printf("  iter %2d  J* = %.10g  active %d\n", it.iteration, it.cost, it.active);
        }
        std::printf("  stopped: %s\n", r.stop_reason.c_str());
    }
    if (!r.warning.empty()) {
        std::printf("warning: %s\n", r.warning.c_str());
    }
    if (r.empirical) {
        const auto& e = *r.empirical;
        std::printf("monte carlo (%s, %d trials): joint violation %.4f  [%.4f, %.4f]\n", e.family.c_str(), e.trials,
                    e.joint_rate, e.joint_lower, e.joint_upper);
    }
    for (const auto& t : r.timings) {
        std::printf("  %-10s %.3f s\n", t.phase.c_str(), t.seconds);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributionally robust covariance steering with iterative risk allocation"};
    Flags f;
    app.add_option("command", f.command, "solve | ira | montecarlo")->required()->check(
        CLI::IsMember({"solve", "ira", "montecarlo"}));
    app.add_option("--preset", f.preset, "double_integrator | spacecraft[_polytope|_cone]");
    app.add_option("--config", f.config, "JSON configuration file");
    app.add_option("--mode", f.mode, "dr | gaussian");
    app.add_option("--constraint", f.constraint, "polytope | cone");
    app.add_option("--noise", f.family, "Monte Carlo noise family: gaussian | laplacian");
    app.add_option("--trials", f.trials, "Monte Carlo trials");
    app.add_option("--seed", f.seed, "Monte Carlo seed");
    app.add_option("--out", f.out, "output directory")->capture_default_str();
    app.add_option("--rho", f.rho, "IRA tightening factor in (0, 1)");
    app.add_option("--max-iters", f.max_iters, "IRA iteration limit");
    app.add_option("--controller", f.controller, "montecarlo: controller.json from an earlier run");
    app.add_option("--dump-config", f.dump_config, "write the resolved configuration to this file and exit");
    app.add_flag("--causal", f.causal, "restrict the feedback gain to causal structure");
    app.add_flag("-v,--verbose", f.verbose, "print solver iterations");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitParse;
    }

    try {
        const drcs::app::ProblemConfig cfg = build_config(f);
        if (f.dump_config) {
            std::ofstream out(*f.dump_config);
            out << drcs::app::to_json(cfg).dump(2) << "\n";
            if (!out) {
                std::fprintf(stderr, "error: cannot write %s\n", f.dump_config->c_str());
                return kExitIo;
            }
            return 0;
        }
        drcs::app::RunOptions options;
        options.command = drcs::app::command_from_string(f.command);
        options.out_dir = f.out;
        options.controller_path = f.controller;
        options.verbose = f.verbose;
        print_report(drcs::app::run(cfg, options));
        return 0;
    } catch (const drcs::InfeasibleError& e) {
        std::fprintf(stderr, "infeasible: %s\n", e.what());
        return kExitInfeasible;
    } catch (const drcs::SolverError& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return kExitSolver;
    } catch (const drcs::Error& e) {
        // Parse errors and invalid problem data alike.
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return kExitParse;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }
}
