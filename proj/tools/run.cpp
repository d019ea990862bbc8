#include "run.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "drcs/errors.hpp"

namespace drcs::app {

using nlohmann::json;

const char* to_string(Command command) {
    switch (command) {
        case Command::solve: return "solve";
        case Command::ira: return "ira";
        case Command::montecarlo: return "montecarlo";
    }
    return "?";
}

Command command_from_string(const std::string& text) {
    if (text == "solve") {
        return Command::solve;
    }
    if (text == "ira") {
        return Command::ira;
    }
    if (text == "montecarlo") {
        return Command::montecarlo;
    }
    throw ParseError("command", "unknown command '" + text + "' (expected solve, ira or montecarlo)");
}

std::string format_number(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

namespace {

json grid_json(const MatrixXd& M) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) {
            row.push_back(M(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

MatrixXd grid_from_json(const json& j, Eigen::Index cols_if_empty = 0) {
    if (j.empty()) {
        return MatrixXd(0, cols_if_empty);
    }
    MatrixXd M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        for (Eigen::Index c = 0; c < M.cols(); ++c) {
            M(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
        }
    }
    return M;
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

void write_trajectories(const std::filesystem::path& path, const std::string& digest, const ConcatenatedSystem& cs,
                        const VectorXd& mean_traj, const std::vector<TrialResult>& trials) {
    std::ofstream out = open_output(path);
    out << "# config_digest=" << digest << "\n";
    out << "trial,step";
    for (int i = 0; i < cs.n; ++i) {
        out << ",x" << i;
    }
    out << "\n";
    auto row = [&](long trial, int k, const auto& x) {
        out << trial << ',' << k;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            out << ',' << format_number(x(i));
        }
        out << '\n';
    };
    for (int k = 0; k <= cs.horizon; ++k) {
        row(-1, k, cs.step(mean_traj, k));
    }
    for (std::size_t t = 0; t < trials.size(); ++t) {
        for (int k = 0; k <= cs.horizon; ++k) {
            row(static_cast<long>(t), k, trials[t].states.col(k));
        }
    }
    finish(out, path);
}

void write_allocation(const std::filesystem::path& path, const RunReport& report) {
    std::ofstream out = open_output(path);
    out << "# config_digest=" << report.config_digest << "\n";
    out << "i,k,allocated,true" << (report.empirical ? ",empirical" : "") << "\n";
    for (Eigen::Index i = 0; i < report.allocation.rows(); ++i) {
        for (Eigen::Index k = 0; k < report.allocation.cols(); ++k) {
            out << i << ',' << k + 1 << ',' << format_number(report.allocation(i, k)) << ','
                << format_number(report.true_risks(i, k));
            if (report.empirical) {
                out << ',' << format_number(report.empirical->cell_rates(i, k));
            }
            out << '\n';
        }
    }
    finish(out, path);
}

void write_iterations(const std::filesystem::path& path, const RunReport& report) {
    std::ofstream out = open_output(path);
    out << "# config_digest=" << report.config_digest << "\n";
    out << "iteration,cost,active,residual,solved_cost,kept_incumbent\n";
    for (const IterationRow& r : report.trace) {
        out << r.iteration << ',' << format_number(r.cost) << ',' << r.active << ',' << format_number(r.residual)
            << ',' << format_number(r.solved_cost) << ',' << (r.kept_incumbent ? 1 : 0) << '\n';
    }
    finish(out, path);
}

void write_timings(const std::filesystem::path& path, const RunReport& report) {
    std::ofstream out = open_output(path);
    out << "# config_digest=" << report.config_digest << "\n";
    out << "phase,seconds\n";
    for (const Timing& t : report.timings) {
        out << t.phase << ',' << format_number(t.seconds) << '\n';
    }
    finish(out, path);
}

void write_json(const std::filesystem::path& path, const json& doc) {
    std::ofstream out = open_output(path);
    out << doc.dump(2) << "\n";
    finish(out, path);
}

/// Fills the derived fields of a controller read from disk.
void complete_solution(const SteeringProblem& problem, const ConcatenatedSystem& cs, ControllerSolution& sol) {
    sol.mean_traj = propagate_mean(cs, problem.initial.mean, sol.V);
    sol.state_cov = propagate_covariance(cs, sol.K);
    sol.breakdown = cost_breakdown(problem, cs, sol.V, sol.K);
    sol.cost = sol.breakdown.total();
    sol.true_risks = evaluate_true_risks(problem, cs, sol.mean_traj, sol.K, sol.allocation);
}

}  // namespace

json report_to_json(const RunReport& r) {
    json doc;
    doc["command"] = r.command;
    doc["config"] = {{"name", r.config_name}, {"digest", r.config_digest}};
    if (!r.note.empty()) {
        doc["note"] = r.note;
    }
    doc["mode"] = r.mode;
    doc["constraint"] = r.constraint;
    doc["solver"] = {{"status", r.status}, {"iterations", r.solver_iterations}};
    doc["cost"] = {{"total", r.cost}, {"mean", r.mean_cost}, {"covariance", r.covariance_cost}};
    json trace = json::array();
    for (const IterationRow& it : r.trace) {
        trace.push_back({{"iteration", it.iteration},
                         {"cost", it.cost},
                         {"solved_cost", it.solved_cost},
                         {"active", it.active},
                         {"residual", it.residual},
                         {"kept_incumbent", it.kept_incumbent}});
    }
    doc["trace"] = trace;
    doc["stop_reason"] = r.stop_reason;
    doc["warning"] = r.warning;
    doc["steps"] = r.allocation.cols();
    doc["allocation"] = grid_json(r.allocation);
    doc["true_risks"] = grid_json(r.true_risks);
    if (r.empirical) {
        const EmpiricalSummary& e = *r.empirical;
        doc["montecarlo"] = {{"family", e.family},
                             {"trials", e.trials},
                             {"seed", e.seed},
                             {"joint_violations", e.joint_violations},
                             {"joint_rate", e.joint_rate},
                             {"joint_interval", {e.joint_lower, e.joint_upper}},
                             {"cell_rates", grid_json(e.cell_rates)},
                             {"mean_cost", e.mean_cost},
                             {"cost_stderr", e.cost_stderr}};
    }
    json timings = json::array();
    for (const Timing& t : r.timings) {
        timings.push_back({{"phase", t.phase}, {"seconds", t.seconds}});
    }
    doc["timings"] = timings;
    return doc;
}

RunReport report_from_json(const json& doc) {
    RunReport r;
    r.command = doc.at("command").get<std::string>();
    r.config_name = doc.at("config").at("name").get<std::string>();
    r.config_digest = doc.at("config").at("digest").get<std::string>();
    r.note = doc.value("note", std::string());
    r.mode = doc.at("mode").get<std::string>();
    r.constraint = doc.at("constraint").get<std::string>();
    r.status = doc.at("solver").at("status").get<std::string>();
    r.solver_iterations = doc.at("solver").at("iterations").get<int>();
    r.cost = doc.at("cost").at("total").get<double>();
    r.mean_cost = doc.at("cost").at("mean").get<double>();
    r.covariance_cost = doc.at("cost").at("covariance").get<double>();
    for (const json& it : doc.at("trace")) {
        r.trace.push_back({it.at("iteration").get<int>(), it.at("cost").get<double>(),
                           it.at("solved_cost").get<double>(), it.at("active").get<int>(),
                           it.at("residual").get<double>(), it.at("kept_incumbent").get<bool>()});
    }
    r.stop_reason = doc.at("stop_reason").get<std::string>();
    r.warning = doc.at("warning").get<std::string>();
    const auto steps = doc.at("steps").get<Eigen::Index>();
    r.allocation = grid_from_json(doc.at("allocation"), steps);
    r.true_risks = grid_from_json(doc.at("true_risks"), steps);
    if (doc.contains("montecarlo")) {
        const json& m = doc.at("montecarlo");
        EmpiricalSummary e;
        e.family = m.at("family").get<std::string>();
        e.trials = m.at("trials").get<int>();
        e.seed = m.at("seed").get<std::uint64_t>();
        e.joint_violations = m.at("joint_violations").get<int>();
        e.joint_rate = m.at("joint_rate").get<double>();
        e.joint_lower = m.at("joint_interval").at(0).get<double>();
        e.joint_upper = m.at("joint_interval").at(1).get<double>();
        e.cell_rates = grid_from_json(m.at("cell_rates"), steps);
        e.mean_cost = m.at("mean_cost").get<double>();
        e.cost_stderr = m.at("cost_stderr").get<double>();
        r.empirical = e;
    }
    for (const json& t : doc.at("timings")) {
        r.timings.push_back({t.at("phase").get<std::string>(), t.at("seconds").get<double>()});
    }
    return r;
}

json controller_to_json(const ControllerSolution& sol, const std::string& digest) {
    json doc;
    doc["config_digest"] = digest;
    doc["cost"] = sol.cost;
    json V = json::array();
    for (Eigen::Index i = 0; i < sol.V.size(); ++i) {
        V.push_back(sol.V(i));
    }
    doc["V"] = V;
    doc["K"] = grid_json(sol.K);
    doc["steps"] = sol.allocation.grid().cols();
    doc["allocation"] = grid_json(sol.allocation.grid());
    return doc;
}

ControllerSolution controller_from_json(const json& doc, double budget) {
    ControllerSolution sol;
    try {
        const json& V = doc.at("V");
        sol.V.resize(static_cast<Eigen::Index>(V.size()));
        for (std::size_t i = 0; i < V.size(); ++i) {
            sol.V(static_cast<Eigen::Index>(i)) = V[i].get<double>();
        }
        sol.K = grid_from_json(doc.at("K"));
        sol.allocation = RiskAllocation(grid_from_json(doc.at("allocation"), doc.at("steps").get<Eigen::Index>()), budget);
    } catch (const json::exception& e) {
        throw ParseError("controller", e.what());
    }
    sol.status = SolverStatus::optimal;
    return sol;
}

RunReport run(const ProblemConfig& cfg, const RunOptions& options) {
    const SteeringProblem problem = cfg.to_problem();
    const std::string digest = config_digest(cfg);
    const ConcatenatedSystem cs = build_concatenation(problem.system, problem.initial);
    SolverOptions solver;
    solver.verbose = options.verbose;

    RunReport report;
    report.command = to_string(options.command);
    report.config_name = cfg.name;
    report.config_digest = digest;
    report.note = cfg.note;
    report.mode = to_string(problem.mode);
    report.constraint = to_string(cfg.constraint);

    ControllerSolution sol;
    if (options.command == Command::ira) {
        const Stopwatch sw;
        IraResult res = ira_solve(problem, cfg.ira, solver);
        report.timings.push_back({"ira", sw.seconds()});
        for (const IraRecord& rec : res.trace.records) {
            report.trace.push_back(
                {rec.iteration, rec.cost, rec.solved_cost, rec.active, rec.residual, rec.kept_incumbent});
        }
        report.stop_reason = res.stop_reason;
        report.warning = res.warning_text;
        sol = std::move(res.solution);
    } else if (options.command == Command::montecarlo && options.controller_path) {
        std::ifstream in(*options.controller_path);
        if (!in) {
            throw std::runtime_error("cannot read controller " + *options.controller_path);
        }
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ParseError("controller", e.what());
        }
        sol = controller_from_json(doc, problem.risk_budget);
        if (sol.V.size() != cs.stacked_input_dim() || sol.K.rows() != cs.stacked_input_dim() ||
            sol.K.cols() != cs.stacked_state_dim() || sol.allocation.constraints() != problem.allocation_rows() ||
            sol.allocation.steps() != cs.horizon) {
            throw ParseError("controller", "controller shape does not match the configured problem");
        }
        complete_solution(problem, cs, sol);
        if (doc.value("config_digest", std::string()) != digest) {
            report.warning = "controller was produced from a different configuration";
        }
        report.stop_reason = "stored controller";
    } else {
        const Stopwatch sw;
        const RiskAllocation alloc =
            uniform_allocation(problem.risk_budget, problem.allocation_rows(), problem.system.horizon);
        sol = solve_lower_stage(problem, alloc, cs, solver);
        report.timings.push_back({"solve", sw.seconds()});
        const ActivityPartition part = classify(alloc, sol.true_risks, cfg.ira.tol_active);
        report.trace.push_back({1, sol.cost, sol.cost, part.active_count, 0.0, false});
        report.stop_reason = "uniform allocation";
    }

    report.status = to_string(sol.status);
    report.solver_iterations = sol.iterations;
    report.cost = sol.cost;
    report.mean_cost = sol.breakdown.mean;
    report.covariance_cost = sol.breakdown.covariance;
    report.allocation = sol.allocation.grid();
    report.true_risks = sol.true_risks;

    std::vector<TrialResult> kept;
    if (options.command == Command::montecarlo) {
        const Stopwatch sw;
        MonteCarloConfig mc = cfg.montecarlo;
        mc.keep_trajectories = true;
        MonteCarloSummary s = run_monte_carlo(problem, cs, sol, mc);
        report.timings.push_back({"montecarlo", sw.seconds()});
        EmpiricalSummary e;
        e.family = to_string(mc.family);
        e.trials = s.trials;
        e.seed = mc.seed;
        e.joint_violations = s.joint_violations;
        e.joint_rate = s.joint_rate;
        e.joint_lower = s.joint_interval.first;
        e.joint_upper = s.joint_interval.second;
        e.cell_rates = s.cell_rates;
        e.mean_cost = s.mean_cost;
        e.cost_stderr = s.cost_stderr;
        report.empirical = e;
        kept = std::move(s.kept);
    }

    const std::filesystem::path dir(options.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
    }
    const Stopwatch sw;
    write_trajectories(dir / "trajectories.csv", digest, cs, sol.mean_traj, kept);
    write_allocation(dir / "risk_allocation.csv", report);
    write_iterations(dir / "cost_per_iteration.csv", report);
    write_json(dir / "controller.json", controller_to_json(sol, digest));
    report.timings.push_back({"write", sw.seconds()});
    write_timings(dir / "timings.csv", report);
    write_json(dir / "summary.json", report_to_json(report));
    return report;
}

}  // namespace drcs::app
