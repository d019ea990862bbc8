/**
 * @file run.hpp
 * @brief Orchestration of solve / ira / montecarlo runs and their output files.
 *
 * Every run directory receives summary.json, trajectories.csv,
 * risk_allocation.csv, cost_per_iteration.csv, timings.csv and
 * controller.json. CSV files open with a `# config_digest=<hex>` line.
 */
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "problem_config.hpp"

namespace drcs::app {

enum class Command { solve, ira, montecarlo };

const char* to_string(Command command);
Command command_from_string(const std::string& text);

struct RunOptions {
    Command command = Command::solve;
    std::string out_dir = "out";
    std::optional<std::string> controller_path;  ///< montecarlo: reuse a stored controller
    bool verbose = false;
};

struct IterationRow {
    int iteration = 0;
    double cost = 0.0;
    double solved_cost = 0.0;
    int active = 0;
    double residual = 0.0;
    bool kept_incumbent = false;
};

struct EmpiricalSummary {
    std::string family;
    int trials = 0;
    std::uint64_t seed = 0;
    int joint_violations = 0;
    double joint_rate = 0.0;
    double joint_lower = 0.0;
    double joint_upper = 0.0;
    MatrixXd cell_rates;
    double mean_cost = 0.0;
    double cost_stderr = 0.0;
};

struct Timing {
    std::string phase;
    double seconds = 0.0;
};

struct RunReport {
    std::string command;
    std::string config_name;
    std::string config_digest;
    std::string note;
    std::string mode;
    std::string constraint;
    std::string status;
    int solver_iterations = 0;
    double cost = 0.0;
    double mean_cost = 0.0;
    double covariance_cost = 0.0;
    std::vector<IterationRow> trace;
    std::string stop_reason;
    std::string warning;
    MatrixXd allocation;
    MatrixXd true_risks;
    std::optional<EmpiricalSummary> empirical;
    std::vector<Timing> timings;
};

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& doc);

/// Controller file: V, K, allocation grid and the digest of the producing config.
nlohmann::json controller_to_json(const ControllerSolution& sol, const std::string& digest);
ControllerSolution controller_from_json(const nlohmann::json& doc, double budget);

/// Fixed-precision (%.17g) rendering used for every CSV number.
std::string format_number(double value);

/// Runs the command and writes the output files. Library errors propagate;
/// I/O failures raise std::runtime_error.
RunReport run(const ProblemConfig& cfg, const RunOptions& options);

}  // namespace drcs::app
