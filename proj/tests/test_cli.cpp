#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "drcs/errors.hpp"
#include "problem_config.hpp"
#include "run.hpp"
#include "test_support.hpp"

using namespace drcs;
using namespace drcs::app;
namespace fs = std::filesystem;

namespace {

ProblemConfig small_config(int N = 6) {
    const SteeringProblem p = drcs::testing::small_double_integrator(N);
    ProblemConfig cfg;
    cfg.name = "small";
    cfg.system = p.system;
    cfg.initial = p.initial;
    cfg.terminal = p.terminal;
    cfg.Q = p.Q;
    cfg.R = p.R;
    cfg.halfspaces = p.halfspaces;
    cfg.risk_budget = p.risk_budget;
    cfg.montecarlo.trials = 200;
    return cfg;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("drcs_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& path) {
    std::ifstream in(path);
    std::string line;
    std::vector<std::vector<std::string>> rows;
    std::getline(in, line);  // digest
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        rows.push_back(cells);
    }
    return rows;
}

int cli(const std::string& args) {
    const std::string cmd = std::string(DRCS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST(Presets, Values) {
    const ProblemConfig di = make_preset("double_integrator");
    EXPECT_EQ(di.risk_budget, 0.10);
    EXPECT_EQ(di.system.horizon, 15);
    EXPECT_EQ(di.halfspaces.size(), 2u);
    EXPECT_NO_THROW(di.to_problem());

    const ProblemConfig poly = make_preset("spacecraft_polytope");
    const ProblemConfig cone = make_preset("spacecraft_cone");
    EXPECT_EQ(poly.risk_budget, 0.15);
    EXPECT_EQ(poly.R[0], 1e3 * MatrixXd::Identity(3, 3));
    EXPECT_EQ(poly.constraint, ConstraintKind::polytope);
    EXPECT_EQ(cone.constraint, ConstraintKind::cone);
    EXPECT_EQ(cone.initial.mean(0), 10.0);
    EXPECT_EQ(cone.initial.mean.tail(5), poly.initial.mean.tail(5));
    EXPECT_EQ(cone.terminal.cov, poly.terminal.cov);
    EXPECT_FALSE(cone.to_problem().halfspaces.size());
    EXPECT_THROW(make_preset("nope"), ParseError);
}

TEST(Presets, ClohessyWiltshireLimits) {
    const RelativeOrbit cw = clohessy_wiltshire(kSpacecraftOrbitalRate, kSpacecraftStep);
    // Along-track drift of a radial offset: x(t) stays bounded, y(t) = -6 (wt - sin wt) x0.
    const double w = kSpacecraftOrbitalRate, t = kSpacecraftStep;
    EXPECT_NEAR(cw.A(0, 0), 4.0 - 3.0 * std::cos(w * t), 1e-12);
    EXPECT_NEAR(cw.A(1, 0), 6.0 * (std::sin(w * t) - w * t), 1e-12);
    EXPECT_NEAR(cw.A(2, 2), std::cos(w * t), 1e-12);
    // Input matrix against the double integrator as the rate vanishes.
    const RelativeOrbit still = clohessy_wiltshire(1e-9, 2.0);
    EXPECT_NEAR(still.B(0, 0), 2.0, 1e-6);
    EXPECT_NEAR(still.B(3, 0), 2.0, 1e-9);
}

TEST(Config, RoundTripKeepsDigest) {
    for (const std::string& name : preset_names()) {
        const ProblemConfig cfg = make_preset(name);
        const ProblemConfig back = config_from_json(nlohmann::json::parse(to_json(cfg).dump()));
        EXPECT_EQ(config_digest(back), config_digest(cfg)) << name;
        EXPECT_EQ(back.system.A, cfg.system.A);
    }
    ProblemConfig a = make_preset("double_integrator");
    ProblemConfig b = a;
    b.risk_budget = 0.09;
    EXPECT_NE(config_digest(a), config_digest(b));
    EXPECT_EQ(config_digest(a).size(), 16u);
}

TEST(Config, ErrorsNameTheField) {
    nlohmann::json doc = to_json(small_config());
    auto path_of = [](const nlohmann::json& d) {
        try {
            config_from_json(d);
        } catch (const ParseError& e) {
            return e.field_path();
        }
        return std::string("<none>");
    };
    nlohmann::json d = doc;
    d["system"].erase("A");
    EXPECT_EQ(path_of(d), "system.A");
    d = doc;
    d["schema_version"] = 2;
    EXPECT_EQ(path_of(d), "schema_version");
    d = doc;
    d["risk"]["budget"] = "high";
    EXPECT_EQ(path_of(d), "risk.budget");
    d = doc;
    d["constraints"]["halfspaces"][1].erase("offset");
    EXPECT_EQ(path_of(d), "constraints.halfspaces[1].offset");
    d = doc;
    d["cost"]["Q"] = nlohmann::json::array({d["cost"]["Q"], d["cost"]["Q"]});
    EXPECT_EQ(path_of(d), "cost.Q");
    d = doc;
    d["risk"]["mode"] = "robust";
    EXPECT_EQ(path_of(d), "risk.mode");

    const fs::path dir = scratch("parse");
    write_file(dir / "bad.json", "{ \"schema_version\": 1,");
    EXPECT_THROW(load_config((dir / "bad.json").string()), ParseError);
    EXPECT_THROW(load_config((dir / "missing.json").string()), ParseError);
}

TEST(Config, ConeSelectedWithoutCone) {
    ProblemConfig cfg = small_config();
    cfg.constraint = ConstraintKind::cone;
    EXPECT_THROW(cfg.to_problem(), ParseError);
}

TEST(Run, WritesDigestedDeterministicOutputs) {
    const ProblemConfig cfg = small_config();
    const fs::path a = scratch("run_a"), b = scratch("run_b");
    RunOptions opt;
    opt.command = Command::montecarlo;
    opt.out_dir = a.string();
    const RunReport ra = run(cfg, opt);
    opt.out_dir = b.string();
    run(cfg, opt);
    const std::string header = "# config_digest=" + config_digest(cfg);
    for (const char* f : {"trajectories.csv", "risk_allocation.csv", "cost_per_iteration.csv", "timings.csv"}) {
        ASSERT_TRUE(fs::exists(a / f)) << f;
        EXPECT_EQ(slurp(a / f).rfind(header + "\n", 0), 0u) << f;
    }
    for (const char* f : {"trajectories.csv", "risk_allocation.csv", "cost_per_iteration.csv", "controller.json"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    EXPECT_TRUE(fs::exists(a / "summary.json"));

    // Mean trajectory first, then one block per kept trial.
    const auto traj = csv_rows(a / "trajectories.csv");
    EXPECT_EQ(traj.size(), static_cast<std::size_t>((cfg.montecarlo.trials + 1) * 7));
    EXPECT_EQ(traj.front()[0], "-1");
    EXPECT_EQ(traj.back()[0], std::to_string(cfg.montecarlo.trials - 1));

    const auto alloc = csv_rows(a / "risk_allocation.csv");
    ASSERT_EQ(alloc.size(), 12u);
    EXPECT_EQ(alloc[0][0], "0");
    EXPECT_EQ(alloc[0][1], "1");
    EXPECT_EQ(alloc[0].size(), 5u);

    ASSERT_TRUE(ra.empirical.has_value());
    EXPECT_LE(ra.empirical->joint_rate, cfg.risk_budget);
    EXPECT_LE(ra.empirical->joint_lower, ra.empirical->joint_rate);
    EXPECT_GE(ra.empirical->joint_upper, ra.empirical->joint_rate);
}

TEST(Run, IraCostColumnIsNonIncreasing) {
    ProblemConfig cfg = small_config(8);
    cfg.ira.cost_tol = 1e-9;
    cfg.ira.max_iterations = 6;
    const fs::path dir = scratch("ira");
    RunOptions opt;
    opt.command = Command::ira;
    opt.out_dir = dir.string();
    const RunReport r = run(cfg, opt);
    const auto rows = csv_rows(dir / "cost_per_iteration.csv");
    ASSERT_EQ(rows.size(), r.trace.size());
    ASSERT_GE(rows.size(), 2u);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_LE(std::stod(rows[i][1]), std::stod(rows[i - 1][1]) + 1e-6) << i;
    }
    EXPECT_NEAR(r.allocation.sum(), cfg.risk_budget, 1e-12);
    EXPECT_FALSE(r.stop_reason.empty());
}

TEST(Run, NoConstraintsGivesEmptyAllocation) {
    ProblemConfig cfg = small_config(4);
    cfg.halfspaces.clear();
    const fs::path dir = scratch("empty");
    RunOptions opt;
    opt.out_dir = dir.string();
    const RunReport r = run(cfg, opt);
    EXPECT_EQ(r.allocation.size(), 0);
    EXPECT_TRUE(csv_rows(dir / "risk_allocation.csv").empty());
}

TEST(Run, StoredControllerIsReused) {
    const ProblemConfig cfg = small_config();
    const fs::path dir = scratch("stored"), mc = scratch("stored_mc");
    RunOptions opt;
    opt.out_dir = dir.string();
    const RunReport solved = run(cfg, opt);
    opt.command = Command::montecarlo;
    opt.out_dir = mc.string();
    opt.controller_path = (dir / "controller.json").string();
    const RunReport r = run(cfg, opt);
    EXPECT_TRUE(r.warning.empty());
    EXPECT_NEAR(r.cost, solved.cost, 1e-9 * solved.cost);

    ProblemConfig other = cfg;
    other.risk_budget = 0.09;
    const fs::path mc2 = scratch("stored_mc2");
    opt.out_dir = mc2.string();
    EXPECT_FALSE(run(other, opt).warning.empty());

    ProblemConfig longer = small_config(7);
    EXPECT_THROW(run(longer, opt), Error);
}

TEST(Report, JsonRoundTrip) {
    RunReport r;
    r.command = "ira";
    r.config_name = "x";
    r.config_digest = "0123456789abcdef";
    r.status = "optimal";
    r.cost = 1.25;
    r.trace = {{1, 2.0, 2.0, 3, 0.5, false}, {2, 1.5, 1.7, 2, 0.25, true}};
    r.allocation = MatrixXd::Constant(2, 3, 0.01);
    r.true_risks = MatrixXd::Constant(2, 3, 0.005);
    EmpiricalSummary e;
    e.family = "laplacian";
    e.trials = 10;
    e.cell_rates = MatrixXd::Zero(2, 3);
    r.empirical = e;
    const RunReport back = report_from_json(report_to_json(r));
    EXPECT_EQ(report_to_json(back).dump(), report_to_json(r).dump());
    EXPECT_EQ(back.trace[1].kept_incumbent, true);
    EXPECT_EQ(back.allocation, r.allocation);
    EXPECT_EQ(format_number(0.1), "0.10000000000000001");
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch("exit");
    const std::string cfg_path = (dir / "small.json").string();
    write_file(cfg_path, to_json(small_config(4)).dump());
    EXPECT_EQ(cli("solve --config " + cfg_path + " --out " + (dir / "ok").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "ok" / "summary.json"));
    EXPECT_EQ(cli("solve --preset nope"), 3);
    EXPECT_EQ(cli("frobnicate --preset double_integrator"), 3);
    EXPECT_EQ(cli("solve"), 3);
    EXPECT_EQ(cli("montecarlo --config " + cfg_path + " --trials 0"), 3);

    nlohmann::json bad = to_json(small_config(4));
    bad["constraints"]["halfspaces"][0]["offset"] = -0.5;
    const std::string bad_path = (dir / "infeasible.json").string();
    write_file(bad_path, bad.dump());
    EXPECT_EQ(cli("solve --config " + bad_path + " --out " + (dir / "inf").string()), 2);

    write_file(dir / "blocker", "");
    EXPECT_EQ(cli("solve --config " + cfg_path + " --out " + (dir / "blocker" / "sub").string()), 1);

    const std::string dumped = (dir / "dumped.json").string();
    EXPECT_EQ(cli("solve --preset spacecraft_polytope --constraint cone --dump-config " + dumped), 0);
    EXPECT_EQ(config_digest(load_config(dumped)), config_digest(make_preset("spacecraft_cone")));
    EXPECT_EQ(cli("solve --preset spacecraft --dump-config " + dumped), 0);
    EXPECT_EQ(config_digest(load_config(dumped)), config_digest(make_preset("spacecraft_polytope")));
}
