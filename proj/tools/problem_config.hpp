/**
 * @file problem_config.hpp
 * @brief Run configuration: problem data, constraint geometry, IRA and Monte Carlo settings.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "drcs/cone_constraints.hpp"
#include "drcs/dr_ira.hpp"
#include "drcs/montecarlo.hpp"
#include "drcs/steering_program.hpp"

namespace drcs::app {

inline constexpr int kSchemaVersion = 1;

enum class ConstraintKind { polytope, cone };

const char* to_string(ConstraintKind kind);

struct ProblemConfig {
    std::string name;
    std::string note;  ///< provenance remark carried into the summary
    LinearSystemSpec system;
    MomentPair initial;
    MomentPair terminal;
    std::vector<MatrixXd> Q;
    std::vector<MatrixXd> R;
    ConstraintKind constraint = ConstraintKind::polytope;
    std::vector<HalfSpace> halfspaces;
    std::optional<SecondOrderConeSet> cone;
    double risk_budget = 0.1;
    RiskMode mode = RiskMode::dr;
    bool causal_feedback = false;
    IraConfig ira;
    MonteCarloConfig montecarlo;

    /// Throws ParseError when the selected geometry is missing, otherwise
    /// whatever SteeringProblem::validate raises.
    [[nodiscard]] SteeringProblem to_problem() const;
};

/// Names accepted by make_preset.
const std::vector<std::string>& preset_names();

/// Throws ParseError("preset", ...) for an unknown name.
ProblemConfig make_preset(const std::string& name);

/// Clohessy-Wiltshire relative dynamics (x radial, y along-track, z
/// cross-track) with zero-order-hold acceleration input.
struct RelativeOrbit {
    MatrixXd A;  ///< 6 x 6
    MatrixXd B;  ///< 6 x 3
};
RelativeOrbit clohessy_wiltshire(double orbital_rate, double dt);

inline constexpr double kSpacecraftOrbitalRate = 1.1e-3;  ///< rad/s
inline constexpr double kSpacecraftStep = 2.0;             ///< s
inline constexpr int kSpacecraftHorizon = 10;

nlohmann::json to_json(const ProblemConfig& cfg);

/// Parses a configuration document; errors carry the JSON path of the field.
ProblemConfig config_from_json(const nlohmann::json& doc);

/// Reads and parses a configuration file (ParseError on malformed text).
ProblemConfig load_config(const std::string& path);

/// 64-bit FNV-1a of the canonical serialization, as 16 hex digits.
std::string config_digest(const ProblemConfig& cfg);

}  // namespace drcs::app
