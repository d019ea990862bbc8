#include "problem_config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "drcs/errors.hpp"

namespace drcs::app {

using nlohmann::json;

const char* to_string(ConstraintKind kind) { return kind == ConstraintKind::polytope ? "polytope" : "cone"; }

SteeringProblem ProblemConfig::to_problem() const {
    SteeringProblem p;
    p.system = system;
    p.initial = initial;
    p.terminal = terminal;
    p.Q = Q;
    p.R = R;
    if (constraint == ConstraintKind::cone) {
        if (!cone) {
            throw ParseError("constraints.cone", "cone constraint selected but no cone is defined");
        }
        p.cone = cone;
    } else {
        p.halfspaces = halfspaces;
    }
    p.risk_budget = risk_budget;
    p.mode = mode;
    p.causal_feedback = causal_feedback;
    p.validate();
    return p;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"double_integrator", "spacecraft_polytope", "spacecraft_cone"};
    return names;
}

RelativeOrbit clohessy_wiltshire(double orbital_rate, double dt) {
    const double w = orbital_rate;
    MatrixXd cont = MatrixXd::Zero(9, 9);
    cont.block(0, 3, 3, 3).setIdentity();
    cont(3, 0) = 3.0 * w * w;
    cont(3, 4) = 2.0 * w;
    cont(4, 3) = -2.0 * w;
    cont(5, 2) = -w * w;
    cont.block(3, 6, 3, 3).setIdentity();
    const MatrixXd disc = (cont * dt).exp();
    return {disc.topLeftCorner(6, 6), disc.block(0, 6, 6, 3)};
}

namespace {

ProblemConfig double_integrator() {
    const double dt = 0.2;
    const int N = 15;
    MatrixXd A = MatrixXd::Identity(4, 4);
    A.topRightCorner(2, 2) = dt * MatrixXd::Identity(2, 2);
    MatrixXd B(4, 2);
    B << dt * dt * MatrixXd::Identity(2, 2), dt * MatrixXd::Identity(2, 2);

    ProblemConfig cfg;
    cfg.name = "double_integrator";
    cfg.system = LinearSystemSpec::time_invariant(A, B, 1e-3 * MatrixXd::Identity(4, 4),
                                                  MatrixXd::Identity(4, 4), N);
    cfg.initial.mean = (VectorXd(4) << -10.0, 1.0, 0.0, 0.0).finished();
    cfg.initial.cov = VectorXd((VectorXd(4) << 0.1, 0.1, 0.01, 0.01).finished()).asDiagonal();
    cfg.terminal.mean = VectorXd::Zero(4);
    cfg.terminal.cov = 0.25 * cfg.initial.cov;
    cfg.Q.assign(N, MatrixXd(VectorXd((VectorXd(4) << 10.0, 10.0, 1.0, 1.0).finished()).asDiagonal()));
    cfg.R.assign(N, 1e3 * MatrixXd::Identity(2, 2));
    // 0.2 (x - 1) <= y <= -0.2 (x - 1)
    cfg.halfspaces = {{(VectorXd(4) << 0.2, -1.0, 0.0, 0.0).finished(), 0.2},
                      {(VectorXd(4) << 0.2, 1.0, 0.0, 0.0).finished(), 0.2}};
    cfg.risk_budget = 0.10;
    return cfg;
}

ProblemConfig spacecraft(bool cone) {
    const int N = kSpacecraftHorizon;
    const RelativeOrbit cw = clohessy_wiltshire(kSpacecraftOrbitalRate, kSpacecraftStep);

    ProblemConfig cfg;
    cfg.name = cone ? "spacecraft_cone" : "spacecraft_polytope";
    cfg.note = "approximate reproduction: Clohessy-Wiltshire dynamics, orbital rate 1.1e-3 rad/s, step 2 s, "
               "N = 10 and the constraint geometry are illustrative, not published values";
    cfg.system = LinearSystemSpec::time_invariant(cw.A, cw.B, 1e-3 * MatrixXd::Identity(6, 6),
                                                  MatrixXd::Identity(6, 6), N);
    cfg.initial.mean = (VectorXd(6) << 100.0, -120.0, 90.0, 0.0, 0.0, 0.0).finished();
    if (cone) {
        cfg.initial.mean(0) = 10.0;
    }
    cfg.initial.cov = 0.4 * MatrixXd(VectorXd((VectorXd(6) << 1, 1, 1, 0.1, 0.1, 0.1).finished()).asDiagonal());
    cfg.terminal.mean = VectorXd::Zero(6);
    cfg.terminal.cov = 0.5 * cfg.initial.cov;
    cfg.Q.assign(N, MatrixXd(VectorXd((VectorXd(6) << 10, 10, 10, 1, 1, 1).finished()).asDiagonal()));
    cfg.R.assign(N, 1e3 * MatrixXd::Identity(3, 3));
    cfg.risk_budget = 0.15;

    // Approach corridor toward the target along -y: |x| <= 2 - 0.85 y.
    cfg.halfspaces = {{(VectorXd(6) << 1.0, 0.85, 0.0, 0.0, 0.0, 0.0).finished(), 2.0},
                      {(VectorXd(6) << -1.0, 0.85, 0.0, 0.0, 0.0, 0.0).finished(), 2.0}};
    // Line-of-sight cone around the -y axis: ||(x, z)|| <= 8 - 0.7 y.
    SecondOrderConeSet los;
    los.A = MatrixXd::Zero(2, 6);
    los.A(0, 0) = 1.0;
    los.A(1, 2) = 1.0;
    los.b = VectorXd::Zero(2);
    los.c = VectorXd::Zero(6);
    los.c(1) = -0.7;
    los.d = 8.0;
    cfg.cone = los;
    cfg.constraint = cone ? ConstraintKind::cone : ConstraintKind::polytope;
    return cfg;
}

// ---- JSON reading -------------------------------------------------------

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

const json& field(const json& obj, const std::string& path, const std::string& key) {
    if (!obj.is_object()) {
        throw ParseError(path.empty() ? "<root>" : path, "expected an object");
    }
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw ParseError(join(path, key), "missing field");
    }
    return *it;
}

const json* optional_field(const json& obj, const std::string& key) {
    const auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) {
        throw ParseError(path, "expected a number");
    }
    return j.get<double>();
}

int integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) {
        throw ParseError(path, "expected an integer");
    }
    return j.get<int>();
}

std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) {
        throw ParseError(path, "expected a string");
    }
    return j.get<std::string>();
}

bool boolean(const json& j, const std::string& path) {
    if (!j.is_boolean()) {
        throw ParseError(path, "expected true or false");
    }
    return j.get<bool>();
}

VectorXd vector(const json& j, const std::string& path) {
    if (!j.is_array()) {
        throw ParseError(path, "expected an array of numbers");
    }
    VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = number(j[i], index(path, i));
    }
    return v;
}

bool is_matrix(const json& j) { return j.is_array() && !j.empty() && j[0].is_array() && (j[0].empty() || !j[0][0].is_array()); }

MatrixXd matrix(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) {
        throw ParseError(path, "expected a non-empty array of rows");
    }
    MatrixXd out;
    for (std::size_t r = 0; r < j.size(); ++r) {
        const VectorXd row = vector(j[r], index(path, r));
        if (r == 0) {
            out.resize(static_cast<Eigen::Index>(j.size()), row.size());
        } else if (row.size() != out.cols()) {
            throw ParseError(index(path, r), "row length differs from the first row");
        }
        out.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return out;
}

/// One matrix for every step, or a list of N matrices.
std::vector<MatrixXd> per_step(const json& j, const std::string& path, int horizon) {
    if (is_matrix(j)) {
        return std::vector<MatrixXd>(static_cast<std::size_t>(horizon), matrix(j, path));
    }
    if (!j.is_array() || static_cast<int>(j.size()) != horizon) {
        throw ParseError(path, "expected one matrix or a list of " + std::to_string(horizon) + " matrices");
    }
    std::vector<MatrixXd> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        out.push_back(matrix(j[k], index(path, k)));
    }
    return out;
}

MomentPair moments(const json& j, const std::string& path) {
    MomentPair m;
    m.mean = vector(field(j, path, "mean"), join(path, "mean"));
    m.cov = matrix(field(j, path, "cov"), join(path, "cov"));
    return m;
}

// ---- JSON writing -------------------------------------------------------

json matrix_json(const MatrixXd& M) {
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

json vector_json(const VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

json per_step_json(const std::vector<MatrixXd>& Ms) {
    bool constant = true;
    for (const MatrixXd& M : Ms) {
        constant = constant && M.rows() == Ms.front().rows() && M.cols() == Ms.front().cols() && M == Ms.front();
    }
    if (constant && !Ms.empty()) {
        return matrix_json(Ms.front());
    }
    json out = json::array();
    for (const MatrixXd& M : Ms) {
        out.push_back(matrix_json(M));
    }
    return out;
}

}  // namespace

ProblemConfig make_preset(const std::string& name) {
    if (name == "double_integrator") {
        return double_integrator();
    }
    if (name == "spacecraft_polytope") {
        return spacecraft(false);
    }
    if (name == "spacecraft_cone") {
        return spacecraft(true);
    }
    throw ParseError("preset", "unknown preset '" + name + "'");
}

json to_json(const ProblemConfig& cfg) {
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["name"] = cfg.name;
    if (!cfg.note.empty()) {
        doc["note"] = cfg.note;
    }
    json& sys = doc["system"];
    sys["horizon"] = cfg.system.horizon;
    sys["A"] = per_step_json(cfg.system.A);
    sys["B"] = per_step_json(cfg.system.B);
    sys["D"] = per_step_json(cfg.system.D);
    sys["noise_cov"] = matrix_json(cfg.system.noise_cov);
    doc["initial"] = {{"mean", vector_json(cfg.initial.mean)}, {"cov", matrix_json(cfg.initial.cov)}};
    doc["terminal"] = {{"mean", vector_json(cfg.terminal.mean)}, {"cov", matrix_json(cfg.terminal.cov)}};
    doc["cost"] = {{"Q", per_step_json(cfg.Q)}, {"R", per_step_json(cfg.R)}};

    json& con = doc["constraints"];
    con["type"] = to_string(cfg.constraint);
    con["halfspaces"] = json::array();
    for (const HalfSpace& hs : cfg.halfspaces) {
        con["halfspaces"].push_back({{"normal", vector_json(hs.normal)}, {"offset", hs.offset}});
    }
    if (cfg.cone) {
        con["cone"] = {{"A", matrix_json(cfg.cone->A)},
                       {"b", vector_json(cfg.cone->b)},
                       {"c", vector_json(cfg.cone->c)},
                       {"d", cfg.cone->d}};
    }
    doc["risk"] = {{"budget", cfg.risk_budget}, {"mode", to_string(cfg.mode)}, {"causal_feedback", cfg.causal_feedback}};
    json ira = {{"rho", cfg.ira.rho}, {"tol_active", cfg.ira.tol_active}, {"max_iterations", cfg.ira.max_iterations}};
    ira["cost_tol"] = cfg.ira.cost_tol ? json(*cfg.ira.cost_tol) : json(nullptr);
    doc["ira"] = ira;
    doc["montecarlo"] = {{"family", to_string(cfg.montecarlo.family)},
                         {"trials", cfg.montecarlo.trials},
                         {"seed", cfg.montecarlo.seed}};
    return doc;
}

ProblemConfig config_from_json(const json& doc) {
    const int version = integer(field(doc, "", "schema_version"), "schema_version");
    if (version != kSchemaVersion) {
        throw ParseError("schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                                               std::to_string(kSchemaVersion) + ")");
    }
    ProblemConfig cfg;
    if (const json* j = optional_field(doc, "name")) {
        cfg.name = text(*j, "name");
    }
    if (const json* j = optional_field(doc, "note")) {
        cfg.note = text(*j, "note");
    }

    const json& sys = field(doc, "", "system");
    const int N = integer(field(sys, "system", "horizon"), "system.horizon");
    if (N < 1) {
        throw ParseError("system.horizon", "must be at least 1");
    }
    cfg.system.horizon = N;
    cfg.system.A = per_step(field(sys, "system", "A"), "system.A", N);
    cfg.system.B = per_step(field(sys, "system", "B"), "system.B", N);
    cfg.system.D = per_step(field(sys, "system", "D"), "system.D", N);
    cfg.system.noise_cov = matrix(field(sys, "system", "noise_cov"), "system.noise_cov");
    cfg.initial = moments(field(doc, "", "initial"), "initial");
    cfg.terminal = moments(field(doc, "", "terminal"), "terminal");
    const json& cost = field(doc, "", "cost");
    cfg.Q = per_step(field(cost, "cost", "Q"), "cost.Q", N);
    cfg.R = per_step(field(cost, "cost", "R"), "cost.R", N);

    if (const json* con = optional_field(doc, "constraints")) {
        if (const json* t = optional_field(*con, "type")) {
            const std::string kind = text(*t, "constraints.type");
            if (kind == "polytope") {
                cfg.constraint = ConstraintKind::polytope;
            } else if (kind == "cone") {
                cfg.constraint = ConstraintKind::cone;
            } else {
                throw ParseError("constraints.type", "expected polytope or cone, got '" + kind + "'");
            }
        }
        if (const json* hs = optional_field(*con, "halfspaces")) {
            if (!hs->is_array()) {
                throw ParseError("constraints.halfspaces", "expected an array");
            }
            for (std::size_t i = 0; i < hs->size(); ++i) {
                const std::string p = index("constraints.halfspaces", i);
                cfg.halfspaces.push_back({vector(field((*hs)[i], p, "normal"), join(p, "normal")),
                                          number(field((*hs)[i], p, "offset"), join(p, "offset"))});
            }
        }
        if (const json* c = optional_field(*con, "cone")) {
            const std::string p = "constraints.cone";
            SecondOrderConeSet cone;
            cone.A = matrix(field(*c, p, "A"), p + ".A");
            cone.b = vector(field(*c, p, "b"), p + ".b");
            cone.c = vector(field(*c, p, "c"), p + ".c");
            cone.d = number(field(*c, p, "d"), p + ".d");
            cfg.cone = cone;
        }
    }

    const json& risk = field(doc, "", "risk");
    cfg.risk_budget = number(field(risk, "risk", "budget"), "risk.budget");
    if (const json* m = optional_field(risk, "mode")) {
        try {
            cfg.mode = risk_mode_from_string(text(*m, "risk.mode"));
        } catch (const DomainError& e) {
            throw ParseError("risk.mode", e.what());
        }
    }
    if (const json* c = optional_field(risk, "causal_feedback")) {
        cfg.causal_feedback = boolean(*c, "risk.causal_feedback");
    }

    if (const json* ira = optional_field(doc, "ira")) {
        if (const json* j = optional_field(*ira, "rho")) {
            cfg.ira.rho = number(*j, "ira.rho");
        }
        if (const json* j = optional_field(*ira, "tol_active")) {
            cfg.ira.tol_active = number(*j, "ira.tol_active");
        }
        if (const json* j = optional_field(*ira, "max_iterations")) {
            cfg.ira.max_iterations = integer(*j, "ira.max_iterations");
        }
        if (const json* j = optional_field(*ira, "cost_tol")) {
            cfg.ira.cost_tol = number(*j, "ira.cost_tol");
        }
        try {
            cfg.ira.validate();
        } catch (const DomainError& e) {
            throw ParseError("ira", e.what());
        }
    }
    if (const json* mc = optional_field(doc, "montecarlo")) {
        if (const json* j = optional_field(*mc, "family")) {
            try {
                cfg.montecarlo.family = noise_family_from_string(text(*j, "montecarlo.family"));
            } catch (const DomainError& e) {
                throw ParseError("montecarlo.family", e.what());
            }
        }
        if (const json* j = optional_field(*mc, "trials")) {
            cfg.montecarlo.trials = integer(*j, "montecarlo.trials");
            if (cfg.montecarlo.trials < 1) {
                throw ParseError("montecarlo.trials", "must be at least 1");
            }
        }
        if (const json* j = optional_field(*mc, "seed")) {
            if (!j->is_number_unsigned()) {
                throw ParseError("montecarlo.seed", "expected a non-negative integer");
            }
            cfg.montecarlo.seed = j->get<std::uint64_t>();
        }
    }
    return cfg;
}

ProblemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, "cannot open configuration file");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path, std::string("malformed JSON: ") + e.what());
    }
    return config_from_json(doc);
}

std::string config_digest(const ProblemConfig& cfg) {
    const std::string canon = to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : canon) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace drcs::app
