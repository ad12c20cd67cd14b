#pragma once

// Declarative experiment runner behind the phs-split CLI.
//
// Config file (JSON, comments allowed):
//   {
//     "experiment": "convergence" | "solver_compare" | "multistep_drift" | "simulate",
//     "system": "two_mass" | "msd_chain" | {"name": ..., "params": {...},
//               "target_spectral_radius": 10} | {"name": "file", "path": "sys.json"},
//     "variants": ["exact_splitting", "dg_splitting", "multirate_nested{8}", "multirate_highorder{4}"],
//     "step_sizes": [0.4, 0.2, ...],  "h": 0.01,  "t_end": 20,
//     "solver": "direct" | {"name": "gmres" | "cayley_arnoldi", "tol": 1e-10, "maxit": 500},
//     "seed": 1, "output_dir": "out", "x0": [...], "steps": 20,
//     "input": {"type": "zero" | "constant" | "sine", "value": [...], "amplitude": 1, "frequency": 1},
//     "order": "dissipative_outer" | "conservative_outer"
//   }
// Every key is optional; defaults depend on the experiment (see resolve()).

#include "phs/benchmarks.hpp"
#include "phs/krylov.hpp"
#include "phs/splitting.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace phs {

/// git-describe-style version recorded in run manifests.
const char* version_string() noexcept;

enum class ExperimentKind { convergence, solver_compare, multistep_drift, simulate };

struct SystemSpec {
    std::string name;            // "two_mass", "msd_chain" or "file"; empty until resolved
    nlohmann::json params = nlohmann::json::object();
    std::string path;            // for "file"
    std::optional<double> target_spectral_radius;
};

struct InputSpec {
    std::string type = "zero";
    std::vector<double> value;   // constant
    double amplitude = 1.0;      // sine
    double frequency = 1.0;
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::simulate;
    SystemSpec system;
    std::vector<SchemeVariant> variants;
    std::vector<double> step_sizes;
    std::optional<double> h;
    double t_end = 20.0;
    LinearSolverChoice solver;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    std::optional<std::vector<double>> x0;
    InputSpec input;
    SubstepOrder order = SubstepOrder::dissipative_outer;
    int steps = 20;

    /// Throws ConfigError on unknown keys, wrong types or invalid values.
    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

ExperimentKind parse_experiment_kind(const std::string& name);
std::string to_string(ExperimentKind kind);
LinearSolverChoice parse_solver(const nlohmann::json& j);
std::string to_string(LinearSolverKind kind);

/// Fills experiment-dependent defaults:
///   convergence     two_mass, all four variants, h in {0.4, 0.2, 0.1, 0.05, 0.025}, t_end 20
///   solver_compare  msd_chain calibrated to rho(J~) = 10, h = 0.05 / rho, tol 1e-10
///   multistep_drift as solver_compare, 20 steps, per-step tolerance h^2
///   simulate        two_mass, exact_splitting, h = 0.01
/// and validates the result (ConfigError).
ExperimentConfig resolve(ExperimentConfig cfg);

/// System named by the spec, calibrated if a target spectral radius is given.
struct BuiltSystem {
    QuadraticPHSystem system;
    double calibration_factor = 1.0;
};
BuiltSystem build_system(const SystemSpec& spec, std::uint64_t seed);

InputSignal make_input(const InputSpec& spec, Index ports);

/// Initial state: cfg.x0 if given, two_mass_default_x0() for two_mass, otherwise
/// a seeded random unit vector.
Vector initial_state(const ExperimentConfig& cfg, const QuadraticPHSystem& sys);

/// Least-squares slope of log(error) against log(h); nullopt with fewer than two points.
std::optional<double> loglog_slope(const std::vector<double>& h, const std::vector<double>& err);

// ---------------------------------------------------------------------------
// Results. Each run_* writes its CSV files and manifest.json into
// cfg.output_dir when `write` is true.
// ---------------------------------------------------------------------------

struct ConvergenceRow {
    std::string variant;
    double h = 0.0;
    double final_error = 0.0;   // |x(t_end) - x_ref(t_end)|_2
    double output_error = 0.0;  // |y(t_end) - y_ref(t_end)|_2 (0 without ports)
    bool ok = true;
    std::string message;
};

struct ConvergenceResult {
    std::vector<ConvergenceRow> rows;
    std::map<std::string, std::optional<double>> slopes;
    std::vector<std::string> variant_order;
    int failures = 0;
};

struct SolverRun {
    std::string solver;
    KrylovReport report;
    std::vector<double> deviation;  // |1 - |x_k| / |x0|| per iteration
    double final_residual = 0.0;    // explicit residual of the returned solution
};

struct SolverCompareResult {
    SolverRun gmres, arnoldi;
    double h = 0.0;
    double spectral_radius = 0.0;
};

struct DriftRow {
    int step = 0;
    double gmres_deviation = 0.0;
    double arnoldi_deviation = 0.0;
    int gmres_iterations = 0;
    int arnoldi_iterations = 0;
};

struct MultistepResult {
    std::vector<DriftRow> rows;
    double h = 0.0;
    double tol = 0.0;
    double spectral_radius = 0.0;
    bool converged = true;  // every inner solve met the tolerance
};

struct SimulateResult {
    Trajectory trajectory;
    DissipativityLedger ledger;
    bool failed = false;
    std::string message;
};

ConvergenceResult run_convergence(const ExperimentConfig& cfg, bool write = true);
SolverCompareResult run_solver_compare(const ExperimentConfig& cfg, bool write = true);
MultistepResult run_multistep_drift(const ExperimentConfig& cfg, bool write = true);
/// Integration failures write the partial trajectory and set `failed`.
SimulateResult run_simulate(const ExperimentConfig& cfg, bool write = true);

/// Dispatches on cfg.experiment (cfg must be resolved). Returns 0 on success,
/// 2 if a numerical failure was recorded.
int run_experiment(const ExperimentConfig& cfg);

/// Shortest round-trip decimal form used in all CSV output.
std::string format_double(double v);

}  // namespace phs
