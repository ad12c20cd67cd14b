#pragma once

// Shared value types and error classes for the port-Hamiltonian splitting library.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace phs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Index = Eigen::Index;

/// Which part of the right-hand side a substep integrates:
/// full (J - R) grad H + B u, conservative J grad H, or dissipative -R grad H + B u.
enum class FlowPart { full, conservative, dissipative };

/// Physical state x at time t.
struct State {
    Vector x;
    double t = 0.0;
};

/// State plus the autonomization clock s. Only dissipative substeps move s.
struct TimeAugmentedState {
    Vector x;
    double s = 0.0;
};

/// Discrete energy bookkeeping of one step (or a sum of steps):
/// H(end) - H(start) = -dissipated + supplied.
struct EnergyBalance {
    double dissipated = 0.0;
    double supplied = 0.0;

    EnergyBalance& operator+=(const EnergyBalance& other) {
        dissipated += other.dissipated;
        supplied += other.supplied;
        return *this;
    }
    friend EnergyBalance operator+(EnergyBalance a, const EnergyBalance& b) { return a += b; }
};

struct StepResult {
    State state;
    Vector y;             // port output B^T grad H at the final state
    double H_value = 0.0;
    EnergyBalance energy_balance;
};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Inconsistent matrix/vector sizes.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A matrix required to be (semi)definite is not.
class DefinitenessError : public std::runtime_error {
public:
    DefinitenessError(const std::string& what, double smallest_eigenvalue)
        : std::runtime_error(what), smallest_eigenvalue_(smallest_eigenvalue) {}
    double smallest_eigenvalue() const noexcept { return smallest_eigenvalue_; }

private:
    double smallest_eigenvalue_;
};

/// A time step (or one of its substeps) could not be completed.
class StepFailure : public std::runtime_error {
public:
    StepFailure(const std::string& what, int substep = -1, double last_residual = 0.0)
        : std::runtime_error(what), substep_(substep), last_residual_(last_residual) {}
    int substep() const noexcept { return substep_; }
    double last_residual() const noexcept { return last_residual_; }

private:
    int substep_;
    double last_residual_;
};

/// Invalid user configuration (CLI/config files).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require_size(const Vector& v, Index n, const char* what) {
    if (v.size() != n) {
        throw DimensionError(std::string(what) + ": expected length " + std::to_string(n) +
                             ", got " + std::to_string(v.size()));
    }
}

}  // namespace phs
