#pragma once

// JSON form of a quadratic port-Hamiltonian system:
//     {"n": 2, "d": 1, "J": [[..], ..], "R": [[..], ..], "B": [[..], ..], "Q": [[..], ..]}
// with dense row-major nested arrays (B is n x d; omitted or [] when d = 0), or
// a benchmark family:
//     {"generator": "two_mass" | "msd_chain", "params": {...}}

#include "phs/benchmarks.hpp"
#include "phs/system.hpp"

#include "json.hpp"

#include <string>

namespace phs {

/// Throws ConfigError for missing keys, ragged rows or inconsistent sizes.
/// Structural properties are not checked here (see validate_structure).
QuadraticPHSystem system_from_json(const nlohmann::json& j);
nlohmann::json system_to_json(const QuadraticPHSystem& sys);

/// Parameter overrides on top of the defaults; unknown keys and wrong types
/// are ConfigErrors. Keys are the struct field names.
TwoMassParams two_mass_params_from_json(const nlohmann::json& params);
MsdChainParams msd_chain_params_from_json(const nlohmann::json& params);
QuadraticPHSystem system_from_generator(const std::string& name, const nlohmann::json& params);

QuadraticPHSystem load_system(const std::string& path);
void save_system(const QuadraticPHSystem& sys, const std::string& path);

/// Reads a whole JSON document; ConfigError if unreadable or malformed.
nlohmann::json read_json_file(const std::string& path);

}  // namespace phs
