#include "phs/system_io.hpp"

#include <fstream>
#include <sstream>

namespace phs {

namespace {

Matrix dense_from_json(const nlohmann::json& j, Index rows, Index cols, const char* name) {
    if (cols == 0 && (j.is_null() || (j.is_array() && j.empty()))) return Matrix(rows, 0);
    if (!j.is_array() || static_cast<Index>(j.size()) != rows) {
        throw ConfigError(std::string("system: '") + name + "' must be an array of " + std::to_string(rows) + " rows");
    }
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
            throw ConfigError(std::string("system: row ") + std::to_string(i) + " of '" + name + "' must have " +
                              std::to_string(cols) + " entries");
        }
        for (Index k = 0; k < cols; ++k) {
            const auto& v = row[static_cast<std::size_t>(k)];
            if (!v.is_number()) throw ConfigError(std::string("system: non-numeric entry in '") + name + "'");
            M(i, k) = v.get<double>();
        }
    }
    return M;
}

nlohmann::json dense_to_json(const Matrix& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Index k = 0; k < M.cols(); ++k) row.push_back(M(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

Index size_field(const nlohmann::json& j, const char* key, bool required) {
    if (!j.contains(key)) {
        if (required) throw ConfigError(std::string("system: missing '") + key + "'");
        return 0;
    }
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError(std::string("system: '") + key + "' must be a non-negative integer");
    }
    return static_cast<Index>(v.get<long long>());
}

double param_number(const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("parameter '" + key + "' must be a number");
    return v.get<double>();
}

void require_object(const nlohmann::json& params) {
    if (!params.is_null() && !params.is_object()) throw ConfigError("system params must be an object");
}

}  // namespace

TwoMassParams two_mass_params_from_json(const nlohmann::json& params) {
    require_object(params);
    TwoMassParams p;
    if (params.is_null()) return p;
    for (const auto& [k, v] : params.items()) {
        double* field = k == "m1" ? &p.m1 : k == "m2" ? &p.m2 : k == "K1" ? &p.K1 : k == "K2" ? &p.K2
                      : k == "K" ? &p.K : k == "r1" ? &p.r1 : k == "r2" ? &p.r2 : nullptr;
        if (!field) throw ConfigError("unknown parameter '" + k + "' for two_mass");
        *field = param_number(v, k);
    }
    return p;
}

MsdChainParams msd_chain_params_from_json(const nlohmann::json& params) {
    require_object(params);
    MsdChainParams p;
    if (params.is_null()) return p;
    for (const auto& [k, v] : params.items()) {
        if (k == "n_cells" || k == "input_ports") {
            if (!v.is_number_integer()) throw ConfigError("parameter '" + k + "' must be an integer");
            (k == "n_cells" ? p.n_cells : p.input_ports) = v.get<Index>();
            continue;
        }
        double* field = k == "mass" ? &p.mass : k == "stiffness" ? &p.stiffness : k == "damping" ? &p.damping : nullptr;
        if (!field) throw ConfigError("unknown parameter '" + k + "' for msd_chain");
        *field = param_number(v, k);
    }
    return p;
}

QuadraticPHSystem system_from_generator(const std::string& name, const nlohmann::json& params) {
    try {
        if (name == "two_mass") return build_two_mass(two_mass_params_from_json(params));
        if (name == "msd_chain") return build_msd_chain(msd_chain_params_from_json(params));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(name + ": " + e.what());
    }
    throw ConfigError("unknown system generator '" + name + "'");
}

QuadraticPHSystem system_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("system: expected a JSON object");
    if (j.contains("generator")) {
        if (!j.at("generator").is_string()) throw ConfigError("system: 'generator' must be a string");
        return system_from_generator(j.at("generator").get<std::string>(),
                                     j.contains("params") ? j.at("params") : nlohmann::json());
    }
    const Index n = size_field(j, "n", true);
    const Index d = size_field(j, "d", false);
    for (const char* key : {"J", "R", "Q"}) {
        if (!j.contains(key)) throw ConfigError(std::string("system: missing '") + key + "'");
    }
    const Matrix J = dense_from_json(j.at("J"), n, n, "J");
    const Matrix R = dense_from_json(j.at("R"), n, n, "R");
    const Matrix Q = dense_from_json(j.at("Q"), n, n, "Q");
    const Matrix B = dense_from_json(j.contains("B") ? j.at("B") : nlohmann::json(), n, d, "B");
    try {
        return QuadraticPHSystem(J, R, B, Q);
    } catch (const DimensionError& e) {
        throw ConfigError(std::string("system: ") + e.what());
    }
}

nlohmann::json system_to_json(const QuadraticPHSystem& sys) {
    nlohmann::json j;
    j["n"] = sys.dim();
    j["d"] = sys.ports();
    j["J"] = dense_to_json(Matrix(sys.J()));
    j["R"] = dense_to_json(Matrix(sys.R()));
    j["B"] = dense_to_json(sys.B());
    j["Q"] = dense_to_json(Matrix(sys.Q()));
    return j;
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

QuadraticPHSystem load_system(const std::string& path) { return system_from_json(read_json_file(path)); }

void save_system(const QuadraticPHSystem& sys, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << system_to_json(sys).dump(2) << '\n';
}

}  // namespace phs
