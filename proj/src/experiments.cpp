#include "phs/experiments.hpp"

#include "phs/system_io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#ifndef PHS_VERSION_STRING
#define PHS_VERSION_STRING "0.1.0"
#endif

namespace phs {

const char* version_string() noexcept { return PHS_VERSION_STRING; }

using nlohmann::json;

// ---------------------------------------------------------------------------
// Parsing helpers
// ---------------------------------------------------------------------------

namespace {

double number_field(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
    return v.get<double>();
}

int int_field(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ConfigError(std::string("'") + key + "' must be an integer");
    return v.get<int>();
}

std::string string_field(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_string()) throw ConfigError(std::string("'") + key + "' must be a string");
    return v.get<std::string>();
}

std::vector<double> number_list(const json& v, const char* key) {
    if (!v.is_array()) throw ConfigError(std::string("'") + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError(std::string("'") + key + "' must be an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
    }
}

SystemSpec parse_system(const json& j) {
    SystemSpec s;
    if (j.is_string()) {
        s.name = j.get<std::string>();
        return s;
    }
    if (!j.is_object()) throw ConfigError("'system' must be a name or an object");
    reject_unknown(j, {"name", "params", "path", "target_spectral_radius"}, "'system'");
    if (j.contains("name")) s.name = string_field(j, "name");
    if (j.contains("params")) {
        if (!j.at("params").is_object()) throw ConfigError("'system.params' must be an object");
        s.params = j.at("params");
    }
    if (j.contains("path")) {
        s.path = string_field(j, "path");
        if (s.name.empty()) s.name = "file";
    }
    if (j.contains("target_spectral_radius")) s.target_spectral_radius = number_field(j, "target_spectral_radius");
    return s;
}

InputSpec parse_input(const json& j) {
    InputSpec in;
    if (j.is_string()) {
        in.type = j.get<std::string>();
    } else {
        if (!j.is_object()) throw ConfigError("'input' must be a type name or an object");
        reject_unknown(j, {"type", "value", "amplitude", "frequency"}, "'input'");
        if (j.contains("type")) in.type = string_field(j, "type");
        if (j.contains("value")) in.value = number_list(j.at("value"), "input.value");
        if (j.contains("amplitude")) in.amplitude = number_field(j, "amplitude");
        if (j.contains("frequency")) in.frequency = number_field(j, "frequency");
    }
    if (in.type != "zero" && in.type != "constant" && in.type != "sine") {
        throw ConfigError("unknown input type '" + in.type + "'");
    }
    return in;
}

SubstepOrder parse_order(const std::string& s) {
    if (s == "dissipative_outer") return SubstepOrder::dissipative_outer;
    if (s == "conservative_outer") return SubstepOrder::conservative_outer;
    throw ConfigError("unknown substep order '" + s + "'");
}

}  // namespace

ExperimentKind parse_experiment_kind(const std::string& name) {
    if (name == "convergence") return ExperimentKind::convergence;
    if (name == "solver_compare") return ExperimentKind::solver_compare;
    if (name == "multistep_drift") return ExperimentKind::multistep_drift;
    if (name == "simulate") return ExperimentKind::simulate;
    throw ConfigError("unknown experiment '" + name + "'");
}

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::convergence: return "convergence";
        case ExperimentKind::solver_compare: return "solver_compare";
        case ExperimentKind::multistep_drift: return "multistep_drift";
        case ExperimentKind::simulate: return "simulate";
    }
    return {};
}

std::string to_string(LinearSolverKind kind) {
    switch (kind) {
        case LinearSolverKind::direct: return "direct";
        case LinearSolverKind::gmres: return "gmres";
        case LinearSolverKind::cayley_arnoldi: return "cayley_arnoldi";
    }
    return {};
}

LinearSolverChoice parse_solver(const json& j) {
    LinearSolverChoice c;
    std::string name;
    if (j.is_string()) {
        name = j.get<std::string>();
    } else if (j.is_object()) {
        reject_unknown(j, {"name", "tol", "maxit", "absolute_tol"}, "'solver'");
        if (!j.contains("name")) throw ConfigError("'solver' needs a name");
        name = string_field(j, "name");
        if (j.contains("tol")) c.tol = number_field(j, "tol");
        if (j.contains("maxit")) c.maxit = int_field(j, "maxit");
        if (j.contains("absolute_tol")) {
            if (!j.at("absolute_tol").is_boolean()) throw ConfigError("'absolute_tol' must be a boolean");
            c.absolute_tol = j.at("absolute_tol").get<bool>();
        }
    } else {
        throw ConfigError("'solver' must be a name or an object");
    }
    if (name == "direct") c.kind = LinearSolverKind::direct;
    else if (name == "gmres") c.kind = LinearSolverKind::gmres;
    else if (name == "cayley_arnoldi") c.kind = LinearSolverKind::cayley_arnoldi;
    else throw ConfigError("unknown solver '" + name + "'");
    if (!(c.tol > 0.0)) throw ConfigError("solver tolerance must be positive");
    if (c.maxit < 1) throw ConfigError("solver maxit must be >= 1");
    return c;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j,
                   {"experiment", "system", "variants", "step_sizes", "h", "t_end", "solver", "seed", "output_dir",
                    "x0", "input", "order", "steps"},
                   "config");
    ExperimentConfig c;
    try {
        if (j.contains("experiment")) c.experiment = parse_experiment_kind(string_field(j, "experiment"));
        if (j.contains("system")) c.system = parse_system(j.at("system"));
        if (j.contains("variants")) {
            if (!j.at("variants").is_array()) throw ConfigError("'variants' must be an array");
            for (const auto& v : j.at("variants")) {
                if (!v.is_string()) throw ConfigError("'variants' entries must be strings");
                try {
                    c.variants.push_back(SchemeVariant::parse(v.get<std::string>()));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(e.what());
                }
            }
        }
        if (j.contains("step_sizes")) c.step_sizes = number_list(j.at("step_sizes"), "step_sizes");
        if (j.contains("h")) c.h = number_field(j, "h");
        if (j.contains("t_end")) c.t_end = number_field(j, "t_end");
        if (j.contains("solver")) c.solver = parse_solver(j.at("solver"));
        if (j.contains("seed")) {
            const auto& s = j.at("seed");
            if (!s.is_number_integer() || s.get<long long>() < 0) throw ConfigError("'seed' must be a non-negative integer");
            c.seed = s.get<std::uint64_t>();
        }
        if (j.contains("output_dir")) c.output_dir = string_field(j, "output_dir");
        if (j.contains("x0")) c.x0 = number_list(j.at("x0"), "x0");
        if (j.contains("input")) c.input = parse_input(j.at("input"));
        if (j.contains("order")) c.order = parse_order(string_field(j, "order"));
        if (j.contains("steps")) c.steps = int_field(j, "steps");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

json ExperimentConfig::to_json() const {
    json j;
    j["experiment"] = to_string(experiment);
    json sys;
    sys["name"] = system.name;
    sys["params"] = system.params;
    if (!system.path.empty()) sys["path"] = system.path;
    if (system.target_spectral_radius) sys["target_spectral_radius"] = *system.target_spectral_radius;
    j["system"] = sys;
    json vars = json::array();
    for (const auto& v : variants) vars.push_back(v.label());
    j["variants"] = vars;
    j["step_sizes"] = step_sizes;
    if (h) j["h"] = *h;
    j["t_end"] = t_end;
    j["solver"] = json{{"name", to_string(solver.kind)},
                       {"tol", solver.tol},
                       {"maxit", solver.maxit},
                       {"absolute_tol", solver.absolute_tol}};
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    if (x0) j["x0"] = *x0;
    json in{{"type", input.type}};
    if (input.type == "constant") in["value"] = input.value;
    if (input.type == "sine") {
        in["amplitude"] = input.amplitude;
        in["frequency"] = input.frequency;
    }
    j["input"] = in;
    j["order"] = order == SubstepOrder::dissipative_outer ? "dissipative_outer" : "conservative_outer";
    j["steps"] = steps;
    return j;
}

ExperimentConfig resolve(ExperimentConfig c) {
    const bool krylov_study =
        c.experiment == ExperimentKind::solver_compare || c.experiment == ExperimentKind::multistep_drift;
    if (c.system.name.empty()) c.system.name = krylov_study ? "msd_chain" : "two_mass";
    if (c.system.name != "two_mass" && c.system.name != "msd_chain" && c.system.name != "file") {
        throw ConfigError("unknown system '" + c.system.name + "'");
    }
    if (c.system.name == "file" && c.system.path.empty()) throw ConfigError("system 'file' needs a path");
    if (krylov_study && c.system.name == "msd_chain" && !c.system.target_spectral_radius) {
        c.system.target_spectral_radius = 10.0;
    }
    if (c.system.target_spectral_radius && !(*c.system.target_spectral_radius > 0.0)) {
        throw ConfigError("target_spectral_radius must be positive");
    }

    switch (c.experiment) {
        case ExperimentKind::convergence:
            if (c.variants.empty()) {
                c.variants = {{VariantKind::exact_splitting, 0},
                              {VariantKind::dg_splitting, 0},
                              {VariantKind::multirate_nested, 0},
                              {VariantKind::multirate_highorder, 0}};
            }
            if (c.step_sizes.empty()) c.step_sizes = c.h ? std::vector<double>{*c.h} : std::vector<double>{0.4, 0.2, 0.1, 0.05, 0.025};
            if (c.step_sizes.empty()) throw ConfigError("convergence needs at least one step size");
            break;
        case ExperimentKind::simulate:
            if (c.variants.empty()) c.variants = {{VariantKind::exact_splitting, 0}};
            if (c.variants.size() != 1) throw ConfigError("simulate takes exactly one scheme variant");
            if (!c.h) c.h = c.step_sizes.empty() ? 0.01 : c.step_sizes.front();
            break;
        case ExperimentKind::solver_compare:
        case ExperimentKind::multistep_drift:
            if (!c.h && !c.step_sizes.empty()) c.h = c.step_sizes.front();
            if (c.steps < 1) throw ConfigError("'steps' must be >= 1");
            break;
    }
    for (double h : c.step_sizes) {
        if (!(h > 0.0)) throw ConfigError("step sizes must be positive");
    }
    if (c.h && !(*c.h > 0.0)) throw ConfigError("h must be positive");
    if (c.experiment == ExperimentKind::convergence || c.experiment == ExperimentKind::simulate) {
        if (!(c.t_end >= 0.0) || !std::isfinite(c.t_end)) throw ConfigError("t_end must be non-negative");
        if (c.experiment == ExperimentKind::convergence && !(c.t_end > 0.0)) throw ConfigError("t_end must be positive");
    }
    if (c.output_dir.empty()) throw ConfigError("output_dir must not be empty");
    return c;
}

// ---------------------------------------------------------------------------
// Systems, inputs, initial states
// ---------------------------------------------------------------------------

BuiltSystem build_system(const SystemSpec& spec, std::uint64_t seed) {
    auto checked = [](auto&& make) {
        try {
            return make();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("system: ") + e.what());
        }
    };
    if (spec.name == "two_mass") {
        QuadraticPHSystem sys = system_from_generator("two_mass", spec.params);
        if (!spec.target_spectral_radius) return {std::move(sys), 1.0};
        auto scaled = checked([&] { return scale_to_spectral_radius(sys, *spec.target_spectral_radius, seed); });
        return {std::move(scaled.system), scaled.factor};
    }
    if (spec.name == "msd_chain") {
        MsdChainParams p = msd_chain_params_from_json(spec.params);
        double factor = 1.0;
        if (spec.target_spectral_radius) {
            const MsdChainParams q = checked([&] { return scale_to_spectral_radius(p, *spec.target_spectral_radius, seed); });
            factor = q.stiffness / p.stiffness;
            p = q;
        }
        return {checked([&] { return build_msd_chain(p); }), factor};
    }
    if (spec.name == "file") {
        if (!spec.params.empty()) throw ConfigError("system 'file' takes no params");
        QuadraticPHSystem sys = load_system(spec.path);
        if (!spec.target_spectral_radius) return {std::move(sys), 1.0};
        auto scaled = checked([&] { return scale_to_spectral_radius(sys, *spec.target_spectral_radius, seed); });
        return {std::move(scaled.system), scaled.factor};
    }
    throw ConfigError("unknown system '" + spec.name + "'");
}

InputSignal make_input(const InputSpec& spec, Index ports) {
    if (spec.type == "zero") return InputSignal::zero(ports);
    if (ports == 0) throw ConfigError("input '" + spec.type + "' given for a system without ports");
    if (spec.type == "constant") {
        if (static_cast<Index>(spec.value.size()) != ports) {
            throw ConfigError("constant input needs " + std::to_string(ports) + " values");
        }
        return InputSignal::constant(Eigen::Map<const Vector>(spec.value.data(), ports));
    }
    if (spec.type == "sine") return InputSignal::sine(ports, spec.amplitude, spec.frequency);
    throw ConfigError("unknown input type '" + spec.type + "'");
}

Vector initial_state(const ExperimentConfig& cfg, const QuadraticPHSystem& sys) {
    if (cfg.x0) {
        if (static_cast<Index>(cfg.x0->size()) != sys.dim()) {
            throw ConfigError("x0 has length " + std::to_string(cfg.x0->size()) + ", system dimension is " +
                              std::to_string(sys.dim()));
        }
        return Eigen::Map<const Vector>(cfg.x0->data(), sys.dim());
    }
    if (cfg.system.name == "two_mass") return two_mass_default_x0();
    return random_unit_vector(sys.dim(), cfg.seed);
}

std::optional<double> loglog_slope(const std::vector<double>& h, const std::vector<double>& err) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < std::min(h.size(), err.size()); ++i) {
        if (h[i] > 0.0 && err[i] > 0.0 && std::isfinite(err[i])) pts.emplace_back(std::log(h[i]), std::log(err[i]));
    }
    if (pts.size() < 2) return std::nullopt;
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxy = 0.0, sxx = 0.0;
    for (const auto& [x, y] : pts) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if (sxx == 0.0) return std::nullopt;
    return sxy / sxx;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

class OutputDir {
public:
    OutputDir(const ExperimentConfig& cfg, bool enabled) : cfg_(cfg), enabled_(enabled) {
        if (!enabled_) return;
        std::error_code ec;
        std::filesystem::create_directories(cfg.output_dir, ec);
        if (ec) throw ConfigError("cannot create output directory '" + cfg.output_dir + "': " + ec.message());
    }

    /// Opens a file for writing (nullptr-like stream when disabled).
    std::ofstream open(const std::string& name) {
        if (!enabled_) return {};
        const auto path = std::filesystem::path(cfg_.output_dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
        files_.push_back(name);
        return out;
    }

    void manifest(const std::string& status, const json& extra) {
        if (!enabled_) return;
        json m;
        m["version"] = version_string();
        m["experiment"] = to_string(cfg_.experiment);
        m["config"] = cfg_.to_json();
        m["outputs"] = files_;
        m["status"] = status;
        m["results"] = extra;
        std::ofstream out(std::filesystem::path(cfg_.output_dir) / "manifest.json", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write manifest.json");
        out << m.dump(2) << '\n';
    }

    bool enabled() const { return enabled_; }

private:
    const ExperimentConfig& cfg_;
    bool enabled_;
    std::vector<std::string> files_;
};

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string solver_label(const SolverRun& r) { return r.solver; }

}  // namespace

// ---------------------------------------------------------------------------
// Convergence study
// ---------------------------------------------------------------------------

ConvergenceResult run_convergence(const ExperimentConfig& cfg, bool write) {
    const BuiltSystem built = build_system(cfg.system, cfg.seed);
    const QuadraticPHSystem& sys = built.system;
    const Vector x0 = initial_state(cfg, sys);
    const InputSignal u = make_input(cfg.input, sys.ports());
    OutputDir out(cfg, write);

    const Vector x_ref = reference_solution(sys, x0, cfg.t_end, u);
    const Vector y_ref = sys.output(x_ref);

    ConvergenceResult res;
    for (const auto& variant : cfg.variants) {
        const std::string label = variant.label();
        res.variant_order.push_back(label);
        std::vector<double> hs, errs;
        std::optional<StrangScheme> scheme;
        std::string setup_error;
        try {
            scheme = make_variant_scheme(sys, variant, cfg.solver);
            scheme->order = cfg.order;
        } catch (const std::exception& e) {
            setup_error = e.what();
        }
        for (double h : cfg.step_sizes) {
            ConvergenceRow row;
            row.variant = label;
            row.h = h;
            try {
                if (!scheme) throw StepFailure(setup_error);
                const Trajectory traj = integrate(*scheme, sys, x0, 0.0, cfg.t_end, h, u);
                const Vector& x = traj.steps.back().state.x;
                row.final_error = (x - x_ref).norm();
                row.output_error = (traj.steps.back().y - y_ref).norm();
                if (!std::isfinite(row.final_error)) throw StepFailure("non-finite state");
                hs.push_back(h);
                errs.push_back(row.final_error);
            } catch (const std::exception& e) {
                row.ok = false;
                row.final_error = std::nan("");
                row.output_error = std::nan("");
                row.message = e.what();
                ++res.failures;
            }
            res.rows.push_back(std::move(row));
        }
        res.slopes[label] = loglog_slope(hs, errs);
    }

    if (out.enabled()) {
        auto csv = out.open("convergence.csv");
        csv << "variant,h,final_error,output_error,status\n";
        for (const auto& r : res.rows) {
            csv << r.variant << ',' << format_double(r.h) << ',' << format_double(r.final_error) << ','
                << format_double(r.output_error) << ',' << (r.ok ? "ok" : "failed") << '\n';
        }
        auto sl = out.open("slopes.csv");
        sl << "variant,slope\n";
        json slopes = json::object();
        for (const auto& label : res.variant_order) {
            const auto& s = res.slopes.at(label);
            sl << label << ',' << (s ? format_double(*s) : std::string("")) << '\n';
            slopes[label] = optional_number(s);
        }
        json failures = json::array();
        for (const auto& r : res.rows) {
            if (!r.ok) failures.push_back({{"variant", r.variant}, {"h", r.h}, {"message", r.message}});
        }
        out.manifest(res.failures ? "failed" : "ok",
                     {{"slopes", slopes}, {"failures", failures}, {"calibration_factor", built.calibration_factor}});
    }
    return res;
}

// ---------------------------------------------------------------------------
// Krylov studies
// ---------------------------------------------------------------------------

namespace {

struct KrylovSetup {
    TransformedSystem ts;
    LinearOperator J;
    Vector x0;
    double h = 0.0;
    double rho = 0.0;
    double factor = 1.0;
};

KrylovSetup krylov_setup(const ExperimentConfig& cfg) {
    const BuiltSystem built = build_system(cfg.system, cfg.seed);
    const CongruenceTransform ct = congruence_from(built.system.Q());
    KrylovSetup s{transform_system(built.system, ct), {}, {}, 0.0, 0.0, built.calibration_factor};
    s.J = LinearOperator::from_sparse(s.ts.J, OperatorProperty::skew_symmetric);
    s.rho = cfg.system.target_spectral_radius ? *cfg.system.target_spectral_radius
                                              : transformed_spectral_radius(s.J, cfg.seed);
    if (cfg.h) {
        s.h = *cfg.h;
    } else {
        if (!(s.rho > 0.0)) throw ConfigError("h must be given when rho(J~) = 0");
        s.h = 0.05 / s.rho;
    }
    // the initial state lives in congruence coordinates here
    if (cfg.x0) {
        if (static_cast<Index>(cfg.x0->size()) != s.ts.dim()) throw ConfigError("x0 length does not match the system");
        s.x0 = Eigen::Map<const Vector>(cfg.x0->data(), s.ts.dim());
    } else {
        s.x0 = random_unit_vector(s.ts.dim(), cfg.seed);
    }
    return s;
}

std::vector<double> deviations(const KrylovReport& rep, double x0_norm) {
    std::vector<double> d;
    d.reserve(rep.iterate_norms.size());
    for (double nk : rep.iterate_norms) d.push_back(x0_norm > 0.0 ? std::abs(1.0 - nk / x0_norm) : 0.0);
    return d;
}

KrylovResult solve_cayley(LinearSolverKind kind, const LinearOperator& J, const Vector& x0, double h,
                          const KrylovOptions& opts) {
    if (kind == LinearSolverKind::gmres) {
        const Vector b = x0 + 0.5 * h * J(x0);
        return gmres(LinearOperator::shifted(J, 1.0, -0.5 * h), b, opts);
    }
    return cayley_arnoldi(J, x0, h, opts);
}

}  // namespace

SolverCompareResult run_solver_compare(const ExperimentConfig& cfg, bool write) {
    const KrylovSetup s = krylov_setup(cfg);
    OutputDir out(cfg, write);
    const KrylovOptions opts{.tol = cfg.solver.tol, .maxit = cfg.solver.maxit, .absolute_tol = cfg.solver.absolute_tol};
    const double x0n = s.x0.norm();

    SolverCompareResult res;
    res.h = s.h;
    res.spectral_radius = s.rho;
    auto run = [&](LinearSolverKind kind) {
        SolverRun r;
        r.solver = to_string(kind);
        KrylovResult kr = solve_cayley(kind, s.J, s.x0, s.h, opts);
        r.final_residual = residual_of_cayley_system(s.J, s.h, kr.x, s.x0);
        r.deviation = deviations(kr.report, x0n);
        r.report = std::move(kr.report);
        return r;
    };
    res.gmres = run(LinearSolverKind::gmres);
    res.arnoldi = run(LinearSolverKind::cayley_arnoldi);

    if (out.enabled()) {
        auto resid = out.open("residuals.csv");
        resid << "solver,iteration,residual_norm\n";
        auto dev = out.open("deviation.csv");
        dev << "solver,iteration,norm_deviation\n";
        json summary = json::object();
        for (const SolverRun* r : {&res.gmres, &res.arnoldi}) {
            for (std::size_t k = 0; k < r->deviation.size(); ++k) {
                resid << solver_label(*r) << ',' << k + 1 << ',' << format_double(r->report.residual_norms[k]) << '\n';
                dev << solver_label(*r) << ',' << k + 1 << ',' << format_double(r->deviation[k]) << '\n';
            }
            auto rep = out.open(r->solver + "_report.csv");
            rep.precision(17);
            r->report.write_csv(rep);
            double worst = 0.0;
            for (double d : r->deviation) worst = std::max(worst, d);
            summary[r->solver] = {{"iterations", r->report.iterations},
                                  {"converged", r->report.converged},
                                  {"max_norm_deviation", worst},
                                  {"final_residual", r->final_residual}};
        }
        const bool ok = res.gmres.report.converged && res.arnoldi.report.converged;
        out.manifest(ok ? "ok" : "failed", {{"h", s.h},
                                            {"spectral_radius", s.rho},
                                            {"calibration_factor", s.factor},
                                            {"solvers", summary}});
    }
    return res;
}

MultistepResult run_multistep_drift(const ExperimentConfig& cfg, bool write) {
    const KrylovSetup s = krylov_setup(cfg);
    OutputDir out(cfg, write);
    MultistepResult res;
    res.h = s.h;
    res.tol = stopping_rule_h2(s.h);
    res.spectral_radius = s.rho;
    const KrylovOptions opts{.tol = res.tol, .maxit = cfg.solver.maxit, .absolute_tol = true};
    const double x0n = s.x0.norm();
    Vector xg = s.x0, xa = s.x0;
    bool ok = true;
    for (int i = 1; i <= cfg.steps; ++i) {
        KrylovResult g = solve_cayley(LinearSolverKind::gmres, s.J, xg, s.h, opts);
        KrylovResult a = solve_cayley(LinearSolverKind::cayley_arnoldi, s.J, xa, s.h, opts);
        ok = ok && g.report.converged && a.report.converged;
        xg = std::move(g.x);
        xa = std::move(a.x);
        res.converged = ok;
        res.rows.push_back({i, std::abs(1.0 - xg.norm() / x0n), std::abs(1.0 - xa.norm() / x0n), g.report.iterations,
                            a.report.iterations});
    }
    if (out.enabled()) {
        auto csv = out.open("drift.csv");
        csv << "step,gmres_deviation,cayley_arnoldi_deviation,gmres_iterations,cayley_arnoldi_iterations\n";
        for (const auto& r : res.rows) {
            csv << r.step << ',' << format_double(r.gmres_deviation) << ',' << format_double(r.arnoldi_deviation) << ','
                << r.gmres_iterations << ',' << r.arnoldi_iterations << '\n';
        }
        out.manifest(ok ? "ok" : "failed",
                     {{"h", s.h}, {"tol", res.tol}, {"spectral_radius", s.rho}, {"calibration_factor", s.factor}});
    }
    return res;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

namespace {

void write_trajectory(std::ostream& os, const Trajectory& traj, Index n, Index d) {
    os << 't';
    for (Index i = 1; i <= n; ++i) os << ",x_" << i;
    os << ",H";
    for (Index i = 1; i <= d; ++i) os << ",y_" << i;
    os << ",dissipated,supplied\n";
    for (std::size_t k = 0; k < traj.steps.size(); ++k) {
        const StepResult& r = traj.steps[k];
        os << format_double(r.state.t);
        for (Index i = 0; i < n; ++i) os << ',' << format_double(r.state.x(i));
        os << ',' << format_double(r.H_value);
        for (Index i = 0; i < d; ++i) os << ',' << format_double(r.y(i));
        os << ',' << format_double(traj.cumulative[k].dissipated) << ',' << format_double(traj.cumulative[k].supplied)
           << '\n';
    }
}

}  // namespace

SimulateResult run_simulate(const ExperimentConfig& cfg, bool write) {
    const BuiltSystem built = build_system(cfg.system, cfg.seed);
    const QuadraticPHSystem& sys = built.system;
    const Vector x0 = initial_state(cfg, sys);
    const InputSignal u = make_input(cfg.input, sys.ports());
    OutputDir out(cfg, write);

    SimulateResult res;
    try {
        StrangScheme scheme = make_variant_scheme(sys, cfg.variants.front(), cfg.solver);
        scheme.order = cfg.order;
        res.trajectory = integrate(scheme, sys, x0, 0.0, cfg.t_end, *cfg.h, u);
    } catch (const IntegrationFailure& e) {
        res.failed = true;
        res.message = e.what();
        res.trajectory = e.partial();
    } catch (const StepFailure& e) {
        res.failed = true;
        res.message = e.what();
    } catch (const DefinitenessError& e) {
        res.failed = true;
        res.message = e.what();
    }
    if (!res.trajectory.steps.empty()) res.ledger = dissipativity_ledger(sys, res.trajectory.steps);

    if (out.enabled()) {
        auto csv = out.open("trajectory.csv");
        write_trajectory(csv, res.trajectory, sys.dim(), sys.ports());
        json extra{{"steps", res.trajectory.steps.empty() ? 0 : res.trajectory.steps.size() - 1},
                   {"dissipativity", {{"lhs", res.ledger.lhs}, {"bound", res.ledger.bound}, {"satisfied", res.ledger.satisfied}}},
                   {"calibration_factor", built.calibration_factor}};
        if (res.failed) extra["message"] = res.message;
        out.manifest(res.failed ? "failed" : "ok", extra);
    }
    return res;
}

int run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.experiment) {
        case ExperimentKind::convergence: return run_convergence(cfg).failures ? 2 : 0;
        case ExperimentKind::solver_compare: {
            const auto r = run_solver_compare(cfg);
            return r.gmres.report.converged && r.arnoldi.report.converged ? 0 : 2;
        }
        case ExperimentKind::multistep_drift: {
            return run_multistep_drift(cfg).converged ? 0 : 2;
        }
        case ExperimentKind::simulate: return run_simulate(cfg).failed ? 2 : 0;
    }
    return 1;
}

}  // namespace phs
