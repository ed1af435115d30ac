#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "gexp/cli/config.hpp"
#include "gexp/cli/output.hpp"
#include "gexp/gcore/error.hpp"
#include "gexp/gcore/generator.hpp"
#include "gexp/lq/problem.hpp"
#include "gexp/lq/solution.hpp"
#include "gexp/mp/adjoint.hpp"
#include "gexp/mp/hamiltonian.hpp"
#include "gexp/mp/variational.hpp"
#include "gexp/pde/payoff.hpp"
#include "gexp/pde/solver.hpp"
#include "gexp/scenario/robust.hpp"

namespace gexp::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalFailure = 3 };

/// Every key any command understands.
inline const std::set<std::string>& schema() {
    static const std::set<std::string> keys = {
        "generator.penalty", "generator.kappa", "generator.anchor", "generator.knots", "generator.values",
        "generator.theta.c_lo", "generator.theta.c_hi",
        "grid.T", "grid.N", "grid.M", "grid.x_max", "grid.padding",
        "payoff.kind", "payoff.value", "payoff.coeffs", "payoff.strike", "payoff.center", "payoff.width",
        "lq.A", "lq.B", "lq.C", "lq.D", "lq.b", "lq.sigma", "lq.E", "lq.Q", "lq.S", "lq.R", "lq.L", "lq.x0",
        "lq.substeps",
        "run.seed", "run.n_paths", "run.substeps", "run.steps", "run.starts", "run.pilot_paths", "run.max_sweeps",
        "run.tolerance", "run.eta", "run.resolution",
        "mp.domain", "mp.lo", "mp.hi", "mp.sabotage", "mp.paths", "mp.tolerance", "mp.eps", "mp.shifts",
    };
    return keys;
}

/// What a command produced: files in the output directory plus the JSON summary.
struct CommandResult {
    int exit_code = kOk;
    std::string status = "ok";
    std::vector<std::string> outputs;
    Json summary;
};

namespace detail {

inline double positive(const Config& cfg, const std::string& path) {
    const double v = cfg.number(path);
    if (!(v > 0.0)) throw ConfigError(cfg.line_of(path), path, "must be > 0");
    return v;
}

inline std::size_t at_least(const Config& cfg, const std::string& path, std::size_t fallback, std::size_t min) {
    const std::size_t v = cfg.count(path, fallback);
    if (v < min) throw ConfigError(cfg.line_of(path), path, "must be >= " + std::to_string(min));
    return v;
}

inline ConvexGenerator build_generator(const Config& cfg) {
    const double lo = cfg.number("generator.theta.c_lo");
    if (!(lo > 0.0)) throw ConfigError(cfg.line_of("generator.theta.c_lo"), "generator.theta.c_lo", "must be > 0");
    const double hi = cfg.number("generator.theta.c_hi");
    if (!(hi >= lo))
        throw ConfigError(cfg.line_of("generator.theta.c_hi"), "generator.theta.c_hi", "must be >= c_lo");
    const std::string kind = cfg.word("generator.penalty", "zero");
    PenaltyFunction penalty = ZeroPenalty{};
    if (kind == "quadratic") {
        penalty = QuadraticPenalty{cfg.number("generator.kappa"), cfg.number("generator.anchor")};
    } else if (kind == "tabulated") {
        penalty = TabulatedPenalty{cfg.numbers("generator.knots"), cfg.numbers("generator.values")};
    } else if (kind != "zero") {
        throw ConfigError(cfg.line_of("generator.penalty"), "generator.penalty",
                          "expected zero, quadratic or tabulated, got '" + kind + "'");
    }
    try {
        return ConvexGenerator({lo, hi}, std::move(penalty));
    } catch (const Error& e) {
        throw ConfigError(cfg.line_of("generator.penalty"), "generator.penalty", e.what());
    }
}

inline pde::MarkovPayoff build_payoff(const Config& cfg) {
    const std::string kind = cfg.word("payoff.kind");
    if (kind == "constant") return pde::MarkovPayoff::constant(cfg.number("payoff.value"));
    if (kind == "identity") return pde::MarkovPayoff::identity();
    if (kind == "square") return pde::MarkovPayoff::square();
    if (kind == "polynomial") return pde::MarkovPayoff::polynomial(cfg.numbers("payoff.coeffs"));
    if (kind == "call") return pde::MarkovPayoff::call(cfg.number("payoff.strike"));
    if (kind == "indicator")
        return pde::MarkovPayoff::smooth_indicator(cfg.number("payoff.center"), positive(cfg, "payoff.width"));
    throw ConfigError(cfg.line_of("payoff.kind"), "payoff.kind",
                      "expected constant, identity, square, polynomial, call or indicator, got '" + kind + "'");
}

struct PdeSetup {
    double horizon;
    pde::SpatialGrid space;
    TimeGrid time;
};

inline PdeSetup build_pde_grid(const Config& cfg, const ConvexGenerator& gen, const pde::MarkovPayoff& payoff) {
    const double T = positive(cfg, "grid.T");
    const std::size_t N = at_least(cfg, "grid.N", 100, 1);
    const std::size_t M = at_least(cfg, "grid.M", 801, 3);
    if (M % 2 == 0) throw ConfigError(cfg.line_of("grid.M"), "grid.M", "must be odd so that x = 0 is a node");
    const double padding = cfg.number("grid.padding", payoff.padding());
    const double x_max = cfg.has("grid.x_max") ? positive(cfg, "grid.x_max")
                                               : pde::SpatialGrid::for_horizon(gen.theta().c_hi, T, M, padding).x_max();
    return {T, pde::SpatialGrid(x_max, M), TimeGrid(T, N)};
}

inline scenario::OptimizerConfig build_optimizer(const Config& cfg) {
    scenario::OptimizerConfig opt;
    opt.starts = at_least(cfg, "run.starts", opt.starts, 1);
    opt.max_sweeps = at_least(cfg, "run.max_sweeps", opt.max_sweeps, 1);
    opt.tolerance = cfg.number("run.tolerance", opt.tolerance);
    if (!(opt.tolerance > 0.0)) throw ConfigError(cfg.line_of("run.tolerance"), "run.tolerance", "must be > 0");
    opt.pilot_paths = cfg.count("run.pilot_paths", 0);
    opt.seed = cfg.count("run.seed", 1);
    return opt;
}

inline scenario::MonteCarloConfig build_monte_carlo(const Config& cfg) {
    scenario::MonteCarloConfig mc;
    mc.n_paths = at_least(cfg, "run.n_paths", 10000, 1);
    mc.seed = cfg.count("run.seed", 1);
    mc.substeps = at_least(cfg, "run.substeps", 1, 1);
    return mc;
}

inline lq::MatrixXd lq_matrix(const Config& cfg, const std::string& key, Eigen::Index rows, Eigen::Index cols,
                              const lq::MatrixXd& fallback) {
    const std::string path = "lq." + key;
    if (!cfg.has(path)) return fallback;
    lq::MatrixXd m = cfg.matrix(path);
    if (m.rows() != rows || m.cols() != cols)
        throw ConfigError(cfg.line_of(path), path,
                          "expected " + std::to_string(rows) + " x " + std::to_string(cols) + ", got " +
                              std::to_string(m.rows()) + " x " + std::to_string(m.cols()));
    return m;
}

inline lq::LQProblem build_lq(const Config& cfg) {
    const auto gen = build_generator(cfg);
    if (!gen.is_differentiable())
        throw ConfigError(cfg.line_of("generator.penalty"), "generator.penalty",
                          "the LQ solver needs a strictly convex penalty (quadratic with kappa > 0)");
    const lq::VectorXd x0 = cfg.vector("lq.x0");
    const Eigen::Index n = x0.size();
    const lq::MatrixXd B0 = cfg.matrix("lq.B");
    if (B0.rows() != n) throw ConfigError(cfg.line_of("lq.B"), "lq.B", "needs one row per state component");
    const Eigen::Index m = B0.cols();
    auto c = lq::Coefficients::zero(static_cast<std::size_t>(n), static_cast<std::size_t>(m));
    c.B = B0;
    c.A = lq_matrix(cfg, "A", n, n, c.A);
    c.C = lq_matrix(cfg, "C", n, n, c.C);
    c.D = lq_matrix(cfg, "D", n, m, c.D);
    c.b = lq_matrix(cfg, "b", n, 1, c.b);
    c.sigma = lq_matrix(cfg, "sigma", n, 1, c.sigma);
    c.E = cfg.number("lq.E", 0.0);
    c.Q = lq_matrix(cfg, "Q", n, n, c.Q);
    c.S = lq_matrix(cfg, "S", m, n, c.S);
    c.R = lq_matrix(cfg, "R", m, m, c.R);
    const lq::MatrixXd L = lq_matrix(cfg, "L", n, n, lq::MatrixXd::Zero(n, n));
    const TimeGrid grid(positive(cfg, "grid.T"), at_least(cfg, "grid.N", 10, 1));
    const std::size_t substeps = at_least(cfg, "lq.substeps", 8, 1);
    try {
        return lq::LQProblem::constant(c, L, x0, grid, gen, substeps);
    } catch (const Error& e) {
        throw ConfigError(0, "lq", e.what());
    }
}

inline Json generator_json(const ConvexGenerator& gen) {
    return Json{{"c_lo", gen.theta().c_lo}, {"c_hi", gen.theta().c_hi}, {"penalty", describe(gen.penalty())}};
}

inline Json header(const std::string& command, const std::string& hash) {
    return Json{{"schema_version", kSchemaVersion}, {"command", command}, {"config_hash", hash}};
}

inline void emit(CommandResult& result, const std::filesystem::path& dir, const std::string& name,
                 const std::string& bytes) {
    write_file(dir / name, bytes);
    result.outputs.push_back(name);
}

inline Json obstruction_json(const lq::ObstructionReport& r) {
    return Json{{"residual_sup", r.residual_sup},
                {"residuals", r.residuals},
                {"violating_nodes", r.violating},
                {"homogeneity_gap", r.homogeneity_gap}};
}

}  // namespace detail

/// Value of E~[phi(B_T)] from the generator PDE; writes the slice (x, u).
inline CommandResult cmd_eval(const Config& cfg, const std::string& hash, const std::filesystem::path& dir,
                              std::ostream& log) {
    const auto gen = detail::build_generator(cfg);
    const auto payoff = detail::build_payoff(cfg);
    const auto setup = detail::build_pde_grid(cfg, gen, payoff);
    cfg.finish(schema());

    const auto slice = pde::solve_generator_pde(gen, payoff, setup.horizon, setup.space, setup.time);
    CsvTable csv({"x", "u"});
    for (std::size_t j = 0; j < slice.values.size(); ++j) csv.row({setup.space.node(j), slice.values[j]});

    CommandResult out;
    out.summary = detail::header("eval", hash);
    out.summary["status"] = out.status;
    out.summary["value_at_zero"] = slice.at_zero();
    out.summary["generator"] = detail::generator_json(gen);
    out.summary["grid"] = Json{{"T", setup.horizon}, {"N", setup.time.steps()}, {"M", setup.space.size()},
                               {"x_max", setup.space.x_max()}};
    detail::emit(out, dir, "eval_slice.csv", csv.text());
    detail::emit(out, dir, "eval.json", json_text(out.summary));
    log << "value at x=0: " << format_number(slice.at_zero()) << "\n";
    return out;
}

/// Scenario-side sup against the PDE value, plus constant-scenario argmaxes.
inline CommandResult cmd_repr(const Config& cfg, const std::string& hash, const std::filesystem::path& dir,
                              std::ostream& log) {
    const auto gen = detail::build_generator(cfg);
    const auto payoff = detail::build_payoff(cfg);
    const auto setup = detail::build_pde_grid(cfg, gen, payoff);
    const auto opt = detail::build_optimizer(cfg);
    const auto mc = detail::build_monte_carlo(cfg);
    const TimeGrid scn_grid(setup.horizon, detail::at_least(cfg, "run.steps", 4, 1));
    const std::vector<double> etas = cfg.has("run.eta") ? cfg.numbers("run.eta") : std::vector<double>{};
    const double resolution = cfg.has("run.resolution") ? detail::positive(cfg, "run.resolution") : 1e-3;
    if (!etas.empty() && !gen.is_differentiable())
        throw ConfigError(cfg.line_of("run.eta"), "run.eta", "needs a strictly convex penalty");
    cfg.finish(schema());

    const double pde_value = pde::solve_generator_pde(gen, payoff, setup.horizon, setup.space, setup.time).at_zero();
    const auto eval = scenario::robust_expectation(
        [&payoff](const scenario::PathView& path) { return payoff(path.terminal()); }, gen, scn_grid, opt, mc);
    const double gap = std::abs(eval.value - pde_value);

    CsvTable table({"scenario_value", "scenario_stderr", "pde_value", "gap"});
    table.row({eval.value, eval.std_error, pde_value, gap});
    CsvTable scn({"t", "gamma"});
    for (std::size_t k = 0; k < eval.gamma.size(); ++k) scn.row({scn_grid.time(k), eval.gamma[k]});
    CsvTable pr11({"eta", "argmax"});
    Json pr11_json = Json::array();
    for (double eta : etas) {
        const double g = scenario::pr11_argmax(eta, gen, setup.horizon, resolution);
        pr11.row({eta, g});
        pr11_json.push_back(Json{{"eta", eta}, {"argmax", g}});
    }

    CommandResult out;
    out.summary = detail::header("repr", hash);
    out.summary["status"] = out.status;
    out.summary["scenario_value"] = eval.value;
    out.summary["scenario_stderr"] = eval.std_error;
    out.summary["pde_value"] = pde_value;
    out.summary["gap"] = gap;
    out.summary["argmax_gamma"] = eval.gamma;
    out.summary["n_paths"] = mc.n_paths;
    out.summary["seed"] = mc.seed;
    out.summary["evaluations"] = eval.evaluations;
    out.summary["pr11"] = pr11_json;
    out.summary["generator"] = detail::generator_json(gen);
    detail::emit(out, dir, "repr_table.csv", table.text());
    detail::emit(out, dir, "repr_scenario.csv", scn.text());
    if (!etas.empty()) detail::emit(out, dir, "repr_pr11.csv", pr11.text());
    detail::emit(out, dir, "repr.json", json_text(out.summary));
    log << "scenario " << format_number(eval.value) << " +- " << format_number(eval.std_error) << ", pde "
        << format_number(pde_value) << ", gap " << format_number(gap) << "\n";
    return out;
}

/// Riccati / offset / gamma solution and feedback gains on the fine grid.
inline CommandResult cmd_lq(const Config& cfg, const std::string& hash, const std::filesystem::path& dir,
                            std::ostream& log) {
    const auto prob = detail::build_lq(cfg);
    cfg.finish(schema());

    CommandResult out;
    out.summary = detail::header("lq", hash);
    lq::LQSolution sol;
    try {
        sol = lq::solve_gamma(prob);
    } catch (const lq::Condition39Error& e) {
        out.status = "incompatible-condition-39";
        out.summary["status"] = out.status;
        out.summary["obstruction"] = detail::obstruction_json(e.report());
        detail::emit(out, dir, "lq.json", json_text(out.summary));
        log << "status " << out.status << ", residual " << format_number(e.report().residual_sup) << "\n";
        return out;
    }

    const std::size_t n = prob.n, m = prob.m;
    std::vector<std::string> cols{"t"};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cols.push_back("P_" + std::to_string(i) + "_" + std::to_string(j));
    for (std::size_t i = 0; i < n; ++i) cols.push_back("phi_" + std::to_string(i));
    cols.push_back("l");
    cols.push_back("gamma");
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < n; ++j) cols.push_back("K_" + std::to_string(r) + "_" + std::to_string(j));
    for (std::size_t r = 0; r < m; ++r) cols.push_back("k_" + std::to_string(r));
    CsvTable csv(cols);
    const std::size_t steps = sol.fine.steps();
    for (std::size_t j = 0; j <= steps; ++j) {
        std::vector<double> row{sol.fine.time(j)};
        const auto& P = sol.P(j);
        for (Eigen::Index a = 0; a < P.rows(); ++a)
            for (Eigen::Index b = 0; b < P.cols(); ++b) row.push_back(P(a, b));
        for (Eigen::Index a = 0; a < sol.phi(j).size(); ++a) row.push_back(sol.phi(j)(a));
        row.push_back(sol.l[j]);
        row.push_back(sol.gamma[std::min(j / prob.substeps, sol.gamma.size() - 1)]);
        for (Eigen::Index r = 0; r < sol.K[j].rows(); ++r)
            for (Eigen::Index b = 0; b < sol.K[j].cols(); ++b) row.push_back(sol.K[j](r, b));
        for (Eigen::Index r = 0; r < sol.k[j].size(); ++r) row.push_back(sol.k[j](r));
        csv.row(row);
    }

    out.summary["status"] = out.status;
    out.summary["J_analytic"] = sol.J_analytic;
    out.summary["residual39"] = sol.condition39.sup;
    out.summary["condition39_tolerance"] = sol.condition39.tolerance;
    out.summary["method"] = lq::to_string(sol.method);
    out.summary["iterations"] = sol.iterations;
    out.summary["start_gap"] = sol.start_gap;
    out.summary["fixed_point_residual"] = sol.fixed_point_residual;
    out.summary["gamma"] = sol.gamma;
    out.summary["generator"] = detail::generator_json(prob.gen);
    detail::emit(out, dir, "lq_solution.csv", csv.text());
    detail::emit(out, dir, "lq.json", json_text(out.summary));
    log << "J_analytic " << format_number(sol.J_analytic) << " (" << lq::to_string(sol.method) << ")\n";
    return out;
}

/// Maximum-principle residuals, sufficiency flags and variational slopes.
inline CommandResult cmd_mp(const Config& cfg, const std::string& hash, const std::filesystem::path& dir,
                            std::ostream& log) {
    const auto prob = detail::build_lq(cfg);
    const std::string domain_kind = cfg.word("mp.domain", "all");
    mp::ControlDomain domain;
    if (domain_kind == "box") {
        const auto lo = cfg.numbers("mp.lo"), hi = cfg.numbers("mp.hi");
        if (lo.size() != prob.m) throw ConfigError(cfg.line_of("mp.lo"), "mp.lo", "needs one bound per control");
        if (hi.size() != prob.m) throw ConfigError(cfg.line_of("mp.hi"), "mp.hi", "needs one bound per control");
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(lo[i] <= hi[i])) throw ConfigError(cfg.line_of("mp.hi"), "mp.hi", "needs lo <= hi");
        domain = mp::ControlDomain::box(lo, hi);
    } else if (domain_kind != "all") {
        throw ConfigError(cfg.line_of("mp.domain"), "mp.domain", "expected all or box, got '" + domain_kind + "'");
    }
    const double sabotage = cfg.number("mp.sabotage", 0.0);
    const std::size_t paths = detail::at_least(cfg, "mp.paths", 2000, 1);
    const double tolerance = cfg.number("mp.tolerance", 1e-5);
    const std::vector<double> eps =
        cfg.has("mp.eps") ? cfg.numbers("mp.eps") : std::vector<double>{0.1, 0.03, 0.01};
    for (double e : eps)
        if (!(e > 0.0)) throw ConfigError(cfg.line_of("mp.eps"), "mp.eps", "entries must be > 0");
    const std::vector<double> shifts = cfg.has("mp.shifts") ? cfg.numbers("mp.shifts") : std::vector<double>{};
    const auto opt = detail::build_optimizer(cfg);
    const auto mc = detail::build_monte_carlo(cfg);
    cfg.finish(schema());

    CommandResult out;
    out.summary = detail::header("mp", hash);
    lq::LQSolution sol;
    try {
        sol = lq::solve_gamma(prob);
    } catch (const lq::Condition39Error& e) {
        out.status = "incompatible-condition-39";
        out.summary["status"] = out.status;
        out.summary["obstruction"] = detail::obstruction_json(e.report());
        detail::emit(out, dir, "mp.json", json_text(out.summary));
        log << "status " << out.status << "\n";
        return out;
    }

    const auto res = mp::mp_residual(sol, domain, paths, mc.seed, sabotage);
    const auto flags = mp::sufficiency_check(prob);

    CsvTable csv({"shift", "eps", "slope", "expected", "gap", "stderr", "paired_slope"});
    Json slopes = Json::array();
    const auto star = std::make_shared<const lq::Feedback>(lq::synthesize_control(sol));
    for (double shift : shifts) {
        auto direction = [star, shift](double t, std::span<const double> x, std::span<double> v) {
            (*star)(t, x, v);
            for (double& vi : v) vi += shift;
        };
        const auto rep = mp::variational_slope(sol, direction, eps, opt, mc);
        Json rows = Json::array();
        for (const auto& r : rep.rows) {
            csv.row({shift, r.eps, r.slope, r.expected, r.gap, r.std_error, r.paired_slope});
            rows.push_back(Json{{"eps", r.eps},
                                {"slope", r.slope},
                                {"gap", r.gap},
                                {"stderr", r.std_error},
                                {"paired_slope", r.paired_slope}});
        }
        slopes.push_back(Json{{"shift", shift},
                              {"J_star", rep.J_star},
                              {"J_star_stderr", rep.J_star_std_error},
                              {"expected", rep.expected},
                              {"expected_stderr", rep.expected_std_error},
                              {"near_optimal_starts", rep.near_optimal_starts},
                              {"gamma_star", rep.gamma_star},
                              {"rows", rows}});
    }

    const bool within = res.residual_unconstrained <= tolerance * res.scale;
    out.summary["status"] = out.status;
    out.summary["J_analytic"] = sol.J_analytic;
    out.summary["residual"] = Json{{"domain", domain_kind},
                                   {"unconstrained", res.residual_unconstrained},
                                   {"constrained", res.residual_constrained},
                                   {"scale", res.scale},
                                   {"tolerance", tolerance},
                                   {"within_tolerance", within},
                                   {"sabotage", sabotage},
                                   {"n_paths", res.n_paths},
                                   {"seed", res.seed}};
    out.summary["sufficiency"] = Json{{"terminal_convex", flags.terminal_convex},
                                      {"control_coercive", flags.control_coercive},
                                      {"jointly_convex", flags.jointly_convex},
                                      {"all", flags.all()},
                                      {"min_eig_L", flags.min_eig_L},
                                      {"min_eig_R", flags.min_eig_R},
                                      {"min_eig_block", flags.min_eig_block}};
    out.summary["slopes"] = slopes;
    if (!shifts.empty()) detail::emit(out, dir, "mp_slopes.csv", csv.text());
    detail::emit(out, dir, "mp.json", json_text(out.summary));
    log << "residual " << format_number(res.residual_unconstrained) << " (scale " << format_number(res.scale)
        << "), sufficiency " << (flags.all() ? "pass" : "fail") << "\n";
    return out;
}

inline const std::map<std::string, std::function<CommandResult(const Config&, const std::string&,
                                                                const std::filesystem::path&, std::ostream&)>>&
commands() {
    static const std::map<std::string, std::function<CommandResult(const Config&, const std::string&,
                                                                   const std::filesystem::path&, std::ostream&)>>
        table = {{"eval", cmd_eval}, {"repr", cmd_repr}, {"lq", cmd_lq}, {"mp", cmd_mp}};
    return table;
}

/// Parses `config_text`, runs `command` and maps failures onto exit codes:
/// config problems are 2, library or numerical failures 3.
inline CommandResult run_command(const std::string& command, const std::string& config_text,
                                 const std::filesystem::path& out_dir, std::ostream& log, std::ostream& err) {
    CommandResult fail;
    const auto it = commands().find(command);
    if (it == commands().end()) {
        err << "error: unknown command '" << command << "'\n";
        fail.exit_code = kConfigError;
        fail.status = "config-error";
        return fail;
    }
    try {
        const Config cfg = Config::parse(config_text);
        std::filesystem::create_directories(out_dir);
        return it->second(cfg, config_hash(config_text), out_dir, log);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        fail.exit_code = kConfigError;
        fail.status = "config-error";
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        fail.exit_code = kNumericalFailure;
        fail.status = std::string(to_string(e.code()));
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        fail.exit_code = kNumericalFailure;
        fail.status = "failure";
    }
    return fail;
}

}  // namespace gexp::cli
