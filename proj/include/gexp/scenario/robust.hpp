#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "gexp/gcore/error.hpp"
#include "gexp/gcore/generator.hpp"
#include "gexp/gcore/scenario_measure.hpp"
#include "gexp/scenario/controlled_sde.hpp"
#include "gexp/scenario/ensemble.hpp"
#include "gexp/scenario/optimizer.hpp"

namespace gexp::scenario {

struct MonteCarloConfig {
    std::size_t n_paths = 100000;
    std::uint64_t seed = 1;
    std::size_t substeps = 1;  // simulation steps per scenario step
};

/// Result of a penalized sup over deterministic scenarios. `gamma` is the
/// numerical argmax scenario; for non-Markov payoffs `value` is a lower bound.
struct CostEvaluation {
    double value = 0.0;
    double std_error = 0.0;
    std::vector<double> gamma;
    TimeGrid grid{1.0, 1};
    std::uint64_t seed = 0;
    std::size_t n_paths = 0;
    std::vector<TraceEntry> trace;
    std::vector<double> start_values;   // every start's optimum, on all paths
    std::vector<std::vector<double>> start_optima;
    std::size_t evaluations = 0;
    bool stalled = false;

    DeterministicScenario argmax() const { return {grid, gamma}; }
};

namespace detail {

template <class MakeObjective>
CostEvaluation optimize_scenarios(MakeObjective&& make, const ConvexGenerator& gen, TimeGrid grid,
                                  const OptimizerConfig& config, const MonteCarloConfig& mc) {
    require(mc.n_paths >= 1, ErrorCode::InvalidArgument, "need at least one path");
    require(mc.substeps >= 1, ErrorCode::InvalidArgument, "substeps must be >= 1");
    const NormalDraws draws(mc.n_paths, grid.steps() * mc.substeps, mc.seed);
    auto full = make(draws);

    CostEvaluation out;
    out.grid = grid;
    out.seed = mc.seed;
    out.n_paths = mc.n_paths;

    OptimizerResult opt;
    if (config.pilot_paths > 0 && config.pilot_paths < mc.n_paths) {
        const NormalDraws pilot_draws = draws.head(config.pilot_paths);
        auto pilot = make(pilot_draws);
        opt = coordinate_ascent(pilot, gen, config);
        // re-score every start on all paths; the sup is taken over these
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < opt.start_optima.size(); ++s) {
            opt.start_values[s] = full.evaluate_fresh(opt.start_optima[s]).mean;
            if (opt.start_values[s] > best) {
                best = opt.start_values[s];
                opt.gamma = opt.start_optima[s];
                opt.value = best;
            }
        }
    } else {
        opt = coordinate_ascent(full, gen, config);
    }
    const Estimate est = full.evaluate_fresh(opt.gamma);
    out.value = est.mean;
    out.std_error = est.std_error;
    out.gamma = std::move(opt.gamma);
    out.trace = std::move(opt.trace);
    out.start_values = std::move(opt.start_values);
    out.start_optima = std::move(opt.start_optima);
    out.evaluations = opt.evaluations;
    out.stalled = opt.stalled;
    return out;
}

}  // namespace detail

/// sup over deterministic scenarios of E_{P_gamma}[payoff] - alpha(P_gamma);
/// payoff: double(const PathView&).
template <class Payoff>
CostEvaluation robust_expectation(const Payoff& payoff, const ConvexGenerator& gen, TimeGrid grid,
                                  const OptimizerConfig& config, const MonteCarloConfig& mc) {
    return detail::optimize_scenarios(
        [&](const NormalDraws& draws) { return PathFunctionalObjective<Payoff>(payoff, gen, grid, mc.substeps, draws); },
        gen, grid, config, mc);
}

/// J = sup over scenarios of the discounted per-scenario cost of a
/// controlled system with a driver linear in y.
template <class Sde, class Driver>
CostEvaluation eval_cost_functional(const Driver& driver, const Sde& sde, const ConvexGenerator& gen, TimeGrid grid,
                                    const OptimizerConfig& config, const MonteCarloConfig& mc) {
    return detail::optimize_scenarios(
        [&](const NormalDraws& draws) {
            return MarkovCostObjective<Sde, Driver>(sde, driver, gen, grid, mc.substeps, draws);
        },
        gen, grid, config, mc);
}

/// Penalized cost under one fixed scenario (no optimization).
template <class Sde, class Driver>
Estimate scenario_cost(const Driver& driver, const Sde& sde, const ConvexGenerator& gen,
                       const DeterministicScenario& scn, const MonteCarloConfig& mc) {
    const NormalDraws draws(mc.n_paths, scn.grid().steps() * mc.substeps, mc.seed);
    MarkovCostObjective<Sde, Driver> objective(sde, driver, gen, scn.grid(), mc.substeps, draws);
    return objective.evaluate_fresh(scn.gamma());
}

/// Constant-scenario argmax of E_{P_gamma}[xi] - alpha(P_gamma) for
/// xi = eta <B>_T - G~(2 eta) T. E_{P_gamma}[xi] = (eta gamma - G~(2 eta)) T
/// is deterministic, so this is a scan over a gamma grid of the given spacing.
inline double pr11_argmax(double eta, const ConvexGenerator& gen, double horizon, double resolution) {
    require(std::isfinite(eta), ErrorCode::InvalidArgument, "eta must be finite");
    require(gen.is_differentiable(), ErrorCode::InvalidArgument,
            "the volatility characterization needs a strictly convex penalty");
    require(resolution > 0.0, ErrorCode::InvalidArgument, "gamma grid spacing must be positive");
    const auto& th = gen.theta();
    const double offset = gtilde_eval(gen, 2.0 * eta) * horizon;
    const auto count = static_cast<std::size_t>(std::floor(th.width() / resolution + 1e-9));
    double best_gamma = th.c_lo;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i <= count + 1; ++i) {
        const double gamma = std::min(th.c_lo + static_cast<double>(i) * resolution, th.c_hi);
        const double value = eta * gamma * horizon - offset - gen.penalty_value(gamma) * horizon;
        if (value > best) {
            best = value;
            best_gamma = gamma;
        }
    }
    return best_gamma;
}

}  // namespace gexp::scenario
