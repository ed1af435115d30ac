#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "gexp/gcore/error.hpp"
#include "gexp/gcore/generator.hpp"
#include "gexp/scenario/ensemble.hpp"

namespace gexp::scenario {

struct OptimizerConfig {
    std::size_t starts = 8;         // c_lo, c_hi, midpoint, penalty minimizer, then random
    std::size_t max_sweeps = 200;
    double tolerance = 1e-8;        // sweep improvement below this stops a start
    int line_search_bits = 20;      // Brent precision on each coordinate
    std::size_t pilot_paths = 0;    // 0: optimize on every path
    std::uint64_t seed = 0;         // random starts
};

struct TraceEntry {
    std::size_t start;
    std::size_t sweep;
    double value;
};

struct OptimizerResult {
    std::vector<double> gamma;
    double value = 0.0;
    std::vector<TraceEntry> trace;
    std::vector<std::vector<double>> start_optima;
    std::vector<double> start_values;
    std::size_t evaluations = 0;
    bool stalled = false;  // no start ever improved on its initial scenario
};

inline std::vector<std::vector<double>> initial_scenarios(const ConvexGenerator& gen, std::size_t blocks,
                                                          const OptimizerConfig& config) {
    const auto& th = gen.theta();
    std::vector<std::vector<double>> starts{std::vector<double>(blocks, th.c_lo), std::vector<double>(blocks, th.c_hi),
                                            std::vector<double>(blocks, 0.5 * (th.c_lo + th.c_hi)),
                                            std::vector<double>(blocks, penalty_minimizer(gen))};
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> uniform(th.c_lo, th.c_hi);
    while (starts.size() < config.starts) {
        std::vector<double> g(blocks);
        for (double& v : g) v = uniform(rng);
        starts.push_back(std::move(g));
    }
    starts.resize(std::max<std::size_t>(1, config.starts));
    return starts;
}

/// Multi-start coordinate ascent of objective.evaluate(gamma).mean over the
/// box Theta^blocks. Each coordinate is maximized by Brent's method plus
/// the two interval ends; the first strictly better candidate wins ties.
///
/// Objective needs blocks(), prepare(gamma, j), evaluate(gamma) -> Estimate
/// and evaluate_fresh(gamma) -> Estimate.
template <class Objective>
OptimizerResult coordinate_ascent(Objective& objective, const ConvexGenerator& gen, const OptimizerConfig& config) {
    const std::size_t blocks = objective.blocks();
    const auto& th = gen.theta();
    OptimizerResult out;
    bool any_move = false;
    double best = -std::numeric_limits<double>::infinity();

    const auto starts = initial_scenarios(gen, blocks, config);
    for (std::size_t s = 0; s < starts.size(); ++s) {
        std::vector<double> gamma = starts[s];
        double value = objective.evaluate_fresh(gamma).mean;
        ++out.evaluations;
        out.trace.push_back({s, 0, value});
        for (std::size_t sweep = 1; sweep <= config.max_sweeps; ++sweep) {
            const double sweep_start = value;
            for (std::size_t j = 0; j < blocks; ++j) {
                objective.prepare(gamma, j);
                std::vector<double> trial = gamma;
                auto at = [&](double c) {
                    trial[j] = c;
                    ++out.evaluations;
                    return objective.evaluate(trial).mean;
                };
                double best_c = gamma[j];
                double best_v = value;
                auto consider = [&](double c, double v) {
                    if (v > best_v) {
                        best_v = v;
                        best_c = c;
                    }
                };
                if (th.c_hi > th.c_lo) {
                    std::uintmax_t max_iter = 60;
                    const auto [c, neg] = boost::math::tools::brent_find_minima(
                        [&](double c) { return -at(c); }, th.c_lo, th.c_hi, config.line_search_bits, max_iter);
                    consider(c, -neg);
                    consider(th.c_lo, at(th.c_lo));
                    consider(th.c_hi, at(th.c_hi));
                }
                if (best_c != gamma[j]) {
                    gamma[j] = best_c;
                    value = best_v;
                    any_move = true;
                }
            }
            out.trace.push_back({s, sweep, value});
            if (value - sweep_start < config.tolerance) break;
        }
        out.start_optima.push_back(gamma);
        out.start_values.push_back(value);
        if (value > best) {
            best = value;
            out.gamma = gamma;
            out.value = value;
        }
    }
    out.stalled = !any_move;
    return out;
}

/// Indices of starts whose optimum lies within `tolerance` of the best value.
inline std::vector<std::size_t> near_optimal_starts(const OptimizerResult& result, double tolerance) {
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < result.start_values.size(); ++s)
        if (result.start_values[s] >= result.value - tolerance) out.push_back(s);
    return out;
}

}  // namespace gexp::scenario
