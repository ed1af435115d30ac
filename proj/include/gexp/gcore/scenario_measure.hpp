#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "gexp/gcore/error.hpp"
#include "gexp/gcore/generator.hpp"
#include "gexp/gcore/time_grid.hpp"

namespace gexp {

/// Piecewise-constant variance path: d<B>_t = gamma_k dt on [t_k, t_{k+1}).
/// Stands in for the scenario measure under which B has independent
/// Gaussian increments of variance gamma_k dt.
class DeterministicScenario {
public:
    DeterministicScenario(TimeGrid grid, std::vector<double> gamma)
        : grid_(grid), gamma_(std::move(gamma)) {
        require(gamma_.size() == grid_.steps(), ErrorCode::DimensionMismatch,
                "scenario needs one variance rate per grid step");
        for (double g : gamma_)
            require(std::isfinite(g) && g > 0.0, ErrorCode::InvalidArgument,
                    "scenario variance rates must be finite and positive");
    }

    /// Scenario checked against a volatility interval.
    DeterministicScenario(TimeGrid grid, std::vector<double> gamma, const VolatilityInterval& theta)
        : DeterministicScenario(grid, std::move(gamma)) {
        for (double g : gamma_)
            require(theta.contains(g), ErrorCode::InvalidArgument,
                    "scenario variance rate outside the volatility interval");
    }

    static DeterministicScenario constant(TimeGrid grid, double gamma) {
        return {grid, std::vector<double>(grid.steps(), gamma)};
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    std::span<const double> gamma() const noexcept { return gamma_; }
    double gamma(std::size_t k) const { return gamma_.at(k); }

    /// <B>_T under the scenario.
    double bracket_total() const noexcept {
        double sum = 0.0;
        for (double g : gamma_) sum += g * grid_.dt();
        return sum;
    }

    /// Same path on a grid whose steps are split `factor` times.
    DeterministicScenario refined(std::size_t factor) const {
        std::vector<double> fine;
        fine.reserve(gamma_.size() * factor);
        for (double g : gamma_) fine.insert(fine.end(), factor, g);
        return {grid_.refined(factor), std::move(fine)};
    }

private:
    TimeGrid grid_;
    std::vector<double> gamma_;
};

/// alpha(P_gamma) = sum_k l(gamma_k) dt.
inline double penalty_cost(const DeterministicScenario& scn, const ConvexGenerator& gen) {
    double sum = 0.0;
    for (double g : scn.gamma()) sum += gen.penalty_value(g);
    return sum * scn.grid().dt();
}

/// Tail penalty sum_{k >= first} l(gamma_k) dt: the scenario analogue of the
/// conditional penalty on [t_first, T].
inline double penalty_cost_from(const DeterministicScenario& scn, const ConvexGenerator& gen, std::size_t first) {
    double sum = 0.0;
    for (std::size_t k = first; k < scn.gamma().size(); ++k) sum += gen.penalty_value(scn.gamma(k));
    return sum * scn.grid().dt();
}

}  // namespace gexp
