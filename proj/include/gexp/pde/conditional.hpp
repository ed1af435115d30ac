#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "gexp/gcore/error.hpp"
#include "gexp/gcore/generator.hpp"
#include "gexp/gcore/time_grid.hpp"
#include "gexp/pde/payoff.hpp"
#include "gexp/pde/solver.hpp"
#include "gexp/pde/spatial_grid.hpp"

namespace gexp::pde {

/// psi(x_1, ..., x_j) tabulated on grid nodes in row-major order
/// (x_j fastest). arity 0 is a scalar.
struct ConditionalTable {
    SpatialGrid grid;
    std::size_t arity;
    std::vector<double> values;

    double scalar() const {
        require(arity == 0, ErrorCode::InvalidArgument, "table is not a scalar");
        return values.front();
    }
    /// Value at the grid-node multi-index.
    double at(std::span<const std::size_t> index) const {
        require(index.size() == arity, ErrorCode::DimensionMismatch, "index arity mismatch");
        std::size_t flat = 0;
        for (std::size_t i : index) flat = flat * grid.size() + i;
        return values[flat];
    }
};

/// E~_t[phi] for a cylinder payoff of the increments between observation
/// times. Nested backward sweeps, one per increment after t; each sweep runs
/// the PDE along the last tabulated axis for every fixed prefix and keeps the
/// value at x = 0.
inline ConditionalTable conditional_expectation(const ConvexGenerator& gen, const MultiTimePayoff& payoff, double t,
                                                const SpatialGrid& sgrid, const TimeGrid& tgrid) {
    const auto& times = payoff.times();
    std::vector<std::size_t> nodes;
    for (double s : times) {
        const auto node = tgrid.node_of(s);
        require(node.has_value(), ErrorCode::ObservationTimeMismatch,
                "observation time " + std::to_string(s) + " is not a node of the time grid");
        nodes.push_back(*node);
    }
    std::size_t keep = 0;  // number of increments observed by time t
    if (t != 0.0) {
        bool found = false;
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (std::abs(times[i] - t) <= 1e-12 * std::max(1.0, std::abs(t))) {
                keep = i + 1;
                found = true;
            }
        }
        require(found, ErrorCode::ObservationTimeMismatch,
                "conditioning time must be 0 or an observation time");
    }

    const std::size_t m = sgrid.size();
    const std::size_t k = payoff.arity();
    std::size_t total = 1;
    for (std::size_t i = 0; i < k; ++i) total *= m;

    std::vector<double> table(total);
    std::vector<double> point(k);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rest = flat;
        for (std::size_t axis = k; axis-- > 0;) {
            point[axis] = sgrid.node(rest % m);
            rest /= m;
        }
        table[flat] = payoff(point);
        require(std::isfinite(table[flat]), ErrorCode::NonFiniteValue, "payoff is not finite on the grid");
    }

    for (std::size_t level = k; level > keep; --level) {
        const std::size_t span = nodes[level - 1] - (level >= 2 ? nodes[level - 2] : 0);
        evolve_rows(gen, table, sgrid, tgrid, span);
        std::vector<double> reduced(table.size() / m);
        for (std::size_t r = 0; r < reduced.size(); ++r) reduced[r] = table[r * m + sgrid.center()];
        table = std::move(reduced);
    }
    return {sgrid, keep, std::move(table)};
}

/// E~[psi(B_t)] for a one-variable table produced at time t.
inline double expectation_of_table(const ConvexGenerator& gen, const ConditionalTable& table, double t,
                                   const TimeGrid& tgrid) {
    require(table.arity == 1, ErrorCode::InvalidArgument, "expected a one-variable conditional table");
    return solve_from_values(gen, table.values, t, table.grid, tgrid).at_zero();
}

}  // namespace gexp::pde
