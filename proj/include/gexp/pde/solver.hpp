#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <cstddef>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "gexp/gcore/error.hpp"
#include "gexp/gcore/generator.hpp"
#include "gexp/gcore/time_grid.hpp"
#include "gexp/pde/payoff.hpp"
#include "gexp/pde/spatial_grid.hpp"
#include "gexp/support/parallel.hpp"

namespace gexp::pde {

/// u(s, x_j) for all nodes of a spatial grid.
struct ValueFunctionSlice {
    SpatialGrid grid;
    double time;
    std::vector<double> values;

    double at_zero() const { return values[grid.center()]; }
    double at(double x) const { return grid.interpolate(values, x); }
};

namespace detail {

/// Calls fn with a cheap functor a -> G~(a) specialised on the penalty kind,
/// so the inner loop avoids a variant dispatch per node.
template <class Fn>
decltype(auto) with_gtilde(const ConvexGenerator& gen, Fn&& fn) {
    const double lo = gen.theta().c_lo;
    const double hi = gen.theta().c_hi;
    if (std::holds_alternative<ZeroPenalty>(gen.penalty()) || gen.is_sublinear()) {
        return fn([lo, hi](double a) { return a >= 0.0 ? 0.5 * hi * a : 0.5 * lo * a; });
    }
    if (const auto* q = std::get_if<QuadraticPenalty>(&gen.penalty())) {
        const double kappa = q->kappa;
        const double anchor = q->anchor;
        return fn([=](double a) {
            if (a == 0.0) return 0.0;
            double c = anchor + a / (4.0 * kappa);
            c = c < lo ? lo : (c > hi ? hi : c);
            const double d = c - anchor;
            return 0.5 * c * a - kappa * d * d;
        });
    }
    return fn([&gen](double a) { return gtilde_eval(gen, a); });
}

/// Number of explicit sub-steps per grid step so that dt_sub <= h^2 / (2 c_hi).
inline std::size_t cfl_substeps(double grid_dt, double spacing, double c_hi) {
    const double limit = spacing * spacing / (2.0 * c_hi);
    return static_cast<std::size_t>(std::ceil(grid_dt / limit - 1e-12));
}

/// Explicit monotone sweep of u_t = G~(u_xx) on one row, `steps` steps of size dt.
/// Boundary nodes see zero curvature (linear continuation) and stay fixed.
template <class GTilde>
void sweep_row(std::span<double> u, std::vector<double>& scratch, double dt, double spacing, std::size_t steps,
               const GTilde& gtilde) {
    const std::size_t m = u.size();
    const double inv_h2 = 1.0 / (spacing * spacing);
    scratch.resize(m);
    for (std::size_t s = 0; s < steps; ++s) {
        scratch[0] = u[0];
        scratch[m - 1] = u[m - 1];
        for (std::size_t j = 1; j + 1 < m; ++j) {
            const double curvature = (u[j + 1] - 2.0 * u[j] + u[j - 1]) * inv_h2;
            scratch[j] = u[j] + dt * gtilde(curvature);
        }
        std::copy(scratch.begin(), scratch.end(), u.begin());
    }
}

}  // namespace detail

/// Evolves `rows` independent nodal vectors (row-major, each grid.size() long)
/// forward in time-to-maturity by `grid_steps` steps of the time grid.
inline void evolve_rows(const ConvexGenerator& gen, std::vector<double>& rows, const SpatialGrid& grid,
                        const TimeGrid& tgrid, std::size_t grid_steps) {
    const std::size_t m = grid.size();
    require(rows.size() % m == 0, ErrorCode::DimensionMismatch, "row storage is not a multiple of the grid size");
    if (grid_steps == 0) return;
    const std::size_t sub = detail::cfl_substeps(tgrid.dt(), grid.spacing(), gen.theta().c_hi);
    const std::size_t steps = grid_steps * sub;
    const double dt = tgrid.dt() / static_cast<double>(sub);
    const std::size_t n_rows = rows.size() / m;
    detail::with_gtilde(gen, [&](const auto& gtilde) {
        for_each_chunk(
            n_rows,
            [&](std::size_t, std::size_t begin, std::size_t end) {
                std::vector<double> scratch;
                for (std::size_t r = begin; r < end; ++r)
                    detail::sweep_row(std::span<double>(rows).subspan(r * m, m), scratch, dt, grid.spacing(), steps,
                                      gtilde);
            },
            8);
    });
}

inline std::vector<double> sample_payoff(const MarkovPayoff& payoff, const SpatialGrid& grid) {
    std::vector<double> values(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        values[j] = payoff(grid.node(j));
        require(std::isfinite(values[j]), ErrorCode::NonFiniteValue,
                "payoff is not finite at x = " + std::to_string(grid.node(j)));
    }
    return values;
}

/// Backward solve of u_t - G~(u_xx) = 0, u(0, .) = initial, over [0, horizon];
/// `horizon` must be a node of the time grid.
inline ValueFunctionSlice solve_from_values(const ConvexGenerator& gen, std::vector<double> initial, double horizon,
                                            const SpatialGrid& sgrid, const TimeGrid& tgrid) {
    require(initial.size() == sgrid.size(), ErrorCode::DimensionMismatch, "initial data does not match the grid");
    for (double v : initial) require(std::isfinite(v), ErrorCode::NonFiniteValue, "initial data is not finite");
    const auto node = tgrid.node_of(horizon);
    require(node.has_value(), ErrorCode::InvalidArgument, "PDE horizon must be a node of the time grid");
    evolve_rows(gen, initial, sgrid, tgrid, *node);
    return {sgrid, horizon, std::move(initial)};
}

/// Value function at time-to-maturity T; the node x = 0 holds E~[phi(B_T)].
inline ValueFunctionSlice solve_generator_pde(const ConvexGenerator& gen, const MarkovPayoff& payoff, double horizon,
                                              const SpatialGrid& sgrid, const TimeGrid& tgrid) {
    return solve_from_values(gen, sample_payoff(payoff, sgrid), horizon, sgrid, tgrid);
}

struct DominationCheck {
    double max_residual = 0.0;
    std::vector<double> residuals;  // E~[X1] - E~[X2] - E^[X1 - X2] per pair
};

/// Domination of the convex expectation by its sublinear envelope, pair by pair.
inline DominationCheck check_domination(const ConvexGenerator& gen,
                                        std::span<const std::pair<MarkovPayoff, MarkovPayoff>> pairs,
                                        double horizon, const SpatialGrid& sgrid, const TimeGrid& tgrid) {
    const auto envelope = gen.dominating();
    DominationCheck out;
    out.max_residual = -std::numeric_limits<double>::infinity();
    for (const auto& [x1, x2] : pairs) {
        const double e1 = solve_generator_pde(gen, x1, horizon, sgrid, tgrid).at_zero();
        const double e2 = solve_generator_pde(gen, x2, horizon, sgrid, tgrid).at_zero();
        const double bound = solve_generator_pde(envelope, x1 - x2, horizon, sgrid, tgrid).at_zero();
        out.residuals.push_back(e1 - e2 - bound);
        out.max_residual = std::max(out.max_residual, out.residuals.back());
    }
    return out;
}

}  // namespace gexp::pde
