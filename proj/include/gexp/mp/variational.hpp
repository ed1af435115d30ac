#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "gexp/gcore/error.hpp"
#include "gexp/lq/simulation.hpp"
#include "gexp/lq/solution.hpp"
#include "gexp/scenario/robust.hpp"

namespace gexp::mp {

struct SlopeRow {
    double eps = 0.0;
    double slope = 0.0;         // (J(u^eps) - J(u*)) / eps, both sups over scenarios
    double expected = 0.0;      // E_{P*}[L^u]
    double gap = 0.0;           // |slope - expected|
    double std_error = 0.0;     // combined: paired slope samples under P* and L^u samples
    double paired_slope = 0.0;  // E_{P*}[xi^eps - xi*] / eps, same paths
};

struct VariationalReport {
    double J_star = 0.0;
    double J_star_std_error = 0.0;
    std::vector<double> gamma_star;  // argmax scenario of the cost at u*
    std::size_t near_optimal_starts = 0;
    double expected = 0.0;
    double expected_std_error = 0.0;
    std::vector<SlopeRow> rows;
};

namespace detail {

/// State (X*, X^e) driven by controls (u*(X*), u* + eps (u - u*)) with u and
/// u* both read off X*, so u^eps is one fixed process for every eps.
template <class Direction>
auto perturbed_pair(const LQSolution& sol, Direction direction, double eps) {
    const auto& prob = sol.problem;
    const std::size_t n = prob.n, m = prob.m;
    auto flat = std::make_shared<const lq::FlatCoefficients>(prob);
    auto star = std::make_shared<const lq::Feedback>(lq::synthesize_control(sol));
    auto control = [star, direction, eps, n, m](double t, std::span<const double> z, std::span<double> w) {
        const auto xs = z.first(n);
        (*star)(t, xs, w.first(m));
        direction(t, xs, w.subspan(m, m));
        for (std::size_t i = 0; i < m; ++i) w[m + i] = w[i] + eps * (w[m + i] - w[i]);
    };
    auto drift = [flat, n, m](double t, std::span<const double> z, std::span<const double> w, std::span<double> out) {
        const auto k = flat->interval(t);
        flat->affine(flat->A, flat->B, flat->b, k, z.first(n), w.first(m), out.first(n));
        flat->affine(flat->A, flat->B, flat->b, k, z.subspan(n, n), w.subspan(m, m), out.subspan(n, n));
    };
    auto vol = [flat, n, m](double t, std::span<const double> z, std::span<const double> w, std::span<double> out) {
        const auto k = flat->interval(t);
        flat->affine(flat->C, flat->D, flat->sigma, k, z.first(n), w.first(m), out.first(n));
        flat->affine(flat->C, flat->D, flat->sigma, k, z.subspan(n, n), w.subspan(m, m), out.subspan(n, n));
    };
    auto qv = [](double, std::span<const double>, std::span<const double>, std::span<double> out) {
        for (double& o : out) o = 0.0;
    };
    std::vector<double> z0(2 * n);
    for (std::size_t i = 0; i < n; ++i) z0[i] = z0[n + i] = prob.x0(static_cast<Eigen::Index>(i));
    return scenario::make_controlled_sde(2 * n, 2 * m, std::move(z0), drift, qv, vol, control);
}

/// Cost of the second half of the pair; with `paired`, minus the first half.
inline auto pair_driver(const LQSolution& sol, bool paired) {
    const std::size_t n = sol.problem.n, m = sol.problem.m;
    auto flat = std::make_shared<const lq::FlatCoefficients>(sol.problem);
    const double w = paired ? 1.0 : 0.0;
    return scenario::make_linear_driver(
        [flat](double t) { return flat->E[flat->interval(t)]; },
        [flat, n, m, w](double t, std::span<const double> z, std::span<const double> v) {
            const auto k = flat->interval(t);
            return flat->running(k, z.subspan(n, n), v.subspan(m, m)) - w * flat->running(k, z.first(n), v.first(m));
        },
        [](double, std::span<const double>, std::span<const double>) { return 0.0; },
        [flat, n, w](std::span<const double> z) { return flat->terminal(z.subspan(n, n)) - w * flat->terminal(z.first(n)); });
}

/// State (X*, X^) with d = u(X*) - u*(X*); X^ is the variational process.
template <class Direction>
auto variational_system(const LQSolution& sol, Direction direction) {
    const auto& prob = sol.problem;
    const std::size_t n = prob.n, m = prob.m;
    auto flat = std::make_shared<const lq::FlatCoefficients>(prob);
    auto star = std::make_shared<const lq::Feedback>(lq::synthesize_control(sol));
    auto control = [star, direction, n, m](double t, std::span<const double> z, std::span<double> w) {
        const auto xs = z.first(n);
        (*star)(t, xs, w.first(m));
        direction(t, xs, w.subspan(m, m));
        for (std::size_t i = 0; i < m; ++i) w[m + i] -= w[i];
    };
    auto drift = [flat, n, m](double t, std::span<const double> z, std::span<const double> w, std::span<double> out) {
        const auto k = flat->interval(t);
        flat->affine(flat->A, flat->B, flat->b, k, z.first(n), w.first(m), out.first(n));
        // linearized: no inhomogeneous term
        const double* A = flat->A.data() + k * n * n;
        const double* B = flat->B.data() + k * n * m;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += A[i * n + j] * z[n + j];
            for (std::size_t j = 0; j < m; ++j) s += B[i * m + j] * w[m + j];
            out[n + i] = s;
        }
    };
    auto vol = [flat, n, m](double t, std::span<const double> z, std::span<const double> w, std::span<double> out) {
        const auto k = flat->interval(t);
        flat->affine(flat->C, flat->D, flat->sigma, k, z.first(n), w.first(m), out.first(n));
        const double* C = flat->C.data() + k * n * n;
        const double* D = flat->D.data() + k * n * m;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += C[i * n + j] * z[n + j];
            for (std::size_t j = 0; j < m; ++j) s += D[i * m + j] * w[m + j];
            out[n + i] = s;
        }
    };
    auto qv = [](double, std::span<const double>, std::span<const double>, std::span<double> out) {
        for (double& o : out) o = 0.0;
    };
    std::vector<double> z0(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) z0[i] = prob.x0(static_cast<Eigen::Index>(i));
    auto sde = scenario::make_controlled_sde(2 * n, 2 * m, std::move(z0), drift, qv, vol, control);

    // L^u = Lambda_T Phi_x X^_T + int (f_x X^ + f_v d) Lambda ds with
    // f_x = x'Q + u*'S and f_v = x'S' + u*'R.
    auto driver = scenario::make_linear_driver(
        [flat](double t) { return flat->E[flat->interval(t)]; },
        [flat, n, m](double t, std::span<const double> z, std::span<const double> w) {
            const auto k = flat->interval(t);
            const double* Q = flat->Q.data() + k * n * n;
            const double* S = flat->S.data() + k * m * n;
            const double* R = flat->R.data() + k * m * m;
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double fx = 0.0;
                for (std::size_t j = 0; j < n; ++j) fx += z[j] * Q[j * n + i];
                for (std::size_t r = 0; r < m; ++r) fx += w[r] * S[r * n + i];
                s += fx * z[n + i];
            }
            for (std::size_t r = 0; r < m; ++r) {
                double fv = 0.0;
                for (std::size_t j = 0; j < n; ++j) fv += S[r * n + j] * z[j];
                for (std::size_t j = 0; j < m; ++j) fv += R[r * m + j] * w[j];
                s += fv * w[m + r];
            }
            return s;
        },
        [](double, std::span<const double>, std::span<const double>) { return 0.0; },
        [flat, n](std::span<const double> z) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) s += z[i] * flat->L[i * n + j] * z[n + j];
            return s;
        });
    return std::pair{std::move(sde), std::move(driver)};
}

}  // namespace detail

/// Finite-difference slopes of the robust cost along u* + eps (u - u*)
/// against E_{P*}[L^u], with P* the argmax scenario of the cost at u*.
/// `direction` evaluates the alternative control u(t, x) along X*.
/// Nothing is asserted here; callers compare the gaps with their own slack.
template <class Direction>
VariationalReport variational_slope(const LQSolution& sol, Direction direction, const std::vector<double>& eps_list,
                                    const scenario::OptimizerConfig& opt, const scenario::MonteCarloConfig& mc) {
    for (double e : eps_list) require(e > 0.0, ErrorCode::InvalidArgument, "eps must be positive");
    const auto& prob = sol.problem;
    const auto cost_driver = detail::pair_driver(sol, false);
    scenario::MonteCarloConfig sim = mc;
    sim.substeps = prob.substeps;

    VariationalReport out;
    const auto star_sde = detail::perturbed_pair(sol, direction, 0.0);
    const auto star = scenario::eval_cost_functional(cost_driver, star_sde, prob.gen, prob.grid, opt, sim);
    out.J_star = star.value;
    out.J_star_std_error = star.std_error;
    out.gamma_star = star.gamma;
    for (double v : star.start_values)
        if (v >= star.value - 3.0 * star.std_error) ++out.near_optimal_starts;

    const auto scn = star.argmax();
    const auto flat_gen = prob.gen.dominating();  // zero penalty: plain E_{P*}
    const auto [var_sde, var_driver] = detail::variational_system(sol, direction);
    const auto lu = scenario::scenario_cost(var_driver, var_sde, flat_gen, scn, sim);
    out.expected = lu.mean;
    out.expected_std_error = lu.std_error;

    const auto paired_driver = detail::pair_driver(sol, true);
    for (double eps : eps_list) {
        const auto sde = detail::perturbed_pair(sol, direction, eps);
        const auto j = scenario::eval_cost_functional(cost_driver, sde, prob.gen, prob.grid, opt, sim);
        const auto diff = scenario::scenario_cost(paired_driver, sde, flat_gen, scn, sim);
        SlopeRow row;
        row.eps = eps;
        row.slope = (j.value - out.J_star) / eps;
        row.expected = out.expected;
        row.gap = std::abs(row.slope - row.expected);
        row.paired_slope = diff.mean / eps;
        row.std_error = std::hypot(diff.std_error / eps, out.expected_std_error);
        out.rows.push_back(row);
    }
    return out;
}

}  // namespace gexp::mp
