#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "gexp/gcore/error.hpp"
#include "gexp/lq/simulation.hpp"
#include "gexp/lq/solution.hpp"
#include "gexp/scenario/controlled_sde.hpp"
#include "gexp/scenario/ensemble.hpp"
#include "gexp/support/parallel.hpp"

namespace gexp::mp {

using lq::LQSolution;

/// p = P X + phi and q = P (C X + D u + sigma) per path and fine node; the
/// orthogonal martingale part is taken to be zero.
struct AdjointPath {
    std::size_t n_paths = 0, steps = 0, n = 0;
    std::vector<double> p, q;  // [path][node][dim]

    std::span<const double> p_at(std::size_t path, std::size_t node) const {
        return {p.data() + (path * (steps + 1) + node) * n, n};
    }
    std::span<const double> q_at(std::size_t path, std::size_t node) const {
        return {q.data() + (path * (steps + 1) + node) * n, n};
    }
};

namespace detail {

/// Row-major P and phi at every fine node.
struct FlatAdjoint {
    std::size_t n;
    std::vector<double> P, phi;

    explicit FlatAdjoint(const LQSolution& sol) : n(sol.problem.n) {
        for (std::size_t j = 0; j < sol.riccati.P.size(); ++j) {
            const auto& Pj = sol.riccati.P[j];
            for (Eigen::Index r = 0; r < Pj.rows(); ++r) {
                for (Eigen::Index c = 0; c < Pj.cols(); ++c) P.push_back(Pj(r, c));
                phi.push_back(sol.offset.phi[j](r));
            }
        }
    }

    void p(std::size_t node, std::span<const double> x, std::span<double> out) const {
        const double* Pn = P.data() + node * n * n;
        for (std::size_t i = 0; i < n; ++i) {
            double s = phi[node * n + i];
            for (std::size_t j = 0; j < n; ++j) s += Pn[i * n + j] * x[j];
            out[i] = s;
        }
    }

    /// out = P(node) w
    void apply(std::size_t node, std::span<const double> w, std::span<double> out) const {
        const double* Pn = P.data() + node * n * n;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += Pn[i * n + j] * w[j];
            out[i] = s;
        }
    }
};

inline void require_matching_grid(const LQSolution& sol, const scenario::StatePaths& paths) {
    require(paths.steps == sol.fine.steps() && paths.state_dim == sol.problem.n &&
                paths.control_dim == sol.problem.m,
            ErrorCode::DimensionMismatch, "state paths must live on the solution's fine grid");
}

}  // namespace detail

/// Adjoint pair along simulated optimal paths. Controls are taken from the
/// paths; at the terminal node, where none is stored, u*(T, X_T) is used.
inline AdjointPath adjoint_lq(const LQSolution& sol, const scenario::StatePaths& paths) {
    detail::require_matching_grid(sol, paths);
    const std::size_t n = sol.problem.n, m = sol.problem.m, steps = paths.steps;
    const detail::FlatAdjoint flat(sol);
    const lq::FlatCoefficients coef(sol.problem);
    const auto feedback = lq::synthesize_control(sol);
    AdjointPath out{paths.n_paths, steps, n, std::vector<double>(paths.states.size()),
                    std::vector<double>(paths.states.size())};
    for_each_chunk(paths.n_paths, [&](std::size_t, std::size_t begin, std::size_t end) {
        std::vector<double> w(n), u(m);
        for (std::size_t p = begin; p < end; ++p)
            for (std::size_t node = 0; node <= steps; ++node) {
                const auto x = paths.state(p, node);
                const double t = sol.fine.time(node);
                if (node < steps) {
                    const auto c = paths.control(p, node);
                    std::copy(c.begin(), c.end(), u.begin());
                } else {
                    feedback(t, x, std::span<double>(u));
                }
                const std::size_t off = (p * (steps + 1) + node) * n;
                flat.p(node, x, std::span<double>(out.p.data() + off, n));
                coef.affine(coef.C, coef.D, coef.sigma, std::min(node / sol.problem.substeps, coef.grid.steps() - 1),
                            x, u, std::span<double>(w));
                flat.apply(node, w, std::span<double>(out.q.data() + off, n));
            }
    });
    return out;
}

struct ControlDomain {
    enum class Kind { AllSpace, Box } kind = Kind::AllSpace;
    std::vector<double> lo, hi;

    static ControlDomain all_space() { return {}; }
    static ControlDomain box(std::vector<double> lo, std::vector<double> hi) {
        require(lo.size() == hi.size(), ErrorCode::DimensionMismatch, "box bounds differ in length");
        for (std::size_t i = 0; i < lo.size(); ++i)
            require(lo[i] <= hi[i], ErrorCode::InvalidArgument, "box needs lo <= hi");
        return {Kind::Box, std::move(lo), std::move(hi)};
    }
};

/// Maximum-principle residuals along paths simulated under the solution's scenario.
struct ResidualReport {
    double residual_unconstrained = 0.0;  // sup ||H_v||
    double residual_constrained = 0.0;    // Box only: sup max(0, -min_vertex H_v.(w - u))
    double scale = 1.0;                   // 1 + max ||X||^2
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
};

/// `shift` is added to every control component (a deliberately wrong
/// control for diagnostics); Box domains clip the candidate into the box.
inline ResidualReport mp_residual(const LQSolution& sol, const ControlDomain& domain, std::size_t n_paths,
                                  std::uint64_t seed, double shift = 0.0) {
    const auto& prob = sol.problem;
    const std::size_t n = prob.n, m = prob.m;
    const bool boxed = domain.kind == ControlDomain::Kind::Box;
    if (boxed) require(domain.lo.size() == m, ErrorCode::DimensionMismatch, "box bounds must have m entries");
    const auto feedback = lq::synthesize_control(sol);
    auto control = [&, boxed](double t, std::span<const double> x, std::span<double> v) {
        feedback(t, x, v);
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] += shift;
            if (boxed) v[i] = std::clamp(v[i], domain.lo[i], domain.hi[i]);
        }
    };
    const auto sde = lq::make_lq_sde(prob, control);
    const auto ens = scenario::realize(DeterministicScenario(prob.grid, sol.gamma),
                                       scenario::NormalDraws(n_paths, sol.fine.steps(), seed), prob.substeps);
    const auto paths = scenario::simulate_state(sde, ens);
    const auto adj = adjoint_lq(sol, paths);
    const lq::FlatCoefficients coef(prob);
    const std::size_t steps = paths.steps;

    const std::size_t chunks = chunk_count(n_paths);
    std::vector<double> unc(chunks, 0.0), con(chunks, 0.0), xmax(chunks, 0.0);
    for_each_chunk(n_paths, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        std::vector<double> hv(m);
        for (std::size_t p = begin; p < end; ++p)
            for (std::size_t node = 0; node <= steps; ++node) {
                const auto x = paths.state(p, node);
                double x2 = 0.0;
                for (double xi : x) x2 += xi * xi;
                xmax[chunk] = std::max(xmax[chunk], x2);
                if (node == steps) continue;
                const std::size_t k = std::min(node / prob.substeps, coef.grid.steps() - 1);
                const double g = sol.gamma[k];
                const auto u = paths.control(p, node);
                const auto pp = adj.p_at(p, node), qq = adj.q_at(p, node);
                const double* B = coef.B.data() + k * n * m;
                const double* D = coef.D.data() + k * n * m;
                const double* S = coef.S.data() + k * m * n;
                const double* R = coef.R.data() + k * m * m;
                double norm2 = 0.0;
                for (std::size_t r = 0; r < m; ++r) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < n; ++i) s += B[i * m + r] * pp[i] + g * D[i * m + r] * qq[i];
                    for (std::size_t i = 0; i < n; ++i) s += S[r * n + i] * x[i];
                    for (std::size_t i = 0; i < m; ++i) s += R[r * m + i] * u[i];
                    hv[r] = s;
                    norm2 += s * s;
                }
                unc[chunk] = std::max(unc[chunk], std::sqrt(norm2));
                if (boxed) {
                    // H_v.(w - u) is affine in w: its minimum over the box sits at a vertex
                    double worst = 0.0;
                    for (std::size_t r = 0; r < m; ++r)
                        worst += std::min(hv[r] * (domain.lo[r] - u[r]), hv[r] * (domain.hi[r] - u[r]));
                    con[chunk] = std::max(con[chunk], -worst);
                }
            }
    });
    ResidualReport out;
    out.residual_unconstrained = *std::max_element(unc.begin(), unc.end());
    out.residual_constrained = boxed ? *std::max_element(con.begin(), con.end()) : 0.0;
    out.scale = 1.0 + *std::max_element(xmax.begin(), xmax.end());
    out.n_paths = n_paths;
    out.seed = seed;
    return out;
}

}  // namespace gexp::mp
