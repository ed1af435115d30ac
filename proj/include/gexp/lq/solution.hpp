#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gexp/gcore/error.hpp"
#include "gexp/gcore/generator.hpp"
#include "gexp/lq/problem.hpp"
#include "gexp/lq/riccati.hpp"

namespace gexp::lq {

/// Why no Riccati solution is reported.
struct ObstructionReport {
    double residual_sup = 0.0;
    std::vector<double> residuals;
    std::vector<std::size_t> violating;
    double homogeneity_gap = 0.0;  // sup_a |G~(2a) - 2 G~(a)|, advisory only
};

class Condition39Error : public Error {
public:
    explicit Condition39Error(ObstructionReport report)
        : Error(ErrorCode::Condition39Violation,
                "compatibility condition fails (sup residual " + std::to_string(report.residual_sup) + ")"),
          report_(std::move(report)) {}

    const ObstructionReport& report() const noexcept { return report_; }

private:
    ObstructionReport report_;
};

inline double generator_homogeneity_gap(const ConvexGenerator& gen) {
    std::vector<double> samples;
    for (int i = -16; i <= 16; ++i) samples.push_back(0.25 * i);
    return homogeneity_gap(gen, samples);
}

inline ObstructionReport obstruction_report(const ConvexGenerator& gen, const Condition39Check& check) {
    return {check.sup, check.residuals, check.violating, generator_homogeneity_gap(gen)};
}

struct SolveOptions {
    double damping = 0.5;
    std::size_t max_iterations = 500;
    double tolerance = 1e-8;        // sup |gamma^{i+1} - gamma^i|
    double agreement = 1e-6;        // two-start agreement
    double bisection_tolerance = 1e-12;
    double condition39_tolerance = -1.0;  // < 0: 1e-6 (1 + ||C||)
};

enum class GammaMethod { Bisection, FixedPoint };

inline const char* to_string(GammaMethod m) { return m == GammaMethod::Bisection ? "bisection" : "fixed-point"; }

struct LQSolution {
    LQProblem problem;
    TimeGrid fine{1.0, 1};
    RiccatiPath riccati;
    OffsetPath offset;
    std::vector<double> l;                 // fine nodes
    GammaPath gamma;                       // coarse intervals
    std::vector<double> quadratic_form;    // <P lambda, lambda> at coarse nodes
    std::vector<VectorXd> lambda;          // coarse nodes
    std::vector<MatrixXd> K;               // fine nodes, m x n
    std::vector<VectorXd> k;               // fine nodes, m
    Condition39Check condition39;
    GammaMethod method = GammaMethod::FixedPoint;
    std::size_t iterations = 0;
    double start_gap = 0.0;                // sup |gamma_lo - gamma_hi| over the two starts
    double fixed_point_residual = 0.0;     // sup |gamma - argmax(<P lambda, lambda>)|
    double J_analytic = 0.0;

    const MatrixXd& P(std::size_t fine_node) const { return riccati.P.at(fine_node); }
    const VectorXd& phi(std::size_t fine_node) const { return offset.phi.at(fine_node); }
};

namespace detail {

struct Pass {
    RiccatiPath riccati;
    OffsetPath offset;
};

inline Pass solve_pass(const LQProblem& prob, const GammaPath& gamma) {
    Pass p{solve_riccati(prob, gamma), {}};
    p.offset = solve_phi(prob, p.riccati, gamma);
    return p;
}

/// <P lambda, lambda> at coarse node k with interval gamma g.
inline double quadratic_form_at(const LQProblem& prob, const Pass& pass, std::size_t k, double g) {
    const std::size_t iv = std::min(k, prob.grid.steps() - 1);
    const auto& c = prob.on_interval(iv);
    const MatrixXd& P = pass.riccati.at_node(k);
    const Gains gains(c, P, g, prob.delta());
    return offsets(c, gains, P, pass.offset.at_node(k, prob.substeps), g).a;
}

inline GammaPath best_response(const LQProblem& prob, const Pass& pass, const GammaPath& gamma) {
    GammaPath out(gamma.size());
    for (std::size_t k = 0; k < gamma.size(); ++k)
        out[k] = gtilde_maximizer(prob.gen, quadratic_form_at(prob, pass, k, gamma[k]));
    return out;
}

inline double sup_diff(const GammaPath& a, const GammaPath& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
    return d;
}

struct FixedPoint {
    GammaPath gamma;
    std::size_t iterations = 0;
    bool converged = false;
};

inline FixedPoint damped_iteration(const LQProblem& prob, double start, const SolveOptions& opt) {
    FixedPoint fp{constant_gamma(prob, start)};
    for (fp.iterations = 1; fp.iterations <= opt.max_iterations; ++fp.iterations) {
        const Pass pass = solve_pass(prob, fp.gamma);
        const GammaPath target = best_response(prob, pass, fp.gamma);
        GammaPath next(fp.gamma.size());
        for (std::size_t k = 0; k < next.size(); ++k)
            next[k] = (1.0 - opt.damping) * fp.gamma[k] + opt.damping * target[k];
        const double step = sup_diff(next, fp.gamma);
        fp.gamma = std::move(next);
        if (step < opt.tolerance) {
            fp.converged = true;
            return fp;
        }
    }
    fp.iterations = opt.max_iterations;
    return fp;
}

inline bool paths_agree(const Pass& a, const Pass& b) {
    for (std::size_t j = 0; j < a.riccati.P.size(); ++j) {
        const double scale = 1.0 + a.riccati.P[j].norm() + a.offset.phi[j].norm();
        if ((a.riccati.P[j] - b.riccati.P[j]).norm() > 1e-10 * scale) return false;
        if ((a.offset.phi[j] - b.offset.phi[j]).norm() > 1e-10 * scale) return false;
    }
    return true;
}

}  // namespace detail

/// Feedback u*(t, x) = K(t) x + k(t) tabulated on the fine grid, evaluated
/// with the gain of the fine interval containing t.
class Feedback {
public:
    Feedback(TimeGrid fine, std::size_t n, std::size_t m, const std::vector<MatrixXd>& K,
             const std::vector<VectorXd>& k)
        : fine_(fine), n_(n), m_(m), gain_(K.size() * m * n), offset_(k.size() * m) {
        for (std::size_t j = 0; j < K.size(); ++j)
            for (std::size_t r = 0; r < m; ++r) {
                for (std::size_t c = 0; c < n; ++c)
                    gain_[(j * m + r) * n + c] = K[j](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
                offset_[j * m + r] = k[j](static_cast<Eigen::Index>(r));
            }
    }

    std::size_t state_dim() const noexcept { return n_; }
    std::size_t control_dim() const noexcept { return m_; }

    void operator()(double t, std::span<const double> x, std::span<double> v) const {
        const std::size_t j = fine_.interval_of(t);
        for (std::size_t r = 0; r < m_; ++r) {
            double s = offset_[j * m_ + r];
            const double* row = gain_.data() + (j * m_ + r) * n_;
            for (std::size_t c = 0; c < n_; ++c) s += row[c] * x[c];
            v[r] = s;
        }
    }

    std::vector<double> operator()(double t, std::span<const double> x) const {
        std::vector<double> v(m_);
        (*this)(t, x, std::span<double>(v));
        return v;
    }

private:
    TimeGrid fine_;
    std::size_t n_, m_;
    std::vector<double> gain_;    // [node][row][col]
    std::vector<double> offset_;  // [node][row]
};

inline Feedback synthesize_control(const LQSolution& sol) {
    return Feedback(sol.fine, sol.problem.n, sol.problem.m, sol.K, sol.k);
}

inline double analytic_value(const LQSolution& sol, const VectorXd& x0) {
    return 0.5 * x0.dot(sol.riccati.P[0] * x0) + sol.offset.phi[0].dot(x0) + sol.l[0];
}

namespace detail {

inline LQSolution assemble(const LQProblem& prob, GammaPath gamma, const SolveOptions& opt) {
    LQSolution sol;
    sol.problem = prob;
    sol.fine = prob.fine_grid();
    Pass pass = solve_pass(prob, gamma);
    sol.condition39 = check_condition39(prob, pass.riccati, gamma, opt.condition39_tolerance);
    if (!sol.condition39.compatible()) throw Condition39Error(obstruction_report(prob.gen, sol.condition39));
    sol.l = solve_l(prob, pass.riccati, pass.offset, gamma);

    const double delta = prob.delta();
    const std::size_t N = prob.grid.steps();
    sol.quadratic_form.resize(N + 1);
    sol.lambda.resize(N + 1);
    for (std::size_t k = 0; k <= N; ++k) {
        const std::size_t iv = std::min(k, N - 1);
        const auto& c = prob.on_interval(iv);
        const MatrixXd& P = pass.riccati.at_node(k);
        const Gains gains(c, P, gamma[iv], delta);
        const Offsets o = offsets(c, gains, P, pass.offset.at_node(k, prob.substeps), gamma[iv]);
        sol.quadratic_form[k] = o.a;
        sol.lambda[k] = o.lambda;
        if (k < N)
            sol.fixed_point_residual =
                std::max(sol.fixed_point_residual, std::abs(gamma[k] - gtilde_maximizer(prob.gen, o.a)));
    }
    const std::size_t steps = sol.fine.steps();
    sol.K.resize(steps + 1);
    sol.k.resize(steps + 1);
    for (std::size_t j = 0; j <= steps; ++j) {
        const std::size_t iv = std::min(j / prob.substeps, N - 1);
        const auto& c = prob.on_interval(iv);
        const MatrixXd& P = pass.riccati.P[j];
        const Gains gains(c, P, gamma[iv], delta);
        const Offsets o = offsets(c, gains, P, pass.offset.phi[j], gamma[iv]);
        sol.K[j] = -gains.solve(gains.M);
        sol.k[j] = -gains.solve(o.v);
    }
    sol.riccati = std::move(pass.riccati);
    sol.offset = std::move(pass.offset);
    sol.gamma = std::move(gamma);
    sol.J_analytic = analytic_value(sol, prob.x0);
    return sol;
}

}  // namespace detail

/// Solves for the worst-case volatility gamma_t = argmax(<P lambda_t, lambda_t>)
/// together with P, phi and l. Scalar problems whose P and phi do not depend
/// on gamma are solved node by node by bisection; everything else by a damped
/// fixed-point iteration from gamma = c_lo and gamma = c_hi, which must agree.
inline LQSolution solve_gamma(const LQProblem& prob, const SolveOptions& opt = {}) {
    prob.validate();
    require(prob.gen.is_differentiable(), ErrorCode::InvalidArgument,
            "solving for gamma needs a strictly convex penalty");
    const auto& th = prob.gen.theta();

    if (prob.n == 1 && prob.m == 1) {
        const GammaPath lo = constant_gamma(prob, th.c_lo), hi = constant_gamma(prob, th.c_hi);
        const detail::Pass pass_lo = detail::solve_pass(prob, lo);
        const detail::Pass pass_hi = detail::solve_pass(prob, hi);
        const auto c39_lo = check_condition39(prob, pass_lo.riccati, lo, opt.condition39_tolerance);
        const auto c39_hi = check_condition39(prob, pass_hi.riccati, hi, opt.condition39_tolerance);
        if (c39_lo.compatible() && c39_hi.compatible() && detail::paths_agree(pass_lo, pass_hi)) {
            GammaPath gamma(prob.grid.steps());
            std::size_t evaluations = 0;
            for (std::size_t k = 0; k < gamma.size(); ++k) {
                auto rho = [&](double g) {
                    ++evaluations;
                    return gtilde_maximizer(prob.gen, detail::quadratic_form_at(prob, pass_lo, k, g)) - g;
                };
                double a = th.c_lo, b = th.c_hi;
                const double ra = rho(a), rb = rho(b);
                require(ra >= 0.0 && rb <= 0.0, ErrorCode::SignConditionFailure,
                        "rho(c_lo) >= 0 >= rho(c_hi) fails at node " + std::to_string(k));
                if (ra == 0.0) {
                    gamma[k] = a;
                    continue;
                }
                while (b - a > opt.bisection_tolerance) {
                    const double mid = 0.5 * (a + b);
                    if (rho(mid) >= 0.0) a = mid; else b = mid;
                }
                gamma[k] = 0.5 * (a + b);
            }
            LQSolution sol = detail::assemble(prob, std::move(gamma), opt);
            sol.method = GammaMethod::Bisection;
            sol.iterations = evaluations;
            return sol;
        }
    }

    const auto from_lo = detail::damped_iteration(prob, th.c_lo, opt);
    const auto from_hi = detail::damped_iteration(prob, th.c_hi, opt);
    if (!from_lo.converged || !from_hi.converged) {
        // report an incompatible problem as such rather than as non-convergence
        const auto& last = from_lo.converged ? from_hi.gamma : from_lo.gamma;
        const auto c39 = check_condition39(prob, solve_riccati(prob, last), last, opt.condition39_tolerance);
        if (!c39.compatible()) throw Condition39Error(obstruction_report(prob.gen, c39));
        throw Error(ErrorCode::NoFixedPoint, "gamma iteration did not converge in " +
                                                 std::to_string(opt.max_iterations) + " iterations");
    }
    const double gap = detail::sup_diff(from_lo.gamma, from_hi.gamma);
    if (gap > opt.agreement) {
        const auto c39 = check_condition39(prob, solve_riccati(prob, from_lo.gamma), from_lo.gamma,
                                           opt.condition39_tolerance);
        if (!c39.compatible()) throw Condition39Error(obstruction_report(prob.gen, c39));
        throw Error(ErrorCode::NonUniqueFixedPoint,
                    "starts at c_lo and c_hi reach different gamma paths (gap " + std::to_string(gap) + ")");
    }
    LQSolution sol = detail::assemble(prob, from_lo.gamma, opt);
    sol.method = GammaMethod::FixedPoint;
    sol.iterations = from_lo.iterations + from_hi.iterations;
    sol.start_gap = gap;
    return sol;
}

}  // namespace gexp::lq
