#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gexp/gcore/error.hpp"
#include "gexp/gcore/generator.hpp"
#include "gexp/lq/problem.hpp"

namespace gexp::lq {

/// gamma is piecewise constant: one value per coarse interval.
using GammaPath = std::vector<double>;

inline GammaPath constant_gamma(const LQProblem& prob, double g) { return GammaPath(prob.grid.steps(), g); }

/// P at every node of the fine grid (prob.substeps per interval).
struct RiccatiPath {
    TimeGrid fine{1.0, 1};
    std::size_t substeps = 1;
    std::vector<MatrixXd> P;

    const MatrixXd& at_node(std::size_t k) const { return P.at(k * substeps); }
};

/// phi at every fine node.
struct OffsetPath {
    std::vector<VectorXd> phi;
    const VectorXd& at_node(std::size_t k, std::size_t substeps) const { return phi.at(k * substeps); }
};

/// W = R + g D'PD and M = B'P + S + g D'PC with W checked against delta/2.
struct Gains {
    MatrixXd W;
    Eigen::LLT<MatrixXd> W_llt;
    MatrixXd M;

    Gains(const Coefficients& c, const MatrixXd& P, double g, double delta)
        : W(c.R + g * c.D.transpose() * P * c.D), M(c.B.transpose() * P + c.S + g * c.D.transpose() * P * c.C) {
        require(W.allFinite(), ErrorCode::GainSingularity, "R + gamma D'PD is not finite");
        const double w_min = detail::min_eigenvalue(0.5 * (W + W.transpose()));
        require(w_min >= 0.5 * delta, ErrorCode::GainSingularity,
                "min eigenvalue of R + gamma D'PD fell below delta/2 (" + std::to_string(w_min) + ")");
        W_llt.compute(W);
    }

    MatrixXd solve(const MatrixXd& rhs) const { return W_llt.solve(rhs); }
    VectorXd solve(const VectorXd& rhs) const { return W_llt.solve(rhs); }
};

namespace detail {

inline MatrixXd riccati_rhs(const Coefficients& c, const MatrixXd& P, double g, double delta) {
    const Gains gains(c, P, g, delta);
    const MatrixXd inner = P * c.A + c.A.transpose() * P + c.E * P + g * c.C.transpose() * P * c.C + c.Q -
                           gains.M.transpose() * gains.solve(gains.M);
    return -inner;
}

inline VectorXd phi_rhs(const Coefficients& c, const MatrixXd& P, const VectorXd& phi, double g, double delta) {
    const Gains gains(c, P, g, delta);
    const MatrixXd Mt_Winv = gains.solve(gains.M).transpose();  // M' W^{-1} (W symmetric)
    const auto n = static_cast<Eigen::Index>(c.n());
    const MatrixXd drift = c.A.transpose() + c.E * MatrixXd::Identity(n, n) - Mt_Winv * c.B.transpose();
    const VectorXd forcing = g * (c.C.transpose() - Mt_Winv * c.D.transpose()) * (P * c.sigma) + P * c.b;
    return -(drift * phi + forcing);
}

/// v = B'phi + g D'P sigma and lambda = sigma - D W^{-1} v.
struct Offsets {
    VectorXd v;
    VectorXd lambda;
    double a;  // <P lambda, lambda>
};

inline Offsets offsets(const Coefficients& c, const Gains& gains, const MatrixXd& P, const VectorXd& phi, double g) {
    Offsets o;
    o.v = c.B.transpose() * phi + g * c.D.transpose() * (P * c.sigma);
    o.lambda = c.sigma - c.D * gains.solve(o.v);
    o.a = o.lambda.dot(P * o.lambda);
    return o;
}

inline double l_rhs(const Coefficients& c, const ConvexGenerator& gen, const MatrixXd& P, const VectorXd& phi,
                    double l, double g, double delta) {
    const Gains gains(c, P, g, delta);
    const Offsets o = offsets(c, gains, P, phi, g);
    const VectorXd w_v = gains.solve(o.v);
    const double inner = c.E * l + phi.dot(c.b) - w_v.dot(c.B.transpose() * phi) + gtilde_eval(gen, o.a) +
                         0.5 * w_v.dot(c.R * w_v);
    return -inner;
}

/// Cubic Hermite midpoint from end values and slopes over a step of length h.
template <class T>
T hermite_mid(const T& y0, const T& y1, const T& d0, const T& d1, double h) {
    return 0.5 * (y0 + y1) + (h / 8.0) * (d0 - d1);
}

inline void check_size(const MatrixXd& P, double bound, double t) {
    require(P.allFinite() && P.norm() <= bound, ErrorCode::BlowUp,
            "Riccati solution exceeded the bound near t = " + std::to_string(t));
}

inline void check_gamma(const LQProblem& prob, const GammaPath& gamma) {
    require(gamma.size() == prob.grid.steps(), ErrorCode::DimensionMismatch, "gamma needs one value per interval");
    for (double g : gamma)
        require(std::isfinite(g) && prob.gen.theta().contains(g), ErrorCode::InvalidArgument,
                "gamma must lie in the volatility interval");
}

}  // namespace detail

/// Backward classical RK4 from P(T) = L, symmetrized after every step.
inline RiccatiPath solve_riccati(const LQProblem& prob, const GammaPath& gamma) {
    detail::check_gamma(prob, gamma);
    const double delta = prob.delta();
    RiccatiPath out{prob.fine_grid(), prob.substeps, {}};
    const std::size_t steps = out.fine.steps();
    const double h = out.fine.dt();
    out.P.resize(steps + 1);
    out.P[steps] = prob.L;
    for (std::size_t j = steps; j-- > 0;) {
        const std::size_t k = j / prob.substeps;
        const auto& c = prob.on_interval(k);
        const double g = gamma[k];
        const MatrixXd& y = out.P[j + 1];
        const MatrixXd k1 = detail::riccati_rhs(c, y, g, delta);
        const MatrixXd k2 = detail::riccati_rhs(c, y - 0.5 * h * k1, g, delta);
        const MatrixXd k3 = detail::riccati_rhs(c, y - 0.5 * h * k2, g, delta);
        const MatrixXd k4 = detail::riccati_rhs(c, y - h * k3, g, delta);
        MatrixXd next = y - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        next = 0.5 * (next + next.transpose());
        detail::check_size(next, prob.blowup_bound, out.fine.time(j));
        out.P[j] = std::move(next);
    }
    return out;
}

/// Backward RK4 for phi from phi(T) = 0; P at half steps by cubic Hermite
/// interpolation, which keeps the scheme fourth order.
inline OffsetPath solve_phi(const LQProblem& prob, const RiccatiPath& riccati, const GammaPath& gamma) {
    detail::check_gamma(prob, gamma);
    const double delta = prob.delta();
    const std::size_t steps = riccati.fine.steps();
    const double h = riccati.fine.dt();
    OffsetPath out;
    out.phi.resize(steps + 1);
    out.phi[steps] = VectorXd::Zero(static_cast<Eigen::Index>(prob.n));
    for (std::size_t j = steps; j-- > 0;) {
        const std::size_t k = j / prob.substeps;
        const auto& c = prob.on_interval(k);
        const double g = gamma[k];
        const MatrixXd& P0 = riccati.P[j];
        const MatrixXd& P1 = riccati.P[j + 1];
        const MatrixXd Pm = detail::hermite_mid<MatrixXd>(P0, P1, detail::riccati_rhs(c, P0, g, delta),
                                                          detail::riccati_rhs(c, P1, g, delta), h);
        const VectorXd& y = out.phi[j + 1];
        const VectorXd k1 = detail::phi_rhs(c, P1, y, g, delta);
        const VectorXd k2 = detail::phi_rhs(c, Pm, y - 0.5 * h * k1, g, delta);
        const VectorXd k3 = detail::phi_rhs(c, Pm, y - 0.5 * h * k2, g, delta);
        const VectorXd k4 = detail::phi_rhs(c, P0, y - h * k3, g, delta);
        out.phi[j] = y - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        require(out.phi[j].allFinite(), ErrorCode::BlowUp, "phi left the finite range");
    }
    return out;
}

/// Backward RK4 for l from l(T) = 0, including G~(<P lambda, lambda>) and E l.
inline std::vector<double> solve_l(const LQProblem& prob, const RiccatiPath& riccati, const OffsetPath& offset,
                                   const GammaPath& gamma) {
    detail::check_gamma(prob, gamma);
    const double delta = prob.delta();
    const std::size_t steps = riccati.fine.steps();
    const double h = riccati.fine.dt();
    std::vector<double> l(steps + 1, 0.0);
    for (std::size_t j = steps; j-- > 0;) {
        const std::size_t k = j / prob.substeps;
        const auto& c = prob.on_interval(k);
        const double g = gamma[k];
        const MatrixXd& P0 = riccati.P[j];
        const MatrixXd& P1 = riccati.P[j + 1];
        const MatrixXd dP0 = detail::riccati_rhs(c, P0, g, delta);
        const MatrixXd dP1 = detail::riccati_rhs(c, P1, g, delta);
        const MatrixXd Pm = detail::hermite_mid<MatrixXd>(P0, P1, dP0, dP1, h);
        const VectorXd& f0 = offset.phi[j];
        const VectorXd& f1 = offset.phi[j + 1];
        const VectorXd fm = detail::hermite_mid<VectorXd>(f0, f1, detail::phi_rhs(c, P0, f0, g, delta),
                                                          detail::phi_rhs(c, P1, f1, g, delta), h);
        const double y = l[j + 1];
        const double k1 = detail::l_rhs(c, prob.gen, P1, f1, y, g, delta);
        const double k2 = detail::l_rhs(c, prob.gen, Pm, fm, y - 0.5 * h * k1, g, delta);
        const double k3 = detail::l_rhs(c, prob.gen, Pm, fm, y - 0.5 * h * k2, g, delta);
        const double k4 = detail::l_rhs(c, prob.gen, P0, f0, y - h * k3, g, delta);
        l[j] = y - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        require(std::isfinite(l[j]), ErrorCode::BlowUp, "l left the finite range");
    }
    return l;
}

/// Per-node residual ||C - D W^{-1} M|| (Frobenius) on the coarse grid.
struct Condition39Check {
    std::vector<double> residuals;
    double sup = 0.0;
    double tolerance = 0.0;
    std::vector<std::size_t> violating;

    bool compatible() const noexcept { return sup <= tolerance; }
};

inline Condition39Check check_condition39(const LQProblem& prob, const RiccatiPath& riccati, const GammaPath& gamma,
                                          double tolerance = -1.0) {
    detail::check_gamma(prob, gamma);
    const double delta = prob.delta();
    Condition39Check out;
    out.tolerance = tolerance >= 0.0 ? tolerance : 1e-6 * (1.0 + prob.c_norm());
    const std::size_t N = prob.grid.steps();
    out.residuals.resize(N + 1);
    for (std::size_t k = 0; k <= N; ++k) {
        const std::size_t iv = std::min(k, N - 1);
        const auto& c = prob.on_interval(iv);
        const MatrixXd& P = riccati.at_node(k);
        const Gains gains(c, P, gamma[iv], delta);
        out.residuals[k] = (c.C - c.D * gains.solve(gains.M)).norm();
        out.sup = std::max(out.sup, out.residuals[k]);
        if (out.residuals[k] > out.tolerance) out.violating.push_back(k);
    }
    return out;
}

}  // namespace gexp::lq
