#pragma once

#include <algorithm>
#include <limits>

#include <Eigen/Dense>

#include "gexp/gcore/error.hpp"
#include "gexp/lq/problem.hpp"

namespace gexp::mp {

using lq::LQProblem;
using lq::MatrixXd;
using lq::VectorXd;

namespace detail {

inline void check_dims(const LQProblem& prob, const VectorXd& x, const VectorXd& v, const VectorXd& p,
                       const VectorXd& q) {
    const auto n = static_cast<Eigen::Index>(prob.n), m = static_cast<Eigen::Index>(prob.m);
    require(x.size() == n && p.size() == n && q.size() == n && v.size() == m, ErrorCode::DimensionMismatch,
            "Hamiltonian arguments do not match (n, m)");
}

}  // namespace detail

/// H = p'(Ax + Bv + b) + gamma q'(Cx + Dv + sigma) + E y + 1/2 (x'Qx + 2 v'Sx + v'Rv).
inline double hamiltonian(const LQProblem& prob, double t, const VectorXd& x, double y, const VectorXd& v,
                          const VectorXd& p, const VectorXd& q, double gamma) {
    detail::check_dims(prob, x, v, p, q);
    const auto& c = prob.at(t);
    return p.dot(c.A * x + c.B * v + c.b) + gamma * q.dot(c.C * x + c.D * v + c.sigma) + c.E * y +
           0.5 * (x.dot(c.Q * x) + 2.0 * v.dot(c.S * x) + v.dot(c.R * v));
}

/// H_v = B'p + gamma D'q + Sx + Rv.
inline VectorXd hamiltonian_v(const LQProblem& prob, double t, const VectorXd& x, double /*y*/, const VectorXd& v,
                              const VectorXd& p, const VectorXd& q, double gamma) {
    detail::check_dims(prob, x, v, p, q);
    const auto& c = prob.at(t);
    return c.B.transpose() * p + gamma * c.D.transpose() * q + c.S * x + c.R * v;
}

/// Convexity hypotheses of the sufficient condition, checked interval by interval.
struct SufficiencyFlags {
    bool terminal_convex = true;  // L >= 0
    bool control_coercive = true; // R >= delta I with delta > 0
    bool jointly_convex = true;   // [[Q, S'], [S, R]] >= 0
    double min_eig_L = 0.0;
    double min_eig_R = std::numeric_limits<double>::infinity();
    double min_eig_block = std::numeric_limits<double>::infinity();

    bool all() const noexcept { return terminal_convex && control_coercive && jointly_convex; }
};

inline SufficiencyFlags sufficiency_check(const LQProblem& prob, double tolerance = 1e-10) {
    SufficiencyFlags out;
    out.min_eig_L = lq::detail::min_eigenvalue(0.5 * (prob.L + prob.L.transpose()));
    out.terminal_convex = out.min_eig_L >= -tolerance;
    const auto n = static_cast<Eigen::Index>(prob.n), m = static_cast<Eigen::Index>(prob.m);
    for (const auto& c : prob.coefficients) {
        out.min_eig_R = std::min(out.min_eig_R, lq::detail::min_eigenvalue(0.5 * (c.R + c.R.transpose())));
        MatrixXd block(n + m, n + m);
        block << c.Q, c.S.transpose(), c.S, c.R;
        out.min_eig_block =
            std::min(out.min_eig_block, lq::detail::min_eigenvalue(0.5 * (block + block.transpose())));
    }
    out.control_coercive = out.min_eig_R > tolerance;
    out.jointly_convex = out.min_eig_block >= -tolerance;
    return out;
}

}  // namespace gexp::mp
