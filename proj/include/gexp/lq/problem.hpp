#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "gexp/gcore/error.hpp"
#include "gexp/gcore/generator.hpp"
#include "gexp/gcore/time_grid.hpp"

namespace gexp::lq {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Coefficients on one grid interval (held constant across it).
struct Coefficients {
    MatrixXd A, B, C, D;  // n x n, n x m, n x n, n x m
    VectorXd b, sigma;    // n
    double E = 0.0;
    MatrixXd Q, S, R;     // n x n, m x n, m x m

    std::size_t n() const noexcept { return static_cast<std::size_t>(A.rows()); }
    std::size_t m() const noexcept { return static_cast<std::size_t>(B.cols()); }

    /// All-zero data with R = I; callers overwrite what they need.
    static Coefficients zero(std::size_t n, std::size_t m) {
        const auto ni = static_cast<Eigen::Index>(n), mi = static_cast<Eigen::Index>(m);
        return {MatrixXd::Zero(ni, ni), MatrixXd::Zero(ni, mi), MatrixXd::Zero(ni, ni), MatrixXd::Zero(ni, mi),
                VectorXd::Zero(ni), VectorXd::Zero(ni), 0.0, MatrixXd::Zero(ni, ni), MatrixXd::Zero(mi, ni),
                MatrixXd::Identity(mi, mi)};
    }
};

namespace detail {

inline double min_eigenvalue(const MatrixXd& sym) {
    if (sym.rows() == 0) return std::numeric_limits<double>::infinity();
    if (sym.rows() == 1) return sym(0, 0);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline bool is_symmetric(const MatrixXd& a, double tol = 1e-12) {
    return a.rows() == a.cols() && (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * (1.0 + a.cwiseAbs().maxCoeff());
}

inline bool all_finite(const MatrixXd& a) { return a.allFinite(); }

}  // namespace detail

/// Linear-quadratic problem with piecewise-constant coefficients on `grid`:
///   dX = (AX + Bu + b) dt + (CX + Du + sigma) dB,
///   Y_t = E~_t[ 1/2 <L X_T, X_T> + int_t^T E Y + 1/2 (x'Qx + 2 u'Sx + u'Ru) ds ].
/// The ODE solvers split every interval into `substeps` RK4 steps.
struct LQProblem {
    std::size_t n = 1, m = 1;
    TimeGrid grid{1.0, 1};
    std::vector<Coefficients> coefficients;  // one per interval
    MatrixXd L;
    VectorXd x0;
    ConvexGenerator gen = ConvexGenerator::sublinear({1.0, 1.0});
    std::size_t substeps = 8;
    double blowup_bound = 1e8;

    const Coefficients& on_interval(std::size_t k) const { return coefficients.at(k); }
    const Coefficients& at(double t) const { return coefficients[grid.interval_of(t)]; }
    TimeGrid fine_grid() const { return grid.refined(substeps); }

    /// delta in R >= delta I over the whole horizon.
    double delta() const {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& c : coefficients) d = std::min(d, detail::min_eigenvalue(c.R));
        return d;
    }

    /// sup over intervals of ||C|| (Frobenius).
    double c_norm() const {
        double s = 0.0;
        for (const auto& c : coefficients) s = std::max(s, c.C.norm());
        return s;
    }

    static LQProblem constant(const Coefficients& coef, MatrixXd L, VectorXd x0, TimeGrid grid,
                              ConvexGenerator gen, std::size_t substeps = 8) {
        LQProblem p;
        p.n = coef.n();
        p.m = coef.m();
        p.grid = grid;
        p.coefficients.assign(grid.steps(), coef);
        p.L = std::move(L);
        p.x0 = std::move(x0);
        p.gen = std::move(gen);
        p.substeps = substeps;
        p.validate();
        return p;
    }

    /// Dimensions, finiteness, L >= 0, R >> 0, Q - S'R^{-1}S >= 0.
    void validate() const {
        using detail::min_eigenvalue;
        const auto ni = static_cast<Eigen::Index>(n), mi = static_cast<Eigen::Index>(m);
        require(n >= 1 && m >= 1, ErrorCode::InvalidArgument, "LQ dimensions must be positive");
        require(substeps >= 1, ErrorCode::InvalidArgument, "substeps must be >= 1");
        require(coefficients.size() == grid.steps(), ErrorCode::DimensionMismatch,
                "need one coefficient set per grid interval");
        require(L.rows() == ni && L.cols() == ni && x0.size() == ni, ErrorCode::DimensionMismatch,
                "L must be n x n and x0 an n-vector");
        require(L.allFinite() && x0.allFinite(), ErrorCode::NonFiniteValue, "L and x0 must be finite");
        require(detail::is_symmetric(L), ErrorCode::InvalidArgument, "L must be symmetric");
        require(min_eigenvalue(L) >= -1e-10, ErrorCode::InvalidArgument, "L must be positive semidefinite");
        for (const auto& c : coefficients) {
            require(c.A.rows() == ni && c.A.cols() == ni && c.C.rows() == ni && c.C.cols() == ni &&
                        c.B.rows() == ni && c.B.cols() == mi && c.D.rows() == ni && c.D.cols() == mi &&
                        c.b.size() == ni && c.sigma.size() == ni && c.Q.rows() == ni && c.Q.cols() == ni &&
                        c.S.rows() == mi && c.S.cols() == ni && c.R.rows() == mi && c.R.cols() == mi,
                    ErrorCode::DimensionMismatch, "LQ coefficient shapes do not match (n, m)");
            require(c.A.allFinite() && c.B.allFinite() && c.C.allFinite() && c.D.allFinite() && c.b.allFinite() &&
                        c.sigma.allFinite() && std::isfinite(c.E) && c.Q.allFinite() && c.S.allFinite() &&
                        c.R.allFinite(),
                    ErrorCode::NonFiniteValue, "LQ coefficients must be finite");
            require(detail::is_symmetric(c.Q) && detail::is_symmetric(c.R), ErrorCode::InvalidArgument,
                    "Q and R must be symmetric");
            const double r_min = min_eigenvalue(c.R);
            require(r_min > 0.0, ErrorCode::InvalidArgument, "R must be uniformly positive definite");
            const MatrixXd schur = c.Q - c.S.transpose() * c.R.llt().solve(c.S);
            require(min_eigenvalue(0.5 * (schur + schur.transpose())) >= -1e-10, ErrorCode::InvalidArgument,
                    "Q - S'R^{-1}S must be positive semidefinite");
        }
    }
};

}  // namespace gexp::lq
