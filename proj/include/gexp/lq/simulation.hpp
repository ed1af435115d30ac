#pragma once

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "gexp/lq/problem.hpp"
#include "gexp/scenario/controlled_sde.hpp"

namespace gexp::lq {

/// Row-major copies of the coefficients so the Monte Carlo loops stay
/// allocation-free.
struct FlatCoefficients {
    std::size_t n, m;
    std::vector<double> A, B, C, D, b, sigma, Q, S, R, E;  // per interval, concatenated
    std::vector<double> L;
    TimeGrid grid;

    explicit FlatCoefficients(const LQProblem& prob) : n(prob.n), m(prob.m), grid(prob.grid) {
        auto push = [](std::vector<double>& dst, const MatrixXd& src) {
            for (Eigen::Index r = 0; r < src.rows(); ++r)
                for (Eigen::Index c = 0; c < src.cols(); ++c) dst.push_back(src(r, c));
        };
        for (const auto& c : prob.coefficients) {
            push(A, c.A);
            push(B, c.B);
            push(C, c.C);
            push(D, c.D);
            push(b, c.b);
            push(sigma, c.sigma);
            push(Q, c.Q);
            push(S, c.S);
            push(R, c.R);
            E.push_back(c.E);
        }
        push(L, prob.L);
    }

    std::size_t interval(double t) const noexcept { return grid.interval_of(t); }

    /// out = M x + N v + c for one interval's (M, N, c).
    void affine(const std::vector<double>& M, const std::vector<double>& Nm, const std::vector<double>& c,
                std::size_t k, std::span<const double> x, std::span<const double> v, std::span<double> out) const {
        const double* mk = M.data() + k * n * n;
        const double* nk = Nm.data() + k * n * m;
        const double* ck = c.data() + k * n;
        for (std::size_t i = 0; i < n; ++i) {
            double s = ck[i];
            for (std::size_t j = 0; j < n; ++j) s += mk[i * n + j] * x[j];
            for (std::size_t j = 0; j < m; ++j) s += nk[i * m + j] * v[j];
            out[i] = s;
        }
    }

    /// 1/2 (x'Qx + 2 v'Sx + v'Rv) on interval k.
    double running(std::size_t k, std::span<const double> x, std::span<const double> v) const {
        const double* q = Q.data() + k * n * n;
        const double* s = S.data() + k * m * n;
        const double* r = R.data() + k * m * m;
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) sum += x[i] * q[i * n + j] * x[j];
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) sum += 2.0 * v[i] * s[i * n + j] * x[j];
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) sum += v[i] * r[i * m + j] * v[j];
        return 0.5 * sum;
    }

    double terminal(std::span<const double> x) const {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) sum += x[i] * L[i * n + j] * x[j];
        return 0.5 * sum;
    }
};

/// The LQ state equation driven by `control`: void(t, span x, span<double> v).
template <class Control>
auto make_lq_sde(const LQProblem& prob, Control control) {
    auto flat = std::make_shared<const FlatCoefficients>(prob);
    auto drift = [flat](double t, std::span<const double> x, std::span<const double> v, std::span<double> out) {
        flat->affine(flat->A, flat->B, flat->b, flat->interval(t), x, v, out);
    };
    auto qv = [](double, std::span<const double>, std::span<const double>, std::span<double> out) {
        for (double& o : out) o = 0.0;
    };
    auto vol = [flat](double t, std::span<const double> x, std::span<const double> v, std::span<double> out) {
        flat->affine(flat->C, flat->D, flat->sigma, flat->interval(t), x, v, out);
    };
    std::vector<double> x0(prob.x0.data(), prob.x0.data() + prob.x0.size());
    return scenario::make_controlled_sde(prob.n, prob.m, std::move(x0), drift, qv, vol, std::move(control));
}

/// Driver E y + 1/2 (x'Qx + 2 u'Sx + u'Ru) with terminal 1/2 x'Lx.
inline auto make_lq_driver(const LQProblem& prob) {
    auto flat = std::make_shared<const FlatCoefficients>(prob);
    return scenario::make_linear_driver(
        [flat](double t) { return flat->E[flat->interval(t)]; },
        [flat](double t, std::span<const double> x, std::span<const double> v) {
            return flat->running(flat->interval(t), x, v);
        },
        [](double, std::span<const double>, std::span<const double>) { return 0.0; },
        [flat](std::span<const double> x) { return flat->terminal(x); });
}

}  // namespace gexp::lq
