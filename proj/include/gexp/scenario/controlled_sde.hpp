#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "gexp/gcore/error.hpp"
#include "gexp/gcore/scenario_measure.hpp"
#include "gexp/scenario/ensemble.hpp"

namespace gexp::scenario {

/// dX = b(t,X,v) dt + h(t,X,v) d<B> + sigma(t,X,v) dB with v = control(t, X).
///
/// Coefficient callables have the shape
///   void(double t, std::span<const double> x, std::span<const double> v, std::span<double> out)
/// and the control callable
///   void(double t, std::span<const double> x, std::span<double> v).
template <class Drift, class QvDrift, class Vol, class Control>
struct ControlledSDE {
    std::size_t state_dim;
    std::size_t control_dim;
    std::vector<double> x0;
    Drift drift;
    QvDrift qv_drift;
    Vol vol;
    Control control;
};

template <class Drift, class QvDrift, class Vol, class Control>
ControlledSDE<Drift, QvDrift, Vol, Control> make_controlled_sde(std::size_t state_dim, std::size_t control_dim,
                                                                std::vector<double> x0, Drift drift, QvDrift qv_drift,
                                                                Vol vol, Control control) {
    require(x0.size() == state_dim, ErrorCode::DimensionMismatch, "initial state has the wrong dimension");
    return {state_dim, control_dim, std::move(x0), std::move(drift), std::move(qv_drift), std::move(vol),
            std::move(control)};
}

/// Driver f = E(s) y + f0(s,x,v), g = g0(s,x,v), terminal Phi(x).
///   discount:   double(double t)                       (deterministic E)
///   running:    double(double t, span x, span v)       (f0)
///   qv_running: double(double t, span x, span v)       (g0, paid per unit of <B>)
///   terminal:   double(span x)                         (Phi)
template <class Discount, class Running, class QvRunning, class Terminal>
struct LinearDriver {
    Discount discount;
    Running running;
    QvRunning qv_running;
    Terminal terminal;
};

template <class Discount, class Running, class QvRunning, class Terminal>
LinearDriver<Discount, Running, QvRunning, Terminal> make_linear_driver(Discount discount, Running running,
                                                                            QvRunning qv_running, Terminal terminal) {
    return {std::move(discount), std::move(running), std::move(qv_running), std::move(terminal)};
}

namespace detail {

struct StepScratch {
    std::vector<double> v, b, h, s, next;
    StepScratch(std::size_t n, std::size_t m) : v(m), b(n), h(n), s(n), next(n) {}
};

/// One Euler-Maruyama step in place; `v` must already hold the control.
template <class Sde>
void euler_step(const Sde& sde, double t, double dt, double dq, double db, std::span<double> x, StepScratch& w) {
    sde.drift(t, x, w.v, std::span<double>(w.b));
    sde.qv_drift(t, x, w.v, std::span<double>(w.h));
    sde.vol(t, x, w.v, std::span<double>(w.s));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += w.b[i] * dt + w.h[i] * dq + w.s[i] * db;
}

inline bool all_finite(std::span<const double> x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace detail

/// State and control along every path; state has steps + 1 nodes.
struct StatePaths {
    std::size_t n_paths;
    std::size_t steps;
    std::size_t state_dim;
    std::size_t control_dim;
    std::vector<double> states;    // [path][node][dim]
    std::vector<double> controls;  // [path][step][dim]

    std::span<const double> state(std::size_t p, std::size_t node) const {
        return {states.data() + (p * (steps + 1) + node) * state_dim, state_dim};
    }
    std::span<const double> control(std::size_t p, std::size_t step) const {
        return {controls.data() + (p * steps + step) * control_dim, control_dim};
    }
};

/// X_{k+1} = X_k + b dt + h gamma_k dt + sigma dB_k on every path of the ensemble.
template <class Sde>
StatePaths simulate_state(const Sde& sde, const PathEnsemble& ensemble) {
    const std::size_t n = sde.state_dim, m = sde.control_dim, steps = ensemble.steps();
    StatePaths out{ensemble.n_paths, steps, n, m, std::vector<double>(ensemble.n_paths * (steps + 1) * n),
                   std::vector<double>(ensemble.n_paths * steps * m)};
    const double dt = ensemble.grid().dt();
    std::vector<int> failed(chunk_count(ensemble.n_paths), 0);
    for_each_chunk(ensemble.n_paths, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        detail::StepScratch w(n, m);
        std::vector<double> x(n);
        for (std::size_t p = begin; p < end; ++p) {
            std::copy(sde.x0.begin(), sde.x0.end(), x.begin());
            const auto db = ensemble.path(p);
            double* node = out.states.data() + p * (steps + 1) * n;
            std::copy(x.begin(), x.end(), node);
            for (std::size_t k = 0; k < steps; ++k) {
                const double t = ensemble.grid().time(k);
                sde.control(t, std::span<const double>(x), std::span<double>(w.v));
                std::copy(w.v.begin(), w.v.end(), out.controls.data() + (p * steps + k) * m);
                detail::euler_step(sde, t, dt, ensemble.bracket[k], db[k], std::span<double>(x), w);
                if (!detail::all_finite(x)) failed[chunk] = 1;
                std::copy(x.begin(), x.end(), node + (k + 1) * n);
            }
        }
    });
    for (int f : failed) require(f == 0, ErrorCode::NonFiniteState, "a simulated path left the finite range");
    return out;
}

/// Per-scenario penalized cost with common random numbers:
///   Y_0^gamma = E[ Lambda_T Phi(X_T) + sum_k Lambda_k (f0 dt + g0 gamma_k dt - l(gamma_k) dt) ],
/// Lambda_k = exp(sum_{j<k} E_j dt). gamma is piecewise constant on `blocks`
/// coarse steps; the simulation grid splits each of them `substeps` times.
///
/// prepare(gamma, j) caches every path's state at the start of block j, so a
/// line search over gamma_j only re-simulates the suffix.
template <class Sde, class Driver>
class MarkovCostObjective {
public:
    MarkovCostObjective(const Sde& sde, const Driver& driver, const ConvexGenerator& gen, TimeGrid coarse,
                        std::size_t substeps, const NormalDraws& draws)
        : sde_(sde), driver_(driver), gen_(gen), coarse_(coarse), substeps_(substeps), draws_(draws),
          fine_(coarse.refined(substeps)) {
        require(draws.steps() == fine_.steps(), ErrorCode::DimensionMismatch,
                "draws do not match the simulation grid");
        discount_.resize(fine_.steps() + 1);
        discount_[0] = 1.0;
        double integral = 0.0;
        for (std::size_t k = 0; k < fine_.steps(); ++k) {
            integral += driver_.discount(fine_.time(k)) * fine_.dt();
            discount_[k + 1] = std::exp(integral);
        }
        const std::size_t n = sde_.state_dim;
        state_.resize(draws_.paths() * n);
        accum_.resize(draws_.paths());
        reset_cache();
    }

    std::size_t blocks() const noexcept { return coarse_.steps(); }
    std::size_t paths() const noexcept { return draws_.paths(); }
    const TimeGrid& coarse_grid() const noexcept { return coarse_; }
    std::span<const double> discount() const noexcept { return discount_; }

    void prepare(std::span<const double> gamma, std::size_t block) {
        bool reusable = block >= cached_block_;
        for (std::size_t j = 0; reusable && j < cached_block_; ++j) reusable = cached_gamma_[j] == gamma[j];
        if (!reusable) reset_cache();
        if (block > cached_block_) {
            advance(gamma, cached_block_, block);
            for (std::size_t j = cached_block_; j < block; ++j) cached_gamma_[j] = gamma[j];
            cached_block_ = block;
        }
    }

    /// Estimate of the penalized value; gamma must agree with the prepared prefix.
    Estimate evaluate(std::span<const double> gamma) const {
        require(gamma.size() == blocks(), ErrorCode::DimensionMismatch, "scenario has the wrong length");
        for (std::size_t j = 0; j < cached_block_; ++j)
            require(cached_gamma_[j] == gamma[j], ErrorCode::InvalidArgument,
                    "scenario prefix differs from the prepared one");
        const std::size_t n = sde_.state_dim;
        const std::size_t first = cached_block_ * substeps_;
        ChunkedMoments moments(paths());
        for_each_chunk(paths(), [&](std::size_t chunk, std::size_t begin, std::size_t end) {
            detail::StepScratch w(n, sde_.control_dim);
            std::vector<double> x(n);
            for (std::size_t p = begin; p < end; ++p) {
                std::copy_n(state_.begin() + static_cast<std::ptrdiff_t>(p * n), n, x.begin());
                double acc = accum_[p];
                run_steps(p, gamma, first, fine_.steps(), x, acc, w);
                acc += discount_.back() * driver_.terminal(std::span<const double>(x));
                moments.add(chunk, acc);
            }
        });
        auto est = moments.finish();
        est.mean -= penalty(gamma);
        return est;
    }

    /// Full evaluation from t = 0, independent of the cache.
    Estimate evaluate_fresh(std::span<const double> gamma) {
        reset_cache();
        return evaluate(gamma);
    }

    /// sum_k Lambda_k l(gamma_k) dt on the simulation grid.
    double penalty(std::span<const double> gamma) const {
        double sum = 0.0;
        for (std::size_t k = 0; k < fine_.steps(); ++k)
            sum += discount_[k] * gen_.penalty_value(gamma[k / substeps_]);
        return sum * fine_.dt();
    }

private:
    void reset_cache() {
        const std::size_t n = sde_.state_dim;
        for (std::size_t p = 0; p < draws_.paths(); ++p)
            std::copy(sde_.x0.begin(), sde_.x0.end(), state_.begin() + static_cast<std::ptrdiff_t>(p * n));
        std::fill(accum_.begin(), accum_.end(), 0.0);
        cached_block_ = 0;
        cached_gamma_.assign(blocks(), 0.0);
    }

    void advance(std::span<const double> gamma, std::size_t from_block, std::size_t to_block) {
        const std::size_t n = sde_.state_dim;
        for_each_chunk(paths(), [&](std::size_t, std::size_t begin, std::size_t end) {
            detail::StepScratch w(n, sde_.control_dim);
            for (std::size_t p = begin; p < end; ++p) {
                std::span<double> x(state_.data() + p * n, n);
                run_steps(p, gamma, from_block * substeps_, to_block * substeps_, x, accum_[p], w);
            }
        });
    }

    void run_steps(std::size_t p, std::span<const double> gamma, std::size_t from, std::size_t to,
                   std::span<double> x, double& acc, detail::StepScratch& w) const {
        const auto z = draws_.path(p);
        const double dt = fine_.dt();
        for (std::size_t k = from; k < to; ++k) {
            const double t = fine_.time(k);
            const double g = gamma[k / substeps_];
            const double dq = g * dt;
            sde_.control(t, std::span<const double>(x), std::span<double>(w.v));
            acc += discount_[k] * (driver_.running(t, std::span<const double>(x), std::span<const double>(w.v)) * dt +
                                   driver_.qv_running(t, std::span<const double>(x), std::span<const double>(w.v)) * dq);
            detail::euler_step(sde_, t, dt, dq, std::sqrt(dq) * z[k], x, w);
        }
    }

    const Sde& sde_;
    const Driver& driver_;
    const ConvexGenerator& gen_;
    TimeGrid coarse_;
    std::size_t substeps_;
    const NormalDraws& draws_;
    TimeGrid fine_;
    std::vector<double> discount_;
    std::vector<double> state_;
    std::vector<double> accum_;
    std::size_t cached_block_ = 0;
    std::vector<double> cached_gamma_;
};

/// Read-only view of one simulated path handed to path functionals.
struct PathView {
    std::span<const double> increments;  // dB_k
    std::span<const double> bracket;     // d<B>_k
    double dt;

    double terminal() const {
        double sum = 0.0;
        for (double d : increments) sum += d;
        return sum;
    }
};

/// E_{P_gamma}[payoff(path)] - alpha(P_gamma) for a general path functional
/// payoff: double(const PathView&).
template <class Payoff>
class PathFunctionalObjective {
public:
    PathFunctionalObjective(const Payoff& payoff, const ConvexGenerator& gen, TimeGrid coarse, std::size_t substeps,
                            const NormalDraws& draws)
        : payoff_(payoff), gen_(gen), coarse_(coarse), substeps_(substeps), draws_(draws),
          fine_(coarse.refined(substeps)) {
        require(draws.steps() == fine_.steps(), ErrorCode::DimensionMismatch,
                "draws do not match the simulation grid");
    }

    std::size_t blocks() const noexcept { return coarse_.steps(); }
    std::size_t paths() const noexcept { return draws_.paths(); }
    void prepare(std::span<const double>, std::size_t) {}

    Estimate evaluate(std::span<const double> gamma) const {
        require(gamma.size() == blocks(), ErrorCode::DimensionMismatch, "scenario has the wrong length");
        const std::size_t steps = fine_.steps();
        std::vector<double> bracket(steps), scale(steps);
        for (std::size_t k = 0; k < steps; ++k) {
            bracket[k] = gamma[k / substeps_] * fine_.dt();
            scale[k] = std::sqrt(bracket[k]);
        }
        ChunkedMoments moments(paths());
        for_each_chunk(paths(), [&](std::size_t chunk, std::size_t begin, std::size_t end) {
            std::vector<double> db(steps);
            for (std::size_t p = begin; p < end; ++p) {
                const auto z = draws_.path(p);
                for (std::size_t k = 0; k < steps; ++k) db[k] = scale[k] * z[k];
                moments.add(chunk, payoff_(PathView{db, bracket, fine_.dt()}));
            }
        });
        auto est = moments.finish();
        est.mean -= penalty_cost(DeterministicScenario(coarse_, std::vector<double>(gamma.begin(), gamma.end())), gen_);
        return est;
    }

    Estimate evaluate_fresh(std::span<const double> gamma) { return evaluate(gamma); }

private:
    const Payoff& payoff_;
    const ConvexGenerator& gen_;
    TimeGrid coarse_;
    std::size_t substeps_;
    const NormalDraws& draws_;
    TimeGrid fine_;
};

}  // namespace gexp::scenario
