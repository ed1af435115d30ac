#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "gexp/gcore/error.hpp"
#include "gexp/gcore/scenario_measure.hpp"
#include "gexp/gcore/time_grid.hpp"
#include "gexp/support/parallel.hpp"

namespace gexp::scenario {

/// Engine for one path: seeded from (master seed, path index) only, so a
/// path's draws never depend on scheduling or worker count.
inline std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t path) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
    return std::mt19937_64(seq);
}

/// Standard normal draws, path-major. Reused across scenarios: every
/// scenario is evaluated on the same draws (common random numbers).
class NormalDraws {
public:
    NormalDraws(std::size_t n_paths, std::size_t steps, std::uint64_t seed)
        : n_paths_(n_paths), steps_(steps), seed_(seed), z_(n_paths * steps) {
        require(n_paths >= 1, ErrorCode::InvalidArgument, "need at least one path");
        for_each_chunk(n_paths, [&](std::size_t, std::size_t begin, std::size_t end) {
            for (std::size_t p = begin; p < end; ++p) {
                auto engine = path_engine(seed, p);
                std::normal_distribution<double> normal;
                for (std::size_t k = 0; k < steps; ++k) z_[p * steps + k] = normal(engine);
            }
        });
    }

    std::size_t paths() const noexcept { return n_paths_; }
    std::size_t steps() const noexcept { return steps_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::span<const double> path(std::size_t p) const { return {z_.data() + p * steps_, steps_}; }

    /// The first `n` paths (identical draws, cheaper pilot runs).
    NormalDraws head(std::size_t n) const {
        NormalDraws out;
        out.n_paths_ = std::min(n, n_paths_);
        out.steps_ = steps_;
        out.seed_ = seed_;
        out.z_.assign(z_.begin(), z_.begin() + static_cast<std::ptrdiff_t>(out.n_paths_ * steps_));
        return out;
    }

private:
    NormalDraws() = default;

    std::size_t n_paths_ = 0;
    std::size_t steps_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<double> z_;
};

/// Realized increments of B and of <B> under one scenario measure.
struct PathEnsemble {
    DeterministicScenario scenario;   // on the simulation grid
    std::size_t n_paths;
    std::uint64_t seed;
    std::vector<double> increments;   // dB, path-major
    std::vector<double> bracket;      // d<B>_k = gamma_k dt, identical on every path

    const TimeGrid& grid() const noexcept { return scenario.grid(); }
    std::size_t steps() const noexcept { return scenario.grid().steps(); }
    std::span<const double> path(std::size_t p) const { return {increments.data() + p * steps(), steps()}; }

    double terminal(std::size_t p) const {
        double sum = 0.0;
        for (double d : path(p)) sum += d;
        return sum;
    }
    double bracket_terminal() const {
        double sum = 0.0;
        for (double d : bracket) sum += d;
        return sum;
    }
};

/// Increments dB_k = sqrt(gamma_k dt) Z_k on the scenario grid refined by `substeps`.
inline PathEnsemble realize(const DeterministicScenario& scn, const NormalDraws& draws, std::size_t substeps = 1) {
    const auto fine = scn.refined(substeps);
    const std::size_t steps = fine.grid().steps();
    require(draws.steps() == steps, ErrorCode::DimensionMismatch, "draws do not match the simulation grid");
    PathEnsemble out{fine, draws.paths(), draws.seed(), std::vector<double>(draws.paths() * steps),
                     std::vector<double>(steps)};
    std::vector<double> scale(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        out.bracket[k] = fine.gamma(k) * fine.grid().dt();
        scale[k] = std::sqrt(out.bracket[k]);
    }
    for (std::size_t p = 0; p < draws.paths(); ++p) {
        const auto z = draws.path(p);
        for (std::size_t k = 0; k < steps; ++k) out.increments[p * steps + k] = scale[k] * z[k];
    }
    return out;
}

inline PathEnsemble simulate_b(const DeterministicScenario& scn, std::size_t n_paths, std::uint64_t seed,
                               std::size_t substeps = 1) {
    require(substeps >= 1, ErrorCode::InvalidArgument, "substeps must be >= 1");
    return realize(scn, NormalDraws(n_paths, scn.grid().steps() * substeps, seed), substeps);
}

/// Sample mean and its standard error.
struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Accumulates per-path samples chunk by chunk; the reduction order is fixed.
class ChunkedMoments {
public:
    explicit ChunkedMoments(std::size_t n) : n_(n), sum_(chunk_count(n)), sumsq_(chunk_count(n)) {}

    void add(std::size_t chunk, double sample) {
        sum_[chunk] += sample;
        sumsq_[chunk] += sample * sample;
    }

    Estimate finish() const {
        const double n = static_cast<double>(n_);
        const double mean = ordered_sum(sum_) / n;
        if (n_ < 2) return {mean, 0.0};
        const double var = std::max(0.0, (ordered_sum(sumsq_) - n * mean * mean) / (n - 1.0));
        return {mean, std::sqrt(var / n)};
    }

private:
    std::size_t n_;
    std::vector<double> sum_;
    std::vector<double> sumsq_;
};

}  // namespace gexp::scenario
