#pragma once

#include <cmath>
#include <cstddef>
#include <optional>

#include "gexp/gcore/error.hpp"

namespace gexp {

/// Uniform grid t_k = kT/N on [0, T].
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
        require(steps >= 1, ErrorCode::InvalidArgument, "TimeGrid needs N >= 1");
        require(std::isfinite(horizon) && horizon > 0.0, ErrorCode::InvalidArgument,
                "TimeGrid needs a finite horizon T > 0");
    }

    double horizon() const noexcept { return horizon_; }
    std::size_t steps() const noexcept { return steps_; }
    double dt() const noexcept { return horizon_ / static_cast<double>(steps_); }
    double time(std::size_t k) const noexcept {
        return horizon_ * static_cast<double>(k) / static_cast<double>(steps_);
    }

    /// Same horizon, each step split into `factor` pieces.
    TimeGrid refined(std::size_t factor) const { return TimeGrid(horizon_, steps_ * factor); }

    /// Index of the node equal to `t` (within a relative 1e-9 of a step), if any.
    std::optional<std::size_t> node_of(double t) const {
        const double pos = t / dt();
        const double k = std::round(pos);
        if (k < 0.0 || k > static_cast<double>(steps_) || std::abs(pos - k) > 1e-9) return std::nullopt;
        return static_cast<std::size_t>(k);
    }

    /// Interval [t_k, t_{k+1}) that contains t; the last interval also owns T.
    std::size_t interval_of(double t) const noexcept {
        if (t <= 0.0) return 0;
        const auto k = static_cast<std::size_t>(std::floor(t / dt() + 1e-9));
        return k >= steps_ ? steps_ - 1 : k;
    }

private:
    double horizon_;
    std::size_t steps_;
};

}  // namespace gexp
