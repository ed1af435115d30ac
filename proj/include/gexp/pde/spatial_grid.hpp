#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "gexp/gcore/error.hpp"

namespace gexp::pde {

/// M uniform nodes on [-x_max, x_max]; M odd so that x = 0 is a node.
class SpatialGrid {
public:
    SpatialGrid(double x_max, std::size_t nodes) : x_max_(x_max), nodes_(nodes) {
        require(nodes >= 3, ErrorCode::GridTooCoarse, "spatial grid needs at least 3 nodes");
        require(nodes % 2 == 1, ErrorCode::InvalidArgument, "spatial grid needs an odd node count");
        require(std::isfinite(x_max) && x_max > 0.0, ErrorCode::InvalidArgument,
                "spatial grid needs x_max > 0");
    }

    /// Truncation 6 sqrt(c_hi T) + padding, so Gaussian tails beyond the
    /// boundary are negligible for quadratic-growth data.
    static SpatialGrid for_horizon(double c_hi, double horizon, std::size_t nodes, double padding = 0.0) {
        return {6.0 * std::sqrt(c_hi * horizon) + std::max(0.0, padding), nodes};
    }

    double x_max() const noexcept { return x_max_; }
    std::size_t size() const noexcept { return nodes_; }
    double spacing() const noexcept { return 2.0 * x_max_ / static_cast<double>(nodes_ - 1); }
    std::size_t center() const noexcept { return (nodes_ - 1) / 2; }
    double node(std::size_t j) const noexcept {
        // symmetric evaluation keeps x_center == 0 exactly
        const auto offset = static_cast<double>(j) - static_cast<double>(center());
        return offset * spacing();
    }

    std::vector<double> nodes() const {
        std::vector<double> out(nodes_);
        for (std::size_t j = 0; j < nodes_; ++j) out[j] = node(j);
        return out;
    }

    /// Linear interpolation of nodal values; flat extrapolation outside.
    double interpolate(const std::vector<double>& values, double x) const {
        const double pos = (x + x_max_) / spacing();
        if (pos <= 0.0) return values.front();
        if (pos >= static_cast<double>(nodes_ - 1)) return values.back();
        const auto j = static_cast<std::size_t>(pos);
        const double w = pos - static_cast<double>(j);
        return (1.0 - w) * values[j] + w * values[j + 1];
    }

private:
    double x_max_;
    std::size_t nodes_;
};

}  // namespace gexp::pde
