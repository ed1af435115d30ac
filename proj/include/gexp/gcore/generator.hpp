#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gexp/gcore/error.hpp"

namespace gexp {

/// Admissible variance rates [c_lo, c_hi] of the canonical process.
struct VolatilityInterval {
    double c_lo;
    double c_hi;

    VolatilityInterval(double lo, double hi) : c_lo(lo), c_hi(hi) {
        require(std::isfinite(lo) && std::isfinite(hi), ErrorCode::InvalidArgument,
                "volatility interval bounds must be finite");
        require(lo > 0.0, ErrorCode::InvalidArgument, "volatility interval needs c_lo > 0");
        require(lo <= hi, ErrorCode::InvalidArgument, "volatility interval needs c_lo <= c_hi");
    }

    bool contains(double c) const noexcept { return c >= c_lo && c <= c_hi; }
    double clamp(double c) const noexcept { return std::clamp(c, c_lo, c_hi); }
    double width() const noexcept { return c_hi - c_lo; }
};

struct ZeroPenalty {};

/// l(c) = kappa (c - anchor)^2
struct QuadraticPenalty {
    double kappa;
    double anchor;
};

/// Piecewise-linear interpolation of (knots, values); knots strictly increasing.
struct TabulatedPenalty {
    std::vector<double> knots;
    std::vector<double> values;

    double operator()(double c) const {
        if (c <= knots.front()) return values.front();
        if (c >= knots.back()) return values.back();
        const auto hi = static_cast<std::size_t>(
            std::upper_bound(knots.begin(), knots.end(), c) - knots.begin());
        const std::size_t lo = hi - 1;
        const double w = (c - knots[lo]) / (knots[hi] - knots[lo]);
        return values[lo] + w * (values[hi] - values[lo]);
    }
};

using PenaltyFunction = std::variant<ZeroPenalty, QuadraticPenalty, TabulatedPenalty>;

inline double penalty_at(const PenaltyFunction& penalty, double c) {
    return std::visit(
        [c](const auto& p) -> double {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ZeroPenalty>) {
                return 0.0;
            } else if constexpr (std::is_same_v<P, QuadraticPenalty>) {
                const double d = c - p.anchor;
                return p.kappa * d * d;
            } else {
                return p(c);
            }
        },
        penalty);
}

/// The pair (Theta, l) generating G~(a) = sup_{c in Theta} (c a / 2 - l(c)).
///
/// Construction validates that l is convex, nonnegative and vanishes somewhere
/// on Theta, which is what makes G~(0) = 0 and the domination by
/// G(a) = (c_hi a^+ - c_lo a^-)/2 hold.
class ConvexGenerator {
public:
    ConvexGenerator(VolatilityInterval theta, PenaltyFunction penalty)
        : theta_(theta), penalty_(std::move(penalty)) {
        std::visit([this](const auto& p) { validate(p); }, penalty_);
    }

    static ConvexGenerator sublinear(VolatilityInterval theta) { return {theta, ZeroPenalty{}}; }

    const VolatilityInterval& theta() const noexcept { return theta_; }
    const PenaltyFunction& penalty() const noexcept { return penalty_; }

    double penalty_value(double c) const { return penalty_at(penalty_, c); }

    bool is_sublinear() const noexcept {
        if (std::holds_alternative<ZeroPenalty>(penalty_)) return true;
        if (const auto* q = std::get_if<QuadraticPenalty>(&penalty_)) return q->kappa == 0.0;
        return false;
    }

    /// True when G~ is continuously differentiable (strictly convex penalty).
    bool is_differentiable() const noexcept {
        if (const auto* q = std::get_if<QuadraticPenalty>(&penalty_)) return q->kappa > 0.0;
        return theta_.c_lo == theta_.c_hi;
    }

    /// The same interval with the zero penalty: the dominating G-expectation.
    ConvexGenerator dominating() const { return sublinear(theta_); }

    /// Narrow Theta, keeping the penalty; the penalty must still vanish inside.
    ConvexGenerator restricted(VolatilityInterval inner) const {
        require(inner.c_lo >= theta_.c_lo && inner.c_hi <= theta_.c_hi, ErrorCode::InvalidArgument,
                "restricted interval must lie inside the generator's interval");
        return {inner, penalty_};
    }

private:
    void validate(const ZeroPenalty&) const {}

    void validate(const QuadraticPenalty& p) const {
        require(std::isfinite(p.kappa) && p.kappa >= 0.0, ErrorCode::InvalidArgument,
                "quadratic penalty needs kappa >= 0");
        require(theta_.contains(p.anchor), ErrorCode::InvalidArgument,
                "quadratic penalty anchor must lie in the volatility interval");
    }

    void validate(const TabulatedPenalty& p) const {
        const auto& k = p.knots;
        const auto& v = p.values;
        require(k.size() >= 2 && k.size() == v.size(), ErrorCode::InvalidArgument,
                "tabulated penalty needs >= 2 knots and one value per knot");
        for (std::size_t i = 0; i < k.size(); ++i) {
            require(std::isfinite(k[i]) && std::isfinite(v[i]), ErrorCode::InvalidArgument,
                    "tabulated penalty entries must be finite");
            require(v[i] >= 0.0, ErrorCode::InvalidArgument, "tabulated penalty must be nonnegative");
            if (i > 0)
                require(k[i] > k[i - 1], ErrorCode::InvalidArgument,
                        "tabulated penalty knots must be strictly increasing");
        }
        require(k.front() <= theta_.c_lo && k.back() >= theta_.c_hi, ErrorCode::InvalidArgument,
                "tabulated penalty knots must cover the volatility interval");
        for (std::size_t i = 1; i + 1 < k.size(); ++i) {
            const double left = (v[i] - v[i - 1]) / (k[i] - k[i - 1]);
            const double right = (v[i + 1] - v[i]) / (k[i + 1] - k[i]);
            require(right >= left - 1e-12 * (1.0 + std::abs(left)), ErrorCode::InvalidArgument,
                    "tabulated penalty must be convex (nondecreasing slopes)");
        }
        double lowest = std::min(p(theta_.c_lo), p(theta_.c_hi));
        for (std::size_t i = 0; i < k.size(); ++i)
            if (theta_.contains(k[i])) lowest = std::min(lowest, v[i]);
        require(lowest == 0.0, ErrorCode::InvalidArgument,
                "tabulated penalty must attain 0 inside the volatility interval");
    }

    VolatilityInterval theta_;
    PenaltyFunction penalty_;
};

namespace detail {

/// Candidate maximizers of c -> c a / 2 - l(c) for a piecewise-linear l:
/// the objective is linear between knots, so interval ends suffice.
inline std::vector<double> tabulated_candidates(const ConvexGenerator& gen, const TabulatedPenalty& p) {
    std::vector<double> out{gen.theta().c_lo};
    for (double k : p.knots)
        if (k > gen.theta().c_lo && k < gen.theta().c_hi) out.push_back(k);
    if (gen.theta().c_hi > gen.theta().c_lo) out.push_back(gen.theta().c_hi);
    return out;
}

}  // namespace detail

/// Smallest maximizer of c -> c a / 2 - l(c) over Theta, i.e. 2 G~'(a)
/// wherever G~ is differentiable.
inline double gtilde_maximizer(const ConvexGenerator& gen, double a) {
    const auto& theta = gen.theta();
    return std::visit(
        [&](const auto& p) -> double {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ZeroPenalty>) {
                return a > 0.0 ? theta.c_hi : theta.c_lo;
            } else if constexpr (std::is_same_v<P, QuadraticPenalty>) {
                if (p.kappa == 0.0) return a > 0.0 ? theta.c_hi : theta.c_lo;
                // stationarity a/2 = 2 kappa (c - anchor)
                return theta.clamp(p.anchor + a / (4.0 * p.kappa));
            } else {
                double best_c = theta.c_lo;
                double best = 0.5 * best_c * a - p(best_c);
                for (double c : detail::tabulated_candidates(gen, p)) {
                    const double value = 0.5 * c * a - p(c);
                    if (value > best) {
                        best = value;
                        best_c = c;
                    }
                }
                return best_c;
            }
        },
        gen.penalty());
}

/// G~(a) = sup_{c in Theta} (c a / 2 - l(c)).
inline double gtilde_eval(const ConvexGenerator& gen, double a) {
    if (a == 0.0) {
        // G~(0) = -min l = 0, exactly.
        return 0.0;
    }
    const double c = gtilde_maximizer(gen, a);
    return 0.5 * c * a - gen.penalty_value(c);
}

/// Sublinear envelope G(a) = (c_hi a^+ - c_lo a^-) / 2.
inline double dominating_g(const ConvexGenerator& gen, double a) noexcept {
    return a >= 0.0 ? 0.5 * gen.theta().c_hi * a : 0.5 * gen.theta().c_lo * a;
}

/// Smallest zero of the penalty in Theta.
inline double penalty_minimizer(const ConvexGenerator& gen) { return gtilde_maximizer(gen, 0.0); }

/// sup over the sample points of |G~(2a) - 2 G~(a)|; zero for positively
/// homogeneous (sublinear) generators.
inline double homogeneity_gap(const ConvexGenerator& gen, std::span<const double> samples) {
    double gap = 0.0;
    for (double a : samples) gap = std::max(gap, std::abs(gtilde_eval(gen, 2.0 * a) - 2.0 * gtilde_eval(gen, a)));
    return gap;
}

inline std::string describe(const PenaltyFunction& penalty) {
    return std::visit(
        [](const auto& p) -> std::string {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ZeroPenalty>) return "zero";
            else if constexpr (std::is_same_v<P, QuadraticPenalty>) return "quadratic";
            else return "tabulated";
        },
        penalty);
}

}  // namespace gexp
