#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gexp/gcore/error.hpp"

namespace gexp::pde {

/// Growth class of a payoff; anything beyond quadratic is rejected.
struct Growth {
    enum class Kind { Bounded, Polynomial };
    Kind kind = Kind::Bounded;
    int degree = 0;

    static Growth bounded() { return {Kind::Bounded, 0}; }
    static Growth polynomial(int degree) {
        require(degree >= 0 && degree <= 2, ErrorCode::PayoffGrowth,
                "payoff growth beyond quadratic is not supported (degree " + std::to_string(degree) + ")");
        return {Kind::Polynomial, degree};
    }

    static Growth combine(Growth a, Growth b) {
        if (a.kind == Kind::Bounded) return b;
        if (b.kind == Kind::Bounded) return a;
        return polynomial(std::max(a.degree, b.degree));
    }
};

/// phi(B_T) for a function of the terminal value.
class MarkovPayoff {
public:
    MarkovPayoff(std::function<double(double)> evaluator, Growth growth, double padding = 0.0)
        : evaluator_(std::move(evaluator)), growth_(growth), padding_(padding) {
        require(static_cast<bool>(evaluator_), ErrorCode::InvalidArgument, "payoff evaluator is empty");
        if (growth_.kind == Growth::Kind::Polynomial) (void)Growth::polynomial(growth_.degree);
    }

    static MarkovPayoff constant(double value) {
        return {[value](double) { return value; }, Growth::bounded()};
    }
    static MarkovPayoff identity() {
        return {[](double x) { return x; }, Growth::polynomial(1)};
    }
    static MarkovPayoff square() {
        return {[](double x) { return x * x; }, Growth::polynomial(2)};
    }
    /// sum_i coefficients[i] x^i; trailing zero coefficients are ignored.
    static MarkovPayoff polynomial(std::vector<double> coefficients) {
        while (!coefficients.empty() && coefficients.back() == 0.0) coefficients.pop_back();
        const int degree = coefficients.empty() ? 0 : static_cast<int>(coefficients.size()) - 1;
        auto growth = degree == 0 ? Growth::bounded() : Growth::polynomial(degree);
        return {[c = std::move(coefficients)](double x) {
                    double acc = 0.0;
                    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
                    return acc;
                },
                growth};
    }
    static MarkovPayoff call(double strike) {
        return {[strike](double x) { return x > strike ? x - strike : 0.0; }, Growth::polynomial(1),
                std::abs(strike)};
    }
    /// Logistic step 1 / (1 + exp(-(x - center) / width)).
    static MarkovPayoff smooth_indicator(double center, double width) {
        require(width > 0.0, ErrorCode::InvalidArgument, "smoothed indicator needs width > 0");
        return {[center, width](double x) { return 1.0 / (1.0 + std::exp(-(x - center) / width)); },
                Growth::bounded(), std::abs(center) + 10.0 * width};
    }

    double operator()(double x) const { return evaluator_(x); }
    const Growth& growth() const noexcept { return growth_; }
    /// Extra truncation radius needed beyond the Gaussian bound.
    double padding() const noexcept { return padding_; }

    friend MarkovPayoff operator-(const MarkovPayoff& a, const MarkovPayoff& b) {
        return {[a, b](double x) { return a(x) - b(x); }, Growth::combine(a.growth_, b.growth_),
                std::max(a.padding_, b.padding_)};
    }
    friend MarkovPayoff operator+(const MarkovPayoff& a, double shift) {
        return {[a, shift](double x) { return a(x) + shift; }, a.growth_, a.padding_};
    }

private:
    std::function<double(double)> evaluator_;
    Growth growth_;
    double padding_ = 0.0;
};

/// phi(B_{t_1}, B_{t_2} - B_{t_1}, ...) for up to three observation times.
class MultiTimePayoff {
public:
    static constexpr std::size_t kMaxObservations = 3;

    MultiTimePayoff(std::vector<double> times, std::function<double(std::span<const double>)> evaluator,
                    Growth growth)
        : times_(std::move(times)), evaluator_(std::move(evaluator)), growth_(growth) {
        require(!times_.empty() && times_.size() <= kMaxObservations, ErrorCode::InvalidArgument,
                "multi-time payoff needs 1 to 3 observation times");
        for (std::size_t i = 0; i < times_.size(); ++i)
            require(times_[i] > (i == 0 ? 0.0 : times_[i - 1]), ErrorCode::InvalidArgument,
                    "observation times must be positive and strictly increasing");
        require(static_cast<bool>(evaluator_), ErrorCode::InvalidArgument, "payoff evaluator is empty");
    }

    const std::vector<double>& times() const noexcept { return times_; }
    std::size_t arity() const noexcept { return times_.size(); }
    const Growth& growth() const noexcept { return growth_; }
    double operator()(std::span<const double> increments) const { return evaluator_(increments); }

private:
    std::vector<double> times_;
    std::function<double(std::span<const double>)> evaluator_;
    Growth growth_;
};

}  // namespace gexp::pde
