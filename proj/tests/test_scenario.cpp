#include <catch_amalgamated.hpp>

#include <cmath>
#include <span>
#include <vector>

#include "gexp/scenario/robust.hpp"

using namespace gexp;
using namespace gexp::scenario;
using Catch::Approx;

namespace {

const ConvexGenerator kZero = ConvexGenerator::sublinear({1.0, 4.0});
const ConvexGenerator kQuad{{1.0, 4.0}, QuadraticPenalty{1.0, 2.0}};

auto zero_coef() {
    return [](double, std::span<const double>, std::span<const double>, std::span<double> out) {
        for (double& o : out) o = 0.0;
    };
}
auto unit_vol() {
    return [](double, std::span<const double>, std::span<const double>, std::span<double> out) {
        for (double& o : out) o = 1.0;
    };
}
auto no_control() {
    return [](double, std::span<const double>, std::span<double> v) {
        for (double& o : v) o = 0.0;
    };
}

double terminal_square(const PathView& path) {
    const double b = path.terminal();
    return b * b;
}

// X = B, so the cost functional is the robust expectation of Phi(B_T)
auto brownian_sde() { return make_controlled_sde(1, 1, {0.0}, zero_coef(), zero_coef(), unit_vol(), no_control()); }

template <class Terminal>
auto terminal_driver(Terminal phi) {
    auto zero = [](double, std::span<const double>, std::span<const double>) { return 0.0; };
    return make_linear_driver([](double) { return 0.0; }, zero, zero, phi);
}

OptimizerConfig quick_config() {
    OptimizerConfig cfg;
    cfg.starts = 4;
    cfg.max_sweeps = 20;
    cfg.tolerance = 1e-10;
    return cfg;
}

}  // namespace

TEST_CASE("simulated increments have the scenario variance") {
    const TimeGrid grid(1.0, 8);
    const auto ens = simulate_b(DeterministicScenario::constant(grid, 1.0), 100000, 7);
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t p = 0; p < ens.n_paths; ++p) {
        const double b = ens.terminal(p);
        sum += b;
        sumsq += b * b;
    }
    const double n = static_cast<double>(ens.n_paths);
    const double var = sumsq / n - (sum / n) * (sum / n);
    CHECK(std::abs(var - 1.0) <= 4.0 / std::sqrt(n));
    CHECK(std::abs(sum / n) <= 4.0 / std::sqrt(n));
}

TEST_CASE("same seed gives bitwise identical paths") {
    const TimeGrid grid(1.0, 8);
    const auto scn = DeterministicScenario(grid, {1.0, 2.0, 3.0, 4.0, 1.5, 2.5, 3.5, 1.0});
    const auto a = simulate_b(scn, 3000, 42, 2);
    const auto b = simulate_b(scn, 3000, 42, 2);
    CHECK(a.increments == b.increments);
    const auto c = simulate_b(scn, 3000, 43, 2);
    CHECK(a.increments != c.increments);
}

TEST_CASE("quadratic variation is the deterministic bracket") {
    const TimeGrid grid(1.0, 8);  // dt exact in binary
    CHECK(simulate_b(DeterministicScenario::constant(grid, 1.0), 10, 1).bracket_terminal() == 1.0);
    CHECK(simulate_b(DeterministicScenario::constant(grid, 4.0), 10, 1).bracket_terminal() == 4.0);
    const auto scn = DeterministicScenario(grid, {1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0});
    CHECK(simulate_b(scn, 10, 1, 4).bracket_terminal() == scn.bracket_total());
}

TEST_CASE("state simulation: trivial dynamics") {
    const TimeGrid grid(1.0, 8);
    const auto ens = simulate_b(DeterministicScenario::constant(grid, 2.0), 200, 3);

    const auto frozen = make_controlled_sde(2, 1, {1.5, -2.0}, zero_coef(), zero_coef(), zero_coef(), no_control());
    const auto still = simulate_state(frozen, ens);
    for (std::size_t p = 0; p < still.n_paths; ++p) {
        CHECK(still.state(p, 8)[0] == 1.5);
        CHECK(still.state(p, 8)[1] == -2.0);
    }

    const auto drifting = make_controlled_sde(1, 1, {0.25}, unit_vol(), zero_coef(), zero_coef(), no_control());
    const auto moved = simulate_state(drifting, ens);
    for (std::size_t p = 0; p < moved.n_paths; ++p) CHECK(moved.state(p, 8)[0] == 1.25);
}

TEST_CASE("geometric state is a martingale under every scenario") {
    const TimeGrid grid(1.0, 16);
    const auto sde = make_controlled_sde(
        1, 1, {1.0}, zero_coef(), zero_coef(),
        [](double, std::span<const double> x, std::span<const double>, std::span<double> out) { out[0] = x[0]; },
        no_control());
    for (double g : {1.0, 4.0}) {
        const auto ens = simulate_b(DeterministicScenario::constant(grid, g), 100000, 5);
        const auto paths = simulate_state(sde, ens);
        double sum = 0.0, sumsq = 0.0;
        for (std::size_t p = 0; p < paths.n_paths; ++p) {
            const double x = paths.state(p, 16)[0];
            sum += x;
            sumsq += x * x;
        }
        const double n = static_cast<double>(paths.n_paths);
        const double mean = sum / n;
        const double se = std::sqrt((sumsq / n - mean * mean) / n);
        INFO("gamma " << g << " mean " << mean << " se " << se);
        CHECK(std::abs(mean - 1.0) <= 4.0 * se);
    }
}

TEST_CASE("exploding state is reported") {
    const TimeGrid grid(1.0, 8);
    const auto ens = simulate_b(DeterministicScenario::constant(grid, 1.0), 4, 1);
    const auto sde = make_controlled_sde(
        1, 1, {10.0},
        [](double, std::span<const double> x, std::span<const double>, std::span<double> out) {
            out[0] = x[0] * x[0] * x[0] * x[0];
        },
        zero_coef(), zero_coef(), no_control());
    try {
        simulate_state(sde, ens);
        FAIL("expected NonFiniteState");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonFiniteState);
    }
}

TEST_CASE("robust expectation of the terminal increment vanishes") {
    const TimeGrid grid(1.0, 4);
    const MonteCarloConfig mc{20000, 11, 1};
    const auto res = robust_expectation([](const PathView& p) { return p.terminal(); }, kQuad, grid, quick_config(), mc);
    INFO("value " << res.value << " se " << res.std_error);
    CHECK(std::abs(res.value) <= 3.0 * res.std_error + 1e-3);
}

TEST_CASE("robust expectation of the squared terminal value") {
    const TimeGrid grid(1.0, 4);
    const MonteCarloConfig mc{20000, 11, 1};

    const auto zero = robust_expectation(terminal_square, kZero, grid, quick_config(), mc);
    INFO("zero penalty value " << zero.value << " se " << zero.std_error);
    CHECK(std::abs(zero.value - 4.0) <= 3.0 * zero.std_error + 0.05);
    for (double g : zero.gamma) CHECK(g == Approx(4.0).margin(1e-3));

    const auto quad = robust_expectation(terminal_square, kQuad, grid, quick_config(), mc);
    INFO("quadratic value " << quad.value << " se " << quad.std_error);
    CHECK(std::abs(quad.value - 2.25) <= 3.0 * quad.std_error + 0.05);
    // the sample second moment tilts the argmax slightly; the oracle is 2.5
    for (double g : quad.gamma) CHECK(g == Approx(2.5).margin(0.1));
}

TEST_CASE("reported value dominates every traced candidate") {
    const TimeGrid grid(1.0, 4);
    const MonteCarloConfig mc{5000, 2, 1};
    auto payoff = [](const PathView& p) {
        const double b = p.terminal();
        return std::max(b - 0.5, 0.0) - 0.3 * b * b;
    };
    const auto res = robust_expectation(payoff, kQuad, grid, quick_config(), mc);
    for (const auto& entry : res.trace) CHECK(entry.value <= res.value + 1e-12);
    for (double v : res.start_values) CHECK(v <= res.value + 1e-12);
    for (double g : res.gamma) {
        CHECK(g >= 1.0);
        CHECK(g <= 4.0);
    }
}

TEST_CASE("results are reproducible with fixed seeds") {
    const TimeGrid grid(1.0, 4);
    const MonteCarloConfig mc{4000, 9, 2};
    const auto a = robust_expectation(terminal_square, kQuad, grid, quick_config(), mc);
    const auto b = robust_expectation(terminal_square, kQuad, grid, quick_config(), mc);
    CHECK(a.value == b.value);
    CHECK(a.std_error == b.std_error);
    CHECK(a.gamma == b.gamma);
}

TEST_CASE("enlarging the volatility interval cannot lower the value") {
    const TimeGrid grid(1.0, 2);
    const MonteCarloConfig mc{5000, 4, 1};
    const ConvexGenerator narrow{{1.5, 3.0}, QuadraticPenalty{1.0, 2.0}};
    const ConvexGenerator wide{{1.0, 4.0}, QuadraticPenalty{1.0, 2.0}};
    auto payoff = [](const PathView& p) {
        const double b = p.terminal();
        return b * b * b * b / 6.0 - b * b;
    };
    const auto small = robust_expectation(payoff, narrow, grid, quick_config(), mc);
    const auto large = robust_expectation(payoff, wide, grid, quick_config(), mc);
    CHECK(small.value <= large.value + 1e-9);
}

TEST_CASE("penalized value is concave along scenario segments for bracket payoffs") {
    const TimeGrid grid(1.0, 4);
    const NormalDraws draws(100, 4, 1);
    auto payoff = [](const PathView& p) {
        double q = 0.0;
        for (double d : p.bracket) q += d;
        return 0.7 * q;
    };
    PathFunctionalObjective<decltype(payoff)> obj(payoff, kQuad, grid, 1, draws);
    const std::vector<double> a{1.0, 3.0, 2.0, 4.0}, b{4.0, 1.0, 1.5, 2.0};
    std::vector<double> mid(4);
    for (std::size_t k = 0; k < 4; ++k) mid[k] = 0.5 * (a[k] + b[k]);
    CHECK(obj.evaluate(mid).mean >= 0.5 * obj.evaluate(a).mean + 0.5 * obj.evaluate(b).mean - 1e-12);
}

TEST_CASE("cost functional with zero data is the negative minimal penalty") {
    const TimeGrid grid(1.0, 4);
    const MonteCarloConfig mc{500, 1, 1};
    const auto sde = brownian_sde();
    const auto driver = terminal_driver([](std::span<const double>) { return 0.0; });
    const auto res = eval_cost_functional(driver, sde, kQuad, grid, quick_config(), mc);
    CHECK(res.value == Approx(0.0).margin(1e-9));
    for (double g : res.gamma) CHECK(g == Approx(2.0).margin(1e-3));
}

TEST_CASE("cost functional reduces to the robust expectation") {
    const TimeGrid grid(1.0, 4);
    const MonteCarloConfig mc{5000, 3, 2};
    const auto sde = brownian_sde();
    const auto driver = terminal_driver([](std::span<const double> x) { return x[0] * x[0]; });
    const auto cost = eval_cost_functional(driver, sde, kQuad, grid, quick_config(), mc);
    const auto direct = robust_expectation(terminal_square, kQuad, grid, quick_config(), mc);
    CHECK(cost.value == Approx(direct.value).margin(1e-9));

    const auto scn = DeterministicScenario(grid, {1.0, 2.0, 3.0, 4.0});
    const NormalDraws draws(5000, 8, 3);
    PathFunctionalObjective<decltype(&terminal_square)> path_obj(&terminal_square, kQuad, grid, 2, draws);
    CHECK(scenario_cost(driver, sde, kQuad, scn, mc).mean ==
          Approx(path_obj.evaluate(scn.gamma()).mean).margin(1e-10));
}

TEST_CASE("discounting weights both cost and penalty") {
    const TimeGrid grid(1.0, 8);
    const MonteCarloConfig mc{10, 1, 1};
    const auto sde = brownian_sde();
    auto zero = [](double, std::span<const double>, std::span<const double>) { return 0.0; };
    const auto driver = make_linear_driver([](double) { return -0.5; }, zero, zero,
                                           [](std::span<const double>) { return 3.0; });
    const auto scn = DeterministicScenario::constant(grid, 3.0);
    // Lambda_k = exp(-0.5 t_k); cost = 3 e^{-1/2} - l(3) sum_k Lambda_k dt
    double weight = 0.0;
    for (std::size_t k = 0; k < 8; ++k) weight += std::exp(-0.5 * grid.time(k)) * grid.dt();
    CHECK(scenario_cost(driver, sde, kQuad, scn, mc).mean == Approx(3.0 * std::exp(-0.5) - weight).margin(1e-12));
}

TEST_CASE("pilot subset optimization rescoring on all paths") {
    const TimeGrid grid(1.0, 4);
    OptimizerConfig cfg = quick_config();
    cfg.pilot_paths = 2000;
    const MonteCarloConfig mc{20000, 11, 1};
    const auto res = robust_expectation(terminal_square, kQuad, grid, cfg, mc);
    CHECK(std::abs(res.value - 2.25) <= 3.0 * res.std_error + 0.05);
    for (double v : res.start_values) CHECK(v <= res.value + 1e-12);
}

TEST_CASE("constant-volatility argmax for bracket payoffs") {
    for (double eta : {-1.0, 0.0, 0.25, 0.5, 1.0, 10.0}) {
        const double got = pr11_argmax(eta, kQuad, 1.0, 1e-4);
        INFO("eta " << eta);
        CHECK(got == Approx(gtilde_maximizer(kQuad, 2.0 * eta)).margin(1e-4));
    }
    CHECK(pr11_argmax(1.0, kQuad, 1.0, 1e-4) == Approx(2.5).margin(1e-4));
    CHECK(pr11_argmax(-10.0, kQuad, 1.0, 1e-4) == 1.0);
    CHECK_THROWS_AS(pr11_argmax(1.0, kZero, 1.0, 1e-3), Error);
}
