#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gexp/cli/commands.hpp"

using namespace gexp::cli;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

const char* kTheta = R"(
[generator]
penalty = quadratic
kappa = 1.0
anchor = 2.0

[generator.theta]
c_lo = 1.0
c_hi = 4.0
)";

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "gexp_test_cli" / name;
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Run {
    CommandResult result;
    std::string log, err;
    fs::path dir;
};

Run run(const std::string& command, const std::string& text, const std::string& name) {
    Run r;
    r.dir = scratch(name);
    std::ostringstream log, err;
    r.result = run_command(command, text, r.dir, log, err);
    r.log = log.str();
    r.err = err.str();
    return r;
}

Json read_json(const fs::path& p) { return Json::parse(slurp(p)); }

}  // namespace

TEST_CASE("config grammar") {
    const auto cfg = Config::parse(R"(
# leading comment
top = 1
[a.b]
x = -2.5e-1   # trailing comment
name = quadratic
quoted = "has # hash"
m = [[1, 2],
     [3, 4]]
v = [1, 2, 3]
empty = []
)");
    CHECK(cfg.number("top") == 1.0);
    CHECK(cfg.number("a.b.x") == -0.25);
    CHECK(cfg.word("a.b.name") == "quadratic");
    CHECK(cfg.word("a.b.quoted") == "has # hash");
    const auto m = cfg.matrix("a.b.m");
    REQUIRE(m.rows() == 2);
    CHECK(m(1, 0) == 3.0);
    CHECK(m(0, 1) == 2.0);
    CHECK(cfg.matrix("a.b.v").cols() == 1);
    CHECK(cfg.numbers("a.b.empty").empty());
    CHECK(cfg.number("a.b.missing", 9.0) == 9.0);
    CHECK(cfg.line_of("a.b.m") == 8);
}

TEST_CASE("config errors carry line and field path") {
    auto fails = [](const std::string& text, std::size_t line, const std::string& path) {
        try {
            (void)Config::parse(text);
            FAIL("expected a config error");
        } catch (const ConfigError& e) {
            CHECK(e.line() == line);
            CHECK(e.path() == path);
        }
    };
    fails("[s]\nx = 1\nx = 2\n", 3, "s.x");
    fails("[s]\nx = [1, 2\n", 2, "s.x");
    fails("[s]\nx = 1.2.3\n", 2, "s.x");
    fails("[s]\nx = [1 2]\n", 2, "s.x");
    fails("[s]\nx = 1]\n", 2, "s.x");
    fails("[s]\njust words\n", 2, "s");
    fails("[bad section\n", 1, "");
    fails("x =\n", 1, "x");
    fails("x = \"open\n", 1, "x");

    const auto cfg = Config::parse("[s]\nx = name\ny = [[1, 2], [3]]\nz = 1.5\n");
    CHECK_THROWS_AS(cfg.number("s.x"), ConfigError);
    CHECK_THROWS_AS(cfg.matrix("s.y"), ConfigError);
    CHECK_THROWS_AS(cfg.count("s.z"), ConfigError);
    CHECK_THROWS_AS(cfg.number("s.none"), ConfigError);
    CHECK_NOTHROW(cfg.finish({}));  // every key was read above

    const auto unread = Config::parse("[s]\nx = 1\ntypo = 2\n");
    CHECK_NOTHROW(unread.finish({"s.x", "s.typo"}));
    try {
        unread.finish({"s.x"});
        FAIL("expected an unknown-field error");
    } catch (const ConfigError& e) {
        CHECK(e.path() == "s.typo");
        CHECK(e.line() == 3);
    }
}

TEST_CASE("output helpers") {
    CHECK(config_hash("") == "cbf29ce484222325");
    CHECK(config_hash("a") == "af63dc4c8601ec8c");
    CHECK(format_number(-0.0) == "0");
    CHECK(format_number(0.1) == "0.1");
    CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CsvTable t({"x", "y"});
    t.row({1.0, 2.5});
    CHECK(t.text() == "x,y\r\n1,2.5\r\n");
    CHECK_THROWS(t.row(std::vector<double>{1.0}));
}

TEST_CASE("eval: square and constant payoffs") {
    const std::string square = R"(
[generator.theta]
c_lo = 1.0
c_hi = 4.0
[grid]
T = 1.0
N = 100
M = 801
[payoff]
kind = square
)";
    const auto r = run("eval", square, "eval_square");
    REQUIRE(r.result.exit_code == kOk);
    const auto j = read_json(r.dir / "eval.json");
    CHECK(j["value_at_zero"].get<double>() == Approx(4.0).margin(1e-2));
    CHECK(j["schema_version"] == kSchemaVersion);
    CHECK(j["config_hash"] == config_hash(square));
    CHECK(slurp(r.dir / "eval_slice.csv").rfind("x,u\r\n", 0) == 0);
    CHECK(r.log.find("value at x=0") != std::string::npos);

    const auto c = run("eval", "[generator.theta]\nc_lo = 1\nc_hi = 4\n[grid]\nT = 1\nN = 20\nM = 101\n"
                               "[payoff]\nkind = constant\nvalue = 7\n", "eval_constant");
    REQUIRE(c.result.exit_code == kOk);
    CHECK(read_json(c.dir / "eval.json")["value_at_zero"].get<double>() == 7.0);
}

TEST_CASE("config failures exit with 2 and name the field") {
    const auto r = run("eval", "[generator.theta]\nc_lo = 0\nc_hi = 4\n[grid]\nT = 1\n[payoff]\nkind = square\n",
                       "bad_clo");
    CHECK(r.result.exit_code == kConfigError);
    CHECK(r.err.find("generator.theta.c_lo") != std::string::npos);
    CHECK(r.err.find("line 2") != std::string::npos);

    CHECK(run("eval", "[generator.theta]\nc_lo = 1\nc_hi = 4\n[grid]\nT = 1\nM = 100\n[payoff]\nkind = square\n",
              "even_m").result.exit_code == kConfigError);
    CHECK(run("eval", "[generator.theta]\nc_lo = 1\nc_hi = 4\n[grid]\nT = 1\n[payoff]\nkind = cubic\n",
              "bad_kind").result.exit_code == kConfigError);
    CHECK(run("lq", std::string(kTheta) + "[grid]\nT = 1\nN = 2\n[lq]\nx0 = [1]\nB = 1\nR = 0\n", "singular_r")
              .result.exit_code == kConfigError);
    CHECK(run("lq", std::string(kTheta) + "[grid]\nT = 1\nN = 2\n[lq]\nx0 = [1, 2]\nB = 1\n", "dims")
              .result.exit_code == kConfigError);
    CHECK(run("nope", "", "unknown_cmd").result.exit_code == kConfigError);
}

TEST_CASE("repr: sandwich table and constant-scenario argmax") {
    const std::string text = std::string(kTheta) + R"(
[grid]
T = 1.0
N = 100
M = 401
[payoff]
kind = square
[run]
seed = 5
n_paths = 4000
steps = 2
starts = 3
eta = [0]
)";
    const auto r = run("repr", text, "repr_square");
    REQUIRE(r.result.exit_code == kOk);
    const auto j = read_json(r.dir / "repr.json");
    const double se = j["scenario_stderr"].get<double>();
    CHECK(j["gap"].get<double>() <= 3.0 * se + 2e-2);
    CHECK(j["pr11"][0]["argmax"].get<double>() == Approx(2.0).margin(1e-3));
    CHECK(fs::exists(r.dir / "repr_table.csv"));
    CHECK(slurp(r.dir / "repr_scenario.csv").rfind("t,gamma\r\n", 0) == 0);

    const auto id = run("repr", "[generator.theta]\nc_lo = 1\nc_hi = 4\n[grid]\nT = 1\nN = 50\nM = 201\n"
                                "[payoff]\nkind = identity\n[run]\nn_paths = 2000\nsteps = 1\nstarts = 2\n",
                        "repr_identity");
    REQUIRE(id.result.exit_code == kOk);
    const auto k = read_json(id.dir / "repr.json");
    CHECK(k["pde_value"].get<double>() == Approx(0.0).margin(1e-12));
    CHECK(std::abs(k["scenario_value"].get<double>()) <= 3.0 * k["scenario_stderr"].get<double>() + 1e-2);
}

TEST_CASE("lq: tanh benchmark, obstruction and zero problem") {
    const auto t = run("lq", std::string(kTheta) + "[grid]\nT = 1\nN = 20\n[lq]\nx0 = [1]\nB = 1\nQ = 1\nsubsteps = 10\n",
                       "lq_tanh");
    REQUIRE(t.result.exit_code == kOk);
    CHECK(read_json(t.dir / "lq.json")["J_analytic"].get<double>() == Approx(0.5 * std::tanh(1.0)).margin(1e-6));

    const auto e = run("lq", std::string(kTheta) + "[grid]\nT = 1\nN = 10\n[lq]\nx0 = [1]\nB = 0\nC = 1\nR = 2\nL = 1\n",
                       "lq_incompatible");
    CHECK(e.result.exit_code == kOk);
    CHECK(e.result.status == "incompatible-condition-39");
    const auto ej = read_json(e.dir / "lq.json");
    CHECK(ej["status"] == "incompatible-condition-39");
    CHECK(ej["obstruction"]["residual_sup"].get<double>() == Approx(1.0).margin(1e-10));
    CHECK_FALSE(fs::exists(e.dir / "lq_solution.csv"));

    const auto z = run("lq", std::string(kTheta) + "[grid]\nT = 1\nN = 4\n[lq]\nx0 = [1]\nB = 0\n", "lq_zero");
    REQUIRE(z.result.exit_code == kOk);
    CHECK(read_json(z.dir / "lq.json")["J_analytic"].get<double>() == 0.0);
    std::istringstream csv(slurp(z.dir / "lq_solution.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "t,P_0_0,phi_0,l,gamma,K_0_0,k_0\r");
    while (std::getline(csv, line)) {
        // the trailing K and k columns are the feedback u* = K x + k
        const auto last = line.rfind(','), prev = line.rfind(',', last - 1);
        CHECK(line.substr(prev + 1) == "0,0\r");
    }
}

TEST_CASE("mp: residual, sabotage and zero problem") {
    const std::string base = std::string(kTheta) +
                             "[grid]\nT = 1\nN = 5\n[lq]\nx0 = [1]\nA = -0.5\nB = 1\nb = [0.2]\nsigma = [1]\nQ = 1\nL = 1\n"
                             "substeps = 4\n[run]\nseed = 3\n";
    const auto ok = run("mp", base + "[mp]\npaths = 500\n", "mp_ok");
    REQUIRE(ok.result.exit_code == kOk);
    const auto j = read_json(ok.dir / "mp.json");
    CHECK(j["residual"]["within_tolerance"] == true);
    CHECK(j["sufficiency"]["all"] == true);

    const auto bad = run("mp", base + "[mp]\npaths = 500\nsabotage = 0.1\n", "mp_sabotage");
    REQUIRE(bad.result.exit_code == kOk);
    CHECK(read_json(bad.dir / "mp.json")["residual"]["unconstrained"].get<double>() >= 0.1 - 1e-12);

    const auto z = run("mp", std::string(kTheta) + "[grid]\nT = 1\nN = 4\n[lq]\nx0 = [1]\nB = 0\n"
                                                  "[mp]\ndomain = box\nlo = [-1]\nhi = [1]\npaths = 100\n",
                       "mp_zero");
    REQUIRE(z.result.exit_code == kOk);
    const auto zj = read_json(z.dir / "mp.json");
    CHECK(zj["residual"]["unconstrained"].get<double>() == 0.0);
    CHECK(zj["residual"]["constrained"].get<double>() == 0.0);
    CHECK(zj["J_analytic"].get<double>() == 0.0);
}

TEST_CASE("outputs are byte-identical across worker counts") {
    const std::string text = std::string(kTheta) + R"(
[grid]
T = 1.0
N = 50
M = 201
[payoff]
kind = square
[run]
seed = 9
n_paths = 5000
steps = 2
starts = 2
)";
    ::setenv("GEXP_THREADS", "1", 1);
    const auto one = run("repr", text, "threads_1");
    ::setenv("GEXP_THREADS", "4", 1);
    const auto four = run("repr", text, "threads_4");
    ::unsetenv("GEXP_THREADS");
    REQUIRE(one.result.outputs == four.result.outputs);
    for (const auto& name : one.result.outputs) CHECK(slurp(one.dir / name) == slurp(four.dir / name));
}
