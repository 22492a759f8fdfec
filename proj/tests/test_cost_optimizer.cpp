#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "oracles.hpp"
#include "stefan/basis.hpp"
#include "stefan/cost.hpp"
#include "stefan/error.hpp"
#include "stefan/optimizer.hpp"

using namespace stefan;

namespace {
struct Setup {
    ProblemData data;
    TimeGrid time;
    MovingGrid grid;
    DiscreteControl v;
};

Setup manufactured(int n) {
    Setup s;
    s.data = oracle::manufactured_problem();
    s.time = build_time_grid(1.0, n);
    s.grid = build_moving_grid(std::vector<double>(n + 1, 1.0), 2.0, 0.5, s.time.tau, GridOptions{});
    s.v.s.assign(n + 1, 1.0);
    s.v.g.assign(n + 1, 0.0);
    s.v.f = CellField(n, s.grid.cells());
    s.v.b.assign(n + 1, 0.0);
    s.v.c.assign(n + 1, 0.0);
    return s;
}
// w constant on each grid cell with value u_i(n), mu constant on each step
Measurements cell_constant_measurements(const DiscreteState& st, const DiscreteControl& v) {
    const DiscreteMeasurements d = discrete_measurements_from_state(st, v);
    auto grid = st.grid;
    const double tau = st.time.tau;
    const int n = st.n();
    Measurements m;
    m.w = Field([grid, w = d.w](double x, double) { return w[grid->cell_of(x)]; });
    m.mu = [mu = d.mu, tau, n](double t) { return mu[std::clamp(static_cast<int>(std::ceil(t / tau - 1e-9)), 1, n)]; };
    m.s_bar = d.s_bar;
    m.w_breaks = grid->xs;
    m.mu_breaks = st.time.nodes;
    return m;
}
}  // namespace

TEST_CASE("self-consistent measurements give zero cost") {
    Setup s = manufactured(16);
    const auto st = run_forward(s.v, s.data, s.grid, s.time, nullptr);
    const DiscreteMeasurements m = discrete_measurements_from_state(st, s.v);
    const CostBreakdown c = eval_discrete_cost(st, s.v, m, CostWeights{});
    CHECK(c.total == 0.0);
    CHECK(c.resolution == 16);
    // continuous data from the same solve, averaged back onto its grid
    const Measurements cm = cell_constant_measurements(st, s.v);
    CHECK(eval_discrete_cost(st, s.v, cm, CostWeights{}).total <= 1e-24);
}

TEST_CASE("final position term alone") {
    Setup s = manufactured(8);
    const auto st = run_forward(s.v, s.data, s.grid, s.time, nullptr);
    DiscreteMeasurements m = discrete_measurements_from_state(st, s.v);
    m.s_bar = 1.2;
    const CostBreakdown c = eval_discrete_cost(st, s.v, m, CostWeights{0.0, 0.0, 1.0});
    CHECK(c.total == doctest::Approx(0.04));
    CHECK(c.term_final_temp == 0.0);
}

TEST_CASE("cost terms against a hand computation") {
    Setup s = manufactured(8);
    const auto st = run_forward(s.v, s.data, s.grid, s.time, nullptr);
    Measurements m;
    m.w = Field::constant(0.0);
    m.mu = [](double) { return 0.0; };
    m.s_bar = 1.0;
    const CostBreakdown c = eval_discrete_cost(st, s.v, m, CostWeights{2.0, 3.0, 1.0});
    double fin = 0, bnd = 0;
    for (int i = 0; i < st.active(8); ++i) fin += s.grid.hs[i] * st.row(8)[i] * st.row(8)[i];
    for (int k = 1; k <= 8; ++k) bnd += s.time.tau * std::pow(st.row(k)[st.active(k)], 2);
    CHECK(c.term_final_temp == doctest::Approx(fin));
    CHECK(c.term_boundary_temp == doctest::Approx(bnd));
    CHECK(c.total == doctest::Approx(2 * fin + 3 * bnd));
    CHECK_THROWS_AS(eval_discrete_cost(st, s.v, DiscreteMeasurements{}, CostWeights{}), InvalidArgument);
}

TEST_CASE("continuous cost checks s(0)") {
    const ProblemData d = oracle::manufactured_problem();
    ContinuousControl v;
    v.s = [](double) { return 1.1; };
    v.g = [](double) { return 0.0; };
    Measurements m;
    m.w = Field::constant(0.0);
    m.mu = [](double) { return 0.0; };
    CHECK_THROWS_AS(eval_continuous_cost(v, d, m, CostWeights{}, FineSolve{16, GridOptions{}}), ConstraintViolation);
    v.s = [](double) { return 1.0; };
    CHECK(eval_continuous_cost(v, d, m, CostWeights{}, FineSolve{16, GridOptions{}}).total > 0.0);
}

namespace {
Measurements flux_data(const ProblemData& d, double flux) {
    const int nf = 64;
    const TimeGrid t = build_time_grid(1.0, nf);
    const MovingGrid g = build_moving_grid(std::vector<double>(nf + 1, 1.0), 2.0, 0.5, t.tau, GridOptions{});
    DiscreteControl v;
    v.s.assign(nf + 1, 1.0);
    v.g.assign(nf + 1, flux);
    v.f = CellField(nf, g.cells());
    v.b.assign(nf + 1, 0.0);
    v.c.assign(nf + 1, 0.0);
    const auto st = run_forward(v, d, g, t, nullptr);
    return measurements_from_state(st, v);
}
}  // namespace

TEST_CASE("optimizer leaves an exact minimizer alone") {
    Setup s = manufactured(8);
    const auto st = run_forward(s.v, s.data, s.grid, s.time, nullptr);
    const Measurements m = cell_constant_measurements(st, s.v);
    const LevelContext ctx{&s.data, &m, CostWeights{}, GridOptions{}};
    OptimizerConfig cfg;
    cfg.max_evals = 200;
    cfg.optimize = {false, true, false, false, false};
    const LevelResult r = minimize_level(ctx, 8, cfg, s.v);
    CHECK(r.best_cost.total <= 1e-12);
    CHECK(r.best_control.g == s.v.g);
}

TEST_CASE("boundary-only cost drives s_n to the measured position") {
    Setup s = manufactured(8);
    const auto st = run_forward(s.v, s.data, s.grid, s.time, nullptr);
    Measurements m = cell_constant_measurements(st, s.v);
    m.s_bar = 1.2;
    const LevelContext ctx{&s.data, &m, CostWeights{0.0, 0.0, 1.0}, GridOptions{}};
    OptimizerConfig cfg;
    cfg.max_evals = 2000;
    cfg.optimize = {true, false, false, false, false};
    const LevelResult r = minimize_level(ctx, 8, cfg, s.v);
    CHECK(r.best_control.s.back() == doctest::Approx(1.2).epsilon(1e-4));
    CHECK(r.best_control.s[0] == 1.0);
    CHECK(r.best_control.s[1] == 1.0);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].cost.total <= r.trace[i - 1].cost.total);
}

TEST_CASE("refinement keeps constants and lands on the doubled grid") {
    Setup s = manufactured(8);
    s.v.g.assign(9, 0.7);
    const RefineResult r = refine_control(s.v, s.grid, s.time, s.data.bounds, GridOptions{});
    CHECK(r.control.n() == 16);
    for (double g : r.control.g) CHECK(g == doctest::Approx(0.7));
    for (double x : r.control.s) CHECK(x == doctest::Approx(1.0));
    CHECK(r.control.f.cells() == r.grid.cells());
    CHECK(r.control.f.steps() == 16);
}

TEST_CASE("study is deterministic and recovers a flux") {
    ProblemData d = oracle::manufactured_problem();
    d.chi = Field::constant(0.0);
    d.phi = Field([](double x, double) { return 1.0 - 0.5 * x * x; });
    const Measurements m = flux_data(d, 1.0);
    const LevelContext ctx{&d, &m, CostWeights{}, GridOptions{}};
    OptimizerConfig cfg;
    cfg.method = Method::CompassSearch;
    cfg.max_evals = 600;
    cfg.seed = 3;
    cfg.optimize = {false, true, false, false, false};
    ContinuousControl init;
    init.s = [](double) { return 1.0; };
    init.g = [](double) { return 0.0; };
    const StudyResult a = convergence_study(ctx, {4, 8}, cfg, init);
    const StudyResult b = convergence_study(ctx, {4, 8}, cfg, init);
    REQUIRE(a.levels.size() == 2);
    CHECK(a.gaps.size() == 1);
    for (int j = 0; j < 2; ++j) {
        CHECK(a.levels[j].best_control == b.levels[j].best_control);
        CHECK(a.levels[j].best_cost.total == b.levels[j].best_cost.total);
        CHECK(a.levels[j].best_cost.total < a.levels[j].initial_cost.total);
    }
}
