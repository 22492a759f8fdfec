#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "stefan/basis.hpp"
#include "stefan/forward.hpp"
#include "stefan/steklov.hpp"

using namespace stefan;

namespace {

struct Level {
    TimeGrid time;
    MovingGrid grid;
};

Level make_level(int n) {
    Level l;
    l.time = build_time_grid(1.0, n);
    std::vector<double> s(n + 1, 1.0);
    for (int k = 2; k <= n; ++k) s[k] = 1.0 + 0.2 * std::sin(3.0 * k / n);
    l.grid = build_moving_grid(s, 2.0, 0.5, l.time.tau, GridOptions{});
    return l;
}

const Field smooth([](double x, double t) { return std::exp(-x * t) * std::cos(3 * x); });

void BM_CellAverages(benchmark::State& st) {
    const Level l = make_level(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(cell_averages(smooth, l.grid, l.time, CellRange::All));
}

void BM_CellAveragesSerial(benchmark::State& st) {
    const Level l = make_level(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(cell_averages_serial(smooth, l.grid, l.time, CellRange::All));
}

std::vector<double> coords(int K) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> N;
    std::vector<double> d(K);
    for (auto& v : d) v = N(rng);
    return d;
}

void BM_CoefficientAverages(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    const Level l = make_level(n);
    const CoefficientBasis basis(2.0, 1.0, n + 1);
    const auto d = coords(n + 1);
    for (auto _ : st) benchmark::DoNotOptimize(coefficient_cell_averages(d, basis, l.grid, l.time));
}

void BM_CoefficientAveragesSerial(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    const Level l = make_level(n);
    const CoefficientBasis basis(2.0, 1.0, n + 1);
    const auto d = coords(n + 1);
    for (auto _ : st) benchmark::DoNotOptimize(coefficient_cell_averages_serial(d, basis, l.grid, l.time));
}

void BM_ForwardSolve(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    const Level l = make_level(n);
    ProblemData d;
    d.phi = Field([](double x, double) { return 1.0 - 0.5 * x * x; });
    d.chi = Field::constant(0.0);
    const LevelSetup setup = prepare_level(d, l.time, l.grid, std::vector<double>(l.grid.m.size(), 1.0), nullptr);
    DiscreteControl v;
    v.s = setup.s;
    v.g.assign(n + 1, 1.0);
    v.f = CellField(n, setup.grid->cells());
    v.b.assign(n + 1, 0.0);
    v.c.assign(n + 1, 0.0);
    for (auto _ : st) benchmark::DoNotOptimize(run_forward(v, setup, d));
}

}  // namespace

BENCHMARK(BM_CellAverages)->Arg(32)->Arg(64);
BENCHMARK(BM_CellAveragesSerial)->Arg(32)->Arg(64);
BENCHMARK(BM_CoefficientAverages)->Arg(32)->Arg(64);
BENCHMARK(BM_CoefficientAveragesSerial)->Arg(32)->Arg(64);
BENCHMARK(BM_ForwardSolve)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
