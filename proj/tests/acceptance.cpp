#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "stefan/basis.hpp"
#include "stefan/control.hpp"
#include "stefan/cost.hpp"
#include "stefan/diagnostics.hpp"
#include "stefan/forward.hpp"
#include "stefan/optimizer.hpp"

using namespace stefan;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
    std::printf("[%s] %2d %-34s %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

GridOptions tau_grid() {
    GridOptions o;
    o.policy = M0Policy::Tau;
    o.htau_c = 4.0;
    return o;
}

DiscreteControl fixed_control(int n, const MovingGrid& g, double s0, double flux) {
    DiscreteControl v;
    v.s.assign(n + 1, s0);
    v.g.assign(n + 1, flux);
    v.f = CellField(n, g.cells());
    v.b.assign(n + 1, 0.0);
    v.c.assign(n + 1, 0.0);
    return v;
}

struct Solve {
    TimeGrid time;
    MovingGrid grid;
    DiscreteControl v;
    std::shared_ptr<const CoefficientBasis> basis;
    DiscreteState state;
};

Solve manufactured(int n) {
    const ProblemData d = oracle::manufactured_problem();
    Solve s;
    s.time = build_time_grid(1.0, n);
    s.grid = build_moving_grid(std::vector<double>(n + 1, 1.0), 2.0, 0.5, s.time.tau, tau_grid());
    s.v = fixed_control(n, s.grid, 1.0, 0.0);
    s.state = run_forward(s.v, d, s.grid, s.time, nullptr);
    return s;
}

// moving boundary, every control block and coefficient active
ProblemData general_problem() {
    ProblemData d;
    d.T = 1.0;
    d.bounds = {1.0, 0.5, 2.0, 10.0};
    d.a = Field([](double x, double t) { return 1.0 + 0.3 * x * x + 0.1 * t; });
    d.p = Field([](double x, double t) { return 0.2 * std::sin(x + t); });
    d.gamma = Field::constant(0.5);
    d.chi = Field([](double x, double t) { return x - t; });
    d.phi = Field([](double x, double) { return std::cos(x); });
    return d;
}

ContinuousControl general_control() {
    ContinuousControl c;
    c.s = [](double t) { return 1.0 + 0.3 * t * t - 0.1 * t * t * t; };
    c.g = [](double t) { return std::sin(3 * t); };
    c.f = Field([](double x, double t) { return x * std::exp(-t); });
    c.b = Field([](double x, double t) { return 0.3 * std::cos(x) * (1 + t); });
    c.c = Field([](double x, double t) { return -0.4 + 0.2 * x * t; });
    return c;
}

Solve general(int n) {
    const ProblemData d = general_problem();
    Solve s;
    s.time = build_time_grid(1.0, n);
    s.basis = std::make_shared<const CoefficientBasis>(2.0, 1.0, n + 1);
    auto [v, g] = discretize_control(general_control(), d, s.time, GridOptions{}, *s.basis);
    s.v = std::move(v);
    s.grid = std::move(g);
    s.state = run_forward(s.v, d, s.grid, s.time, s.basis);
    return s;
}

double worst_identity(const DiscreteState& st) {
    double worst = 0.0;
    for (int k = 1; k <= st.n(); ++k) {
        std::vector<double> eta(st.active(k) + 1, 0.0);
        for (std::size_t i = 0; i < eta.size(); ++i) {
            eta[i] = 1.0;
            worst = std::max(worst, oracle::identity_relative_residual(st, k, eta));
            eta[i] = 0.0;
        }
    }
    return worst;
}

void criterion1() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (int n : {4, 8, 16, 32, 64}) {
        worst = std::max(worst, worst_identity(manufactured(n).state));
        worst = std::max(worst, worst_identity(general(n).state));
    }
    const double secs = seconds_since(t0);
    report(1, "summation identity", worst <= 1e-9 && secs < 5.0,
           fmt("max relative residual %.2e", worst) + fmt(", %.2f s", secs));
}

void criterion2() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> size(3, 200);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto sys = oracle::random_dominant(size(rng), rng);
        const auto x = solve_step(sys), y = oracle::dense_solve(sys);
        for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
    }
    double worst_run = 0.0;
    for (int which = 0; which < 2; ++which) {
        const Solve s = which == 0 ? manufactured(16) : general(16);
        const ProblemData d = which == 0 ? oracle::manufactured_problem() : general_problem();
        const LevelSetup setup = prepare_level(d, s.time, s.grid, s.v.s, s.basis);
        SolveOptions opts;
        opts.step_solver = oracle::dense_solve;
        const DiscreteState dense = run_forward(s.v, setup, d, opts);
        const auto a = s.state.u.values(), b = dense.u.values();
        for (std::size_t i = 0; i < a.size(); ++i) worst_run = std::max(worst_run, std::abs(a[i] - b[i]));
    }
    report(2, "dense-solve equivalence", worst <= 1e-10 && worst_run <= 1e-10,
           fmt("random systems %.2e", worst) + fmt(", full runs n=16 %.2e", worst_run));
}

// L2 error of \hat u^tau against x^2 + 2t over 0 < x < 1, 0 < t < 1
double manufactured_error(const DiscreteState& st) {
    const StateInterpolation I(st);
    const int M = 400;
    double sum = 0.0;
    for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b) {
            const double x = (a + 0.5) / M, t = (b + 0.5) / M;
            const double e = I.u_hat(x, t) - oracle::manufactured_exact(x, t);
            sum += e * e;
        }
    return std::sqrt(sum / (M * M));
}

void criterion3() {
    const auto t0 = Clock::now();
    std::vector<double> err;
    for (int n : {16, 32, 64}) err.push_back(manufactured_error(manufactured(n).state));
    const double r1 = err[0] / err[1], r2 = err[1] / err[2];
    const double secs = seconds_since(t0);
    std::ostringstream os;
    os.precision(3);
    os << "errors " << err[0] << ", " << err[1] << ", " << err[2] << "; ratios " << r1 << ", " << r2 << "; "
       << secs << " s";
    report(3, "manufactured convergence", r1 >= 1.5 && r2 >= 1.5 && secs < 30.0, os.str());
}

void criterion4() {
    const ProblemData d = oracle::manufactured_problem();
    std::vector<EnergyReport> e;
    for (int n : {16, 32, 64}) {
        const Solve s = manufactured(n);
        e.push_back(energy_report(s.state, s.v, d));
    }
    double worst = 0.0;
    for (int j = 1; j < 3; ++j) {
        worst = std::max(worst, e[j].lhs_first / e[j - 1].lhs_first);
        worst = std::max(worst, e[j].lhs_second / e[j - 1].lhs_second);
    }
    report(4, "energy boundedness", worst <= 1.5, fmt("max growth factor %.3f", worst));
}

void criterion5() {
    const auto t0 = Clock::now();
    ProblemData d;
    d.T = 1.0;
    d.bounds = {1.0, 0.5, 2.0, 10.0};
    d.phi = Field([](double x, double) { return 1.0 - 0.5 * x * x; });
    const GridOptions go = tau_grid();

    const int nf = 256;
    const TimeGrid tf = build_time_grid(1.0, nf);
    ContinuousControl truth;
    truth.s = [](double) { return 1.0; };
    truth.g = [](double) { return 1.0; };
    auto basis = std::make_shared<const CoefficientBasis>(2.0, 1.0, nf + 1);
    auto [vt, gt] = discretize_control(truth, d, tf, go, *basis);
    const DiscreteState st = run_forward(vt, d, gt, tf, basis);
    const Measurements meas = measurements_from_state(st, vt);

    const LevelContext ctx{&d, &meas, CostWeights{}, go};
    OptimizerConfig cfg;
    cfg.method = Method::FdProjectedGradient;
    cfg.max_evals = 20000;
    cfg.seed = 7;
    cfg.optimize = {false, true, false, false, false};
    ContinuousControl init;
    init.s = truth.s;
    init.g = [](double) { return 0.0; };
    const StudyResult res = convergence_study(ctx, {8, 16, 32}, cfg, init);
    const double secs = seconds_since(t0);

    std::vector<double> best;
    for (const auto& l : res.levels) best.push_back(l.best_cost.total);
    const double gap1 = std::abs(best[1] - best[0]), gap2 = std::abs(best[2] - best[1]);
    const double zero_cost = res.levels[0].initial_cost.total;
    const bool monotone = best[1] <= best[0] && best[2] <= best[1];
    const bool ok = monotone && gap2 <= gap1 && best[2] <= 1e-3 * zero_cost && secs < 300.0;
    std::ostringstream os;
    os.precision(3);
    os << "I* " << best[0] << ", " << best[1] << ", " << best[2] << "; gaps " << gap1 << ", " << gap2
       << "; I*_32/I(0) " << best[2] / zero_cost << "; " << secs << " s";
    report(5, "flux recovery study", ok, os.str());
}

void criterion6() {
    double worst = 0.0;
    for (int n : {8, 16, 32}) {
        for (int which = 0; which < 2; ++which) {
            const Solve s = which == 0 ? manufactured(n) : general(n);
            const DiscreteMeasurements m = discrete_measurements_from_state(s.state, s.v);
            worst = std::max(worst, eval_discrete_cost(s.state, s.v, m, CostWeights{}).total);
        }
    }
    report(6, "self-consistency", worst <= 1e-12, fmt("max cost %.2e", worst));
}

// smooth control with every block active; amplitudes kept well inside R = 10
ContinuousControl random_control(std::mt19937_64& rng, const CoefficientBasis& coeff) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const double a = 0.15 * U(rng), b = 0.1 * U(rng);
    const double g0 = U(rng), g1 = U(rng), w = 1 + 2 * std::abs(U(rng));
    const double f0 = U(rng), f1 = U(rng);
    std::vector<double> db(4), dc(4);
    for (auto& x : db) x = 0.5 * U(rng);
    for (auto& x : dc) x = 0.5 * U(rng);
    auto cb = std::make_shared<const CoefficientBasis>(coeff);
    ContinuousControl v;
    v.s = [a, b](double t) { return 1.0 + a * t * t + b * t * t * t; };
    v.s_prime = [a, b](double t) { return 2 * a * t + 3 * b * t * t; };
    v.s_second = [a, b](double t) { return 2 * a + 6 * b * t; };
    v.g = [g0, g1, w](double t) { return g0 + g1 * std::sin(w * t); };
    v.g_prime = [g1, w](double t) { return g1 * w * std::cos(w * t); };
    v.f = Field([f0, f1](double x, double t) { return f0 * x + f1 * std::cos(x * t); });
    v.b = Field([cb, db](double x, double t) { return cb->expansion(db, x, t).v; });
    v.c = Field([cb, dc](double x, double t) { return cb->expansion(dc, x, t).v; });
    return v;
}

double lipschitz_oracle(const std::vector<double>& s, double tau) {
    double L = 0.0;
    for (std::size_t k = 1; k < s.size(); ++k) L = std::max(L, std::abs(s[k] - s[k - 1]) / tau);
    return L;
}

double b22_oracle(const std::vector<double>& s, double tau) {
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < s.size(); ++k) sum += tau * s[k] * s[k];
    for (std::size_t k = 1; k < s.size(); ++k) sum += tau * std::pow((s[k] - s[k - 1]) / tau, 2);
    for (std::size_t k = 1; k + 1 < s.size(); ++k) sum += tau * std::pow((s[k + 1] - 2 * s[k] + s[k - 1]) / (tau * tau), 2);
    return std::sqrt(sum);
}

std::vector<std::pair<std::vector<double>, double>> admissible_boundaries;

void criterion7() {
    const ProblemData d = general_problem();
    const std::vector<int> levels{4, 8, 16, 32, 64};
    std::mt19937_64 rng(77);
    const CoefficientBasis coeff(2.0, 1.0, 4);
    int with_threshold = 0, bad = 0;
    double max_norm = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const ContinuousControl v = random_control(rng, coeff);
        const double norm = continuous_norms(v, 1.0, 2.0).max();
        max_norm = std::max(max_norm, norm);
        if (norm > d.bounds.R - 0.5) ++bad;
        const InclusionReport rep = inclusion_threshold(v, d, GridOptions{}, levels);
        if (rep.threshold < 0) continue;
        ++with_threshold;
        for (std::size_t j = 0; j < levels.size(); ++j) {
            if (levels[j] < rep.threshold) continue;
            const int n = levels[j];
            const TimeGrid time = build_time_grid(1.0, n);
            const CoefficientBasis basis(2.0, 1.0, n + 1);
            auto [dv, grid] = discretize_control(v, d, time, GridOptions{}, basis);
            if (!is_admissible(dv, grid, time.tau, d.bounds).admissible) ++bad;
            admissible_boundaries.emplace_back(dv.s, time.tau);
        }
    }

    // Parseval: surrogate norm of sum d_k psi_k equals |d|
    double parseval = 0.0;
    {
        const int n = 16;
        const TimeGrid time = build_time_grid(1.0, n);
        const CoefficientBasis basis(2.0, 1.0, n + 1);
        const MovingGrid grid = build_moving_grid(std::vector<double>(n + 1, 1.0), 2.0, 0.5, time.tau, GridOptions{});
        for (int trial = 0; trial < 5; ++trial) {
            DiscreteControl dv = fixed_control(n, grid, 1.0, 0.0);
            std::normal_distribution<double> N;
            for (auto& x : dv.b) x = N(rng);
            const ContinuousControl back = p_n(dv, time, grid, basis);
            const double cont = continuous_norms(back, 1.0, 2.0).b;
            parseval = std::max(parseval, std::abs(cont - norm_b2_coeff(dv.b)) / norm_b2_coeff(dv.b));
        }
    }

    // cell norm against a Riemann sum of P_n f sampled at cell centres
    double l2 = 0.0;
    {
        const int n = 16;
        const TimeGrid time = build_time_grid(1.0, n);
        const CoefficientBasis basis(2.0, 1.0, n + 1);
        std::vector<double> s(n + 1, 1.0);
        for (int k = 2; k <= n; ++k) s[k] = 1.0 + 0.2 * std::sin(k * 0.3);
        const MovingGrid grid = build_moving_grid(s, 2.0, 0.5, time.tau, GridOptions{});
        DiscreteControl dv = fixed_control(n, grid, 1.0, 0.0);
        dv.s = s;
        std::uniform_real_distribution<double> U(-2.0, 2.0);
        for (double& x : dv.f.matrix().values()) x = U(rng);
        const ContinuousControl back = p_n(dv, time, grid, basis);
        double sum = 0.0;
        for (int k = 1; k <= n; ++k)
            for (int i = 0; i < grid.cells(); ++i) {
                const double xm = 0.5 * (grid.xs[i] + grid.xs[i + 1]), tm = (k - 0.5) * time.tau;
                sum += time.tau * grid.hs[i] * std::pow(back.f(xm, tm), 2);
            }
        const double lib = norm_l2_cells(dv.f, grid, time.tau);
        l2 = std::abs(lib - std::sqrt(sum)) / lib;
    }

    const bool ok = with_threshold == 20 && bad == 0 && parseval <= 1e-8 && l2 <= 1e-8;
    std::ostringstream os;
    os.precision(3);
    os << with_threshold << "/20 with threshold, " << bad << " violations, max |v| " << max_norm << "; Parseval "
       << parseval << "; L2 " << l2;
    report(7, "mapping inclusions", ok, os.str());
}

void criterion8() {
    std::mt19937_64 rng(88);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const ControlBounds bounds{1.0, 0.5, 2.0, 10.0};
    // projected random boundaries join the ones from the inclusion check
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 8 << (trial % 4);
        const TimeGrid time = build_time_grid(1.0, n);
        const MovingGrid g0 = build_moving_grid(std::vector<double>(n + 1, 1.0), 2.0, 0.5, time.tau, GridOptions{});
        DiscreteControl v = fixed_control(n, g0, 1.0, 0.0);
        for (int k = 2; k <= n; ++k) v.s[k] = v.s[k - 1] + 0.02 * U(rng);
        const ProjectionResult p = project_admissible(v, g0, time, bounds, GridOptions{});
        if (is_admissible(p.control, p.grid, time.tau, bounds).admissible)
            admissible_boundaries.emplace_back(p.control.s, time.tau);
    }
    int violations = 0, disagreements = 0;
    double margin = 0.0;
    for (const auto& [s, tau] : admissible_boundaries) {
        const int n = static_cast<int>(s.size()) - 1;
        const TimeGrid time = build_time_grid(1.0, n);
        const double L = lipschitz_oracle(s, tau), C = std::sqrt(1.0) * b22_oracle(s, tau);
        if (L > C) ++violations;
        margin = std::max(margin, L / C);
        const LipschitzReport rep = lipschitz_check(s, time);
        if (!rep.ok || std::abs(rep.lipschitz - L) > 1e-12 * (1 + L) || std::abs(rep.bound - C) > 1e-12 * C)
            ++disagreements;
    }
    std::ostringstream os;
    os.precision(3);
    os << admissible_boundaries.size() << " controls, " << violations << " violations, " << disagreements
       << " disagreements, max L/C' " << margin;
    report(8, "Lipschitz bound", violations == 0 && disagreements == 0 && admissible_boundaries.size() >= 50, os.str());
}

void criterion9() {
    const ProblemData d = oracle::manufactured_problem();
    ContinuousControl v;
    v.s = [](double) { return 1.0; };
    v.s_prime = [](double) { return 0.0; };
    v.g = [](double) { return 0.0; };
    const auto fam = polynomial_test_family(1.0);
    std::vector<double> r;
    for (int n : {16, 32, 64}) r.push_back(weak_form_residual(manufactured(n).state, v, d, fam).max_abs);
    const double q1 = r[0] / r[1], q2 = r[1] / r[2];
    auto in_band = [](double q) { return q >= 1.6 && q <= 2.5; };
    std::ostringstream os;
    os.precision(3);
    os << "max residual " << r[0] << ", " << r[1] << ", " << r[2] << "; ratios " << q1 << ", " << q2;
    report(9, "weak-form residual decay", in_band(q1) && in_band(q2), os.str());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void criterion10() {
    const fs::path root = fs::temp_directory_path() / "stefan_acceptance_determinism";
    fs::remove_all(root);
    const std::string cfg = std::string(STEFAN_CONFIGS) + "/recover_flux.yaml";
    const char* envs[] = {"", "", "OMP_NUM_THREADS=1 "};
    std::vector<fs::path> dirs;
    bool ran = true;
    for (int r = 0; r < 3; ++r) {
        dirs.push_back(root / ("run" + std::to_string(r)));
        const std::string cmd = std::string(envs[r]) + STEFAN_CLI + " --config " + cfg + " --out " +
                                dirs.back().string() + " study > /dev/null 2>&1";
        ran = ran && std::system(cmd.c_str()) == 0;
    }
    int files = 0, differing = 0;
    if (ran)
        for (const auto& e : fs::directory_iterator(dirs[0])) {
            if (e.path().extension() != ".csv") continue;
            ++files;
            const std::string ref = slurp(e.path());
            for (int r = 1; r < 3; ++r)
                if (slurp(dirs[r] / e.path().filename()) != ref) ++differing;
        }
    fs::remove_all(root);
    report(10, "deterministic study output", ran && files > 0 && differing == 0,
           std::to_string(files) + " CSVs x 3 runs, " + std::to_string(differing) + " differ");
}

}  // namespace

int main() {
    const auto t0 = Clock::now();
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    criterion9();
    criterion10();
    std::printf("%d of 10 criteria passed in %.1f s\n", 10 - failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
