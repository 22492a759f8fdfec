#include "stefan/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "stefan/error.hpp"
#include "stefan/forward.hpp"
#include "stefan/steklov.hpp"

namespace stefan {

double BlockValues::operator[](Block blk) const {
    switch (blk) {
        case Block::S: return s;
        case Block::G: return g;
        case Block::F: return f;
        case Block::B: return b;
        case Block::C: return c;
    }
    return 0.0;
}

bool BlockMask::operator[](Block blk) const {
    switch (blk) {
        case Block::S: return s;
        case Block::G: return g;
        case Block::F: return f;
        case Block::B: return b;
        case Block::C: return c;
    }
    return false;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

CostBreakdown failed_cost(const CostWeights& w, int n) {
    CostBreakdown c;
    c.term_final_temp = c.term_boundary_temp = c.term_final_position = c.total = kInf;
    c.weights = w;
    c.resolution = n;
    return c;
}

/// A control together with the grid-dependent data its cost needs.
struct Point {
    DiscreteControl v;
    std::shared_ptr<const LevelSetup> setup;
    std::shared_ptr<const DiscreteMeasurements> meas;
    CostBreakdown cost;
};

class Evaluator {
public:
    Evaluator(const LevelContext& ctx, int n)
        : ctx_(ctx),
          time_(build_time_grid(ctx.data->T, n)),
          basis_(std::make_shared<const CoefficientBasis>(ctx.data->bounds.ell, ctx.data->T, n + 1)) {}

    const TimeGrid& time() const { return time_; }
    std::shared_ptr<const CoefficientBasis> basis() const { return basis_; }

    /// Projects x (whose f lives on `grid`) and evaluates it, reusing
    /// `ref`'s setup when the boundary is unchanged.
    Point make(const DiscreteControl& x, const MovingGrid& grid, const Point* ref, bool* projected = nullptr) const {
        Point p;
        try {
            ProjectionResult pr = project_admissible(x, grid, time_, ctx_.data->bounds, ctx_.grid);
            if (projected) *projected = pr.changed;
            p.v = std::move(pr.control);
            if (ref && ref->setup && ref->v.s == p.v.s) {
                p.setup = ref->setup;
                p.meas = ref->meas;
            } else {
                p.setup = std::make_shared<const LevelSetup>(
                    prepare_level(*ctx_.data, time_, pr.grid, p.v.s, basis_));
                p.meas = std::make_shared<const DiscreteMeasurements>(discretize(*ctx_.meas, pr.grid, time_));
            }
            const DiscreteState st = run_forward(p.v, *p.setup, *ctx_.data);
            p.cost = eval_discrete_cost(st, p.v, *p.meas, ctx_.weights);
            if (!std::isfinite(p.cost.total)) p.cost = failed_cost(ctx_.weights, time_.n);
        } catch (const Error&) {
            if (!p.setup) p.v = x;
            p.cost = failed_cost(ctx_.weights, time_.n);
        }
        return p;
    }

private:
    const LevelContext& ctx_;
    TimeGrid time_;
    std::shared_ptr<const CoefficientBasis> basis_;
};

struct Coord {
    Block blk;
    int index;
    friend bool operator<(const Coord& a, const Coord& b) {
        return std::pair(static_cast<int>(a.blk), a.index) < std::pair(static_cast<int>(b.blk), b.index);
    }
    friend bool operator==(const Coord&, const Coord&) = default;
};

double& ref(DiscreteControl& v, const Coord& c) {
    const auto i = static_cast<std::size_t>(c.index);
    switch (c.blk) {
        case Block::S: return v.s[i];
        case Block::G: return v.g[i];
        case Block::F: return v.f.matrix().values()[i];
        case Block::B: return v.b[i];
        case Block::C: return v.c[i];
    }
    throw InvalidArgument("unknown control block");
}

double value(const DiscreteControl& v, const Coord& c) { return ref(const_cast<DiscreteControl&>(v), c); }

std::vector<Coord> free_coords(const Point& p, const BlockMask& mask) {
    std::vector<Coord> out;
    const int n = p.v.n();
    if (mask.s)
        for (int k = 2; k <= n; ++k) out.push_back({Block::S, k});
    if (mask.g)
        for (int k = 0; k <= n; ++k) out.push_back({Block::G, k});
    if (mask.f) {
        const MovingGrid& grid = *p.setup->grid;
        const int N = grid.cells();
        for (int k = 1; k <= n; ++k)
            for (int i = 0; i < grid.active(k); ++i) out.push_back({Block::F, (k - 1) * N + i});
    }
    if (mask.b)
        for (int r = 0; r < static_cast<int>(p.v.b.size()); ++r) out.push_back({Block::B, r});
    if (mask.c)
        for (int r = 0; r < static_cast<int>(p.v.c.size()); ++r) out.push_back({Block::C, r});
    return out;
}

double block_scale(Block blk, const ControlBounds& b) { return blk == Block::S ? b.delta : b.R; }

DiscreteControl padded(const DiscreteControl& v, int n, const MovingGrid& grid) {
    DiscreteControl out = v;
    if (out.f.steps() != n || out.f.cells() != grid.cells()) out.f = CellField(n, grid.cells());
    if (out.b.size() != static_cast<std::size_t>(n) + 1) out.b.resize(static_cast<std::size_t>(n) + 1, 0.0);
    if (out.c.size() != static_cast<std::size_t>(n) + 1) out.c.resize(static_cast<std::size_t>(n) + 1, 0.0);
    return out;
}

void record(LevelResult& res, int eval_index, const CostBreakdown& c) { res.trace.push_back({eval_index, c}); }

void compass(const Evaluator& ev, const LevelContext& ctx, const OptimizerConfig& cfg, Point& cur,
             LevelResult& res) {
    const auto& bounds = ctx.data->bounds;
    std::mt19937_64 rng(cfg.seed);
    std::map<Coord, double> steps;
    std::vector<Coord> coords = free_coords(cur, cfg.optimize);
    auto step_of = [&](const Coord& c) -> double& {
        auto it = steps.find(c);
        if (it == steps.end())
            it = steps.emplace(c, cfg.step_init[c.blk] * block_scale(c.blk, bounds)).first;
        return it->second;
    };
    double last_improvement = 0.0, slope = 0.0;

    while (true) {
        std::vector<std::size_t> order(coords.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        bool any_open = false, regrid = false;
        for (const std::size_t j : order) {
            const Coord c = coords[j];
            double& h = step_of(c);
            if (h < cfg.step_min[c.blk] * block_scale(c.blk, bounds)) continue;
            any_open = true;
            if (res.evals + 2 > cfg.max_evals) {
                res.budget_exhausted = true;
                break;
            }
            Point trial[2];
#pragma omp parallel for num_threads(2) schedule(static)
            for (int side = 0; side < 2; ++side) {
                DiscreteControl x = cur.v;
                ref(x, c) += side == 0 ? h : -h;
                trial[side] = ev.make(x, *cur.setup->grid, &cur);
            }
            res.evals += 2;
            const int pick = trial[1].cost.total < trial[0].cost.total ? 1 : 0;
            if (trial[pick].cost.total < cur.cost.total) {
                last_improvement = cur.cost.total - trial[pick].cost.total;
                const bool moved = trial[pick].v.s != cur.v.s;
                cur = std::move(trial[pick]);
                record(res, res.evals, cur.cost);
                h *= 2.0;
                if (moved) {
                    regrid = true;
                    break;
                }
            } else {
                for (const auto& t : trial)
                    if (std::isfinite(t.cost.total)) slope = std::max(slope, std::abs(t.cost.total - cur.cost.total) / h);
                h *= 0.5;
            }
        }
        if (regrid) {
            coords = free_coords(cur, cfg.optimize);
            continue;
        }
        if (res.budget_exhausted || !any_open) break;
    }
    double min_step = 0.0;
    for (const Block blk : {Block::S, Block::G, Block::F, Block::B, Block::C})
        if (cfg.optimize[blk]) min_step = std::max(min_step, cfg.step_min[blk] * block_scale(blk, bounds));
    res.epsilon_n = last_improvement + min_step * slope;
}

void fd_gradient(const Evaluator& ev, const LevelContext& ctx, const OptimizerConfig& cfg, Point& cur,
                 LevelResult& res) {
    const auto& bounds = ctx.data->bounds;
    std::vector<Coord> prev_coords;
    std::vector<double> prev_y, prev_grad;
    double alpha = 0.0, last_improvement = 0.0, grad_inf = 0.0;
    double step_min = kInf;
    for (const Block blk : {Block::S, Block::G, Block::F, Block::B, Block::C})
        if (cfg.optimize[blk]) step_min = std::min(step_min, cfg.step_min[blk]);
    double step_init = 0.0;
    for (const Block blk : {Block::S, Block::G, Block::F, Block::B, Block::C})
        if (cfg.optimize[blk]) step_init = std::max(step_init, cfg.step_init[blk]);

    while (true) {
        const std::vector<Coord> coords = free_coords(cur, cfg.optimize);
        const std::size_t K = coords.size();
        if (res.evals + static_cast<int>(2 * K) + 1 > cfg.max_evals) {
            res.budget_exhausted = true;
            break;
        }
        std::vector<double> scale(K), y(K), grad(K, 0.0);
        for (std::size_t j = 0; j < K; ++j) {
            scale[j] = block_scale(coords[j].blk, bounds);
            y[j] = value(cur.v, coords[j]) / scale[j];
        }
        // Scaled central differences; probes are projected like iterates.
#pragma omp parallel for schedule(dynamic)
        for (std::size_t j = 0; j < K; ++j) {
            const double e = cfg.fd_epsilon * scale[j];
            DiscreteControl xp = cur.v, xm = cur.v;
            ref(xp, coords[j]) += e;
            ref(xm, coords[j]) -= e;
            const Point pp = ev.make(xp, *cur.setup->grid, &cur);
            const Point pm = ev.make(xm, *cur.setup->grid, &cur);
            const double dx = (value(pp.v, coords[j]) - value(pm.v, coords[j])) / scale[j];
            if (std::isfinite(pp.cost.total) && std::isfinite(pm.cost.total) && dx > 0.0)
                grad[j] = (pp.cost.total - pm.cost.total) / dx;
        }
        res.evals += static_cast<int>(2 * K);
        grad_inf = 0.0;
        for (const double gj : grad) grad_inf = std::max(grad_inf, std::abs(gj));
        if (!(grad_inf > 0.0)) break;

        if (!prev_coords.empty() && prev_coords == coords) {
            double ss = 0.0, sy = 0.0;
            for (std::size_t j = 0; j < K; ++j) {
                const double ds = y[j] - prev_y[j], dg = grad[j] - prev_grad[j];
                ss += ds * ds;
                sy += ds * dg;
            }
            alpha = sy > 0.0 ? ss / sy : 2.0 * alpha;
        } else {
            alpha = step_init / grad_inf;
        }

        bool accepted = false;
        while (alpha * grad_inf >= step_min && res.evals < cfg.max_evals) {
            DiscreteControl x = cur.v;
            for (std::size_t j = 0; j < K; ++j) ref(x, coords[j]) = (y[j] - alpha * grad[j]) * scale[j];
            Point trial = ev.make(x, *cur.setup->grid, &cur);
            ++res.evals;
            double decrease = 0.0;
            if (trial.v.s == cur.v.s || !cfg.optimize.f)
                for (std::size_t j = 0; j < K; ++j) decrease += grad[j] * (y[j] - value(trial.v, coords[j]) / scale[j]);
            if (trial.cost.total < cur.cost.total && trial.cost.total <= cur.cost.total - 1e-4 * decrease) {
                last_improvement = cur.cost.total - trial.cost.total;
                double moved = 0.0;
                for (std::size_t j = 0; j < K; ++j)
                    moved = std::max(moved, std::abs(value(trial.v, coords[j]) / scale[j] - y[j]));
                cur = std::move(trial);
                record(res, res.evals, cur.cost);
                accepted = moved >= step_min;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            if (res.evals >= cfg.max_evals) res.budget_exhausted = true;
            break;
        }
        prev_coords = coords;
        prev_y = std::move(y);
        prev_grad = std::move(grad);
    }
    res.epsilon_n = last_improvement + step_min * grad_inf;
}

}  // namespace

CostBreakdown evaluate_control(const LevelContext& ctx, const DiscreteControl& v, const MovingGrid& grid,
                               const TimeGrid& time, std::shared_ptr<const CoefficientBasis> basis) {
    try {
        const DiscreteState st = run_forward(v, *ctx.data, grid, time, std::move(basis));
        return eval_discrete_cost(st, v, *ctx.meas, ctx.weights);
    } catch (const Error&) {
        return failed_cost(ctx.weights, time.n);
    }
}

LevelResult minimize_level(const LevelContext& ctx, int n, const OptimizerConfig& config,
                           const DiscreteControl& init) {
    if (!ctx.data || !ctx.meas) throw InvalidArgument("level context is missing data or measurements");
    if (config.max_evals < 1) throw InvalidArgument("max_evals must be >= 1");
    for (const Block blk : {Block::S, Block::G, Block::F, Block::B, Block::C})
        if (!(config.step_min[blk] > 0.0)) throw InvalidArgument("step_min must be positive");
    if (init.n() != n) throw InvalidArgument("initial control has the wrong resolution");

    const Evaluator ev(ctx, n);
    const auto& bounds = ctx.data->bounds;
    std::vector<double> s0 = init.s;
    for (std::size_t k = 0; k < s0.size(); ++k)
        s0[k] = k <= 1 ? bounds.s0 : std::clamp(s0[k], bounds.delta, bounds.ell);
    const MovingGrid grid0 = build_moving_grid(s0, bounds.ell, bounds.delta, ev.time().tau, ctx.grid);
    DiscreteControl start = padded(init, n, grid0);
    if (init.f.cells() != grid0.cells()) start.f = CellField(n, grid0.cells());

    LevelResult res;
    res.n = n;
    Point cur = ev.make(start, grid0, nullptr, &res.init_projected);
    res.evals = 1;
    if (!cur.setup) throw NumericError("initial control could not be evaluated at n = " + std::to_string(n));
    if (!std::isfinite(cur.cost.total))
        throw NumericError("forward solve fails at the initial control for n = " + std::to_string(n));
    res.initial_cost = cur.cost;
    record(res, 1, cur.cost);

    if (config.optimize.any()) {
        if (config.method == Method::CompassSearch)
            compass(ev, ctx, config, cur, res);
        else
            fd_gradient(ev, ctx, config, cur, res);
    }
    res.best_control = std::move(cur.v);
    res.grid = cur.setup->grid;
    res.best_cost = cur.cost;
    return res;
}

RefineResult refine_control(const DiscreteControl& v, const MovingGrid& grid, const TimeGrid& time,
                            const ControlBounds& bounds, const GridOptions& grid_options) {
    const int n = v.n();
    if (time.n != n || grid.levels() != n + 1) throw InvalidArgument("refine_control: grid/time do not match v");
    const TimeGrid fine = build_time_grid(time.T, 2 * n);
    RefineResult out;
    DiscreteControl& w = out.control;

    const BoundaryCurve curve = boundary_curve(v.s, time.tau);
    w.s.assign(static_cast<std::size_t>(2 * n) + 1, bounds.s0);
    for (int k = 2; k <= 2 * n; ++k) {
        const double sk = curve.value(fine.t(k));
        const double clipped = std::clamp(sk, bounds.delta, bounds.ell);
        if (clipped != sk) out.projected = true;
        w.s[static_cast<std::size_t>(k)] = clipped;
    }
    w.g.resize(w.s.size());
    for (int k = 0; k <= 2 * n; ++k) {
        const double t = fine.t(k);
        const int j = std::clamp(static_cast<int>(std::ceil(t / time.tau - 1e-12)), 1, n);
        const double g0 = v.g[static_cast<std::size_t>(j - 1)], g1 = v.g[static_cast<std::size_t>(j)];
        w.g[static_cast<std::size_t>(k)] = g0 + (g1 - g0) * (t - time.t(j - 1)) / time.tau;
    }

    MovingGrid fine_grid = build_moving_grid(w.s, bounds.ell, bounds.delta, fine.tau, grid_options);
    CellField doubled(2 * n, grid.cells());
    for (int k = 1; k <= 2 * n; ++k) {
        const auto src = v.f.level((k + 1) / 2);
        std::copy(src.begin(), src.end(), doubled.level(k).begin());
    }
    w.f = remap_cells(doubled, grid, fine_grid);

    const bool coeffs = std::any_of(v.b.begin(), v.b.end(), [](double x) { return x != 0.0; }) ||
                        std::any_of(v.c.begin(), v.c.end(), [](double x) { return x != 0.0; });
    if (coeffs) {
        const CoefficientBasis coarse(bounds.ell, time.T, n + 1);
        const CoefficientBasis fb(bounds.ell, time.T, 2 * n + 1);
        w.b = fb.from_raw(coarse.to_raw(v.b));
        w.c = fb.from_raw(coarse.to_raw(v.c));
    } else {
        w.b.assign(static_cast<std::size_t>(2 * n) + 1, 0.0);
        w.c.assign(static_cast<std::size_t>(2 * n) + 1, 0.0);
    }

    ProjectionResult pr = project_admissible(w, fine_grid, fine, bounds, grid_options);
    out.projected = out.projected || pr.changed;
    out.control = std::move(pr.control);
    out.grid = std::move(pr.grid);
    return out;
}

std::pair<DiscreteControl, MovingGrid> discretize_control(const ContinuousControl& v, const ProblemData& data,
                                                          const TimeGrid& time, const GridOptions& grid,
                                                          const CoefficientBasis& basis) {
    const auto& b = data.bounds;
    const std::vector<double> s = sample_boundary(v.s, b.s0, time);
    MovingGrid g = build_moving_grid(s, b.ell, b.delta, time.tau, grid);
    DiscreteControl dv = q_n(v, b.s0, time, g, basis);
    return {std::move(dv), std::move(g)};
}

StudyResult convergence_study(const LevelContext& ctx, const std::vector<int>& levels,
                              const OptimizerConfig& config, const ContinuousControl& init) {
    if (levels.empty()) throw InvalidArgument("convergence study needs at least one level");
    for (std::size_t j = 1; j < levels.size(); ++j)
        if (levels[j] <= levels[j - 1]) throw InvalidArgument("levels must be increasing");
    const ProblemData& data = *ctx.data;
    const auto& bounds = data.bounds;
    StudyResult out;

    for (std::size_t j = 0; j < levels.size(); ++j) {
        const auto t0 = std::chrono::steady_clock::now();
        const int n = levels[j];
        const TimeGrid time = build_time_grid(data.T, n);
        const CoefficientBasis basis(bounds.ell, data.T, n + 1);
        DiscreteControl x;
        MovingGrid grid;
        if (j == 0 || levels[j] != 2 * levels[j - 1]) {
            std::tie(x, grid) = discretize_control(init, data, time, ctx.grid, basis);
            if (j > 0) {
                // Non-dyadic step: carry the free blocks over through the continuous level.
                const LevelResult& prev = out.levels.back();
                const TimeGrid pt = build_time_grid(data.T, prev.n);
                const CoefficientBasis pb(bounds.ell, data.T, prev.n + 1);
                ContinuousControl carried = p_n(prev.best_control, pt, *prev.grid, pb);
                auto [y, ygrid] = discretize_control(carried, data, time, ctx.grid, basis);
                if (config.optimize.s) {
                    x.s = y.s;
                    grid = ygrid;
                    x.f = config.optimize.f ? y.f : cell_averages(init.f, ygrid, time, CellRange::All).values;
                } else if (config.optimize.f) {
                    x.f = remap_cells(y.f, ygrid, grid);
                }
                if (config.optimize.g) x.g = y.g;
                if (config.optimize.b) x.b = y.b;
                if (config.optimize.c) x.c = y.c;
            }
        } else {
            const LevelResult& prev = out.levels.back();
            const TimeGrid pt = build_time_grid(data.T, prev.n);
            RefineResult r = refine_control(prev.best_control, *prev.grid, pt, bounds, ctx.grid);
            x = std::move(r.control);
            grid = std::move(r.grid);
            if (!config.optimize.s) {
                const std::vector<double> s = sample_boundary(init.s, bounds.s0, time);
                MovingGrid sg = build_moving_grid(s, bounds.ell, bounds.delta, time.tau, ctx.grid);
                if (s != x.s) x.f = remap_cells(x.f, grid, sg);
                x.s = s;
                grid = std::move(sg);
            }
            if (!config.optimize.g)
                for (int k = 0; k <= n; ++k) x.g[static_cast<std::size_t>(k)] = init.g ? init.g(time.t(k)) : 0.0;
            if (!config.optimize.f) x.f = cell_averages(init.f, grid, time, CellRange::All).values;
            if (!config.optimize.b) x.b = basis.project(init.b);
            if (!config.optimize.c) x.c = basis.project(init.c);
        }
        out.levels.push_back(minimize_level(ctx, n, config, x));
        out.wall_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        if (j > 0)
            out.gaps.push_back(std::abs(out.levels[j].best_cost.total - out.levels[j - 1].best_cost.total));
    }
    return out;
}

}  // namespace stefan
