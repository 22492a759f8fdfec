#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "stefan/basis.hpp"
#include "stefan/control.hpp"
#include "stefan/cost.hpp"
#include "stefan/grid.hpp"
#include "stefan/problem.hpp"

namespace stefan {

enum class Method { CompassSearch, FdProjectedGradient };

enum class Block { S, G, F, B, C };

/// One value per control block.
struct BlockValues {
    double s = 0.0, g = 0.0, f = 0.0, b = 0.0, c = 0.0;
    double operator[](Block blk) const;
};

struct BlockMask {
    bool s = true, g = true, f = true, b = true, c = true;
    bool operator[](Block blk) const;
    bool any() const { return s || g || f || b || c; }
};

/// Steps are relative: the boundary block is scaled by delta, every other
/// block by R.
struct OptimizerConfig {
    Method method = Method::CompassSearch;
    int max_evals = 4000;
    BlockValues step_init{0.1, 0.05, 0.05, 0.05, 0.05};
    BlockValues step_min{1e-7, 1e-7, 1e-7, 1e-7, 1e-7};
    double fd_epsilon = 1e-6;
    std::uint64_t seed = 0;
    BlockMask optimize;
};

/// Everything a level needs besides the control.
struct LevelContext {
    const ProblemData* data = nullptr;
    const Measurements* meas = nullptr;
    CostWeights weights;
    GridOptions grid;
};

struct TracePoint {
    int eval_index = 0;
    CostBreakdown cost;
};

struct LevelResult {
    int n = 0;
    DiscreteControl best_control;
    std::shared_ptr<const MovingGrid> grid;
    CostBreakdown best_cost;
    CostBreakdown initial_cost;
    int evals = 0;
    double epsilon_n = 0.0;
    bool budget_exhausted = false;
    bool init_projected = false;
    std::vector<TracePoint> trace;  ///< accepted iterates, nonincreasing total
};

/// Cost of one discrete control; +inf when the forward solve fails.
CostBreakdown evaluate_control(const LevelContext& ctx, const DiscreteControl& v, const MovingGrid& grid,
                               const TimeGrid& time, std::shared_ptr<const CoefficientBasis> basis);

LevelResult minimize_level(const LevelContext& ctx, int n, const OptimizerConfig& config,
                           const DiscreteControl& init);

struct RefineResult {
    DiscreteControl control;
    MovingGrid grid;
    bool projected = false;
};

/// Q_{2n}(P_n(v)). The source block is prolonged by exact overlap averages
/// and the coefficient blocks through their raw-cosine expansion.
RefineResult refine_control(const DiscreteControl& v, const MovingGrid& grid, const TimeGrid& time,
                            const ControlBounds& bounds, const GridOptions& grid_options);

struct StudyResult {
    std::vector<LevelResult> levels;
    std::vector<double> gaps;  ///< |I*_{n_j} - I*_{n_{j-1}}|, one per level after the first
    std::vector<double> wall_seconds;
};

/// Runs minimize_level over increasing levels. The first level starts from
/// Q_n(init); later ones warm-start from refine_control of the previous
/// best, with frozen blocks taken from Q_n(init) on the current grid.
StudyResult convergence_study(const LevelContext& ctx, const std::vector<int>& levels,
                              const OptimizerConfig& config, const ContinuousControl& init);

/// Q_n(v) on the grid of its sampled boundary.
std::pair<DiscreteControl, MovingGrid> discretize_control(const ContinuousControl& v, const ProblemData& data,
                                                          const TimeGrid& time, const GridOptions& grid,
                                                          const CoefficientBasis& basis);

}  // namespace stefan
