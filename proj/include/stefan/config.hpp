#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stefan/control.hpp"
#include "stefan/cost.hpp"
#include "stefan/expression.hpp"
#include "stefan/grid.hpp"
#include "stefan/optimizer.hpp"
#include "stefan/problem.hpp"

namespace stefan {

enum class ControlMode {
    Optimize,  ///< free block, `expr` is the initial guess
    Fixed,     ///< frozen at `expr`
    Values,    ///< frozen at explicit discrete values (single level only)
};

struct BlockSpec {
    ControlMode mode = ControlMode::Fixed;
    expr::Expr expr;
    std::vector<double> values;
};

/// Truth controls whose forward solve at resolution `n` produces the data.
struct SyntheticSpec {
    int n = 0;  ///< 0: fine_factor times the largest level
    expr::Expr s, g, f, b, c;
};

struct MeasurementSpec {
    bool present = false;
    std::optional<SyntheticSpec> synthetic;
    expr::Expr w, mu;
    double s_bar = 1.0;
};

struct ExperimentConfig {
    std::string path;
    std::string source;

    expr::Expr a, p, gamma, chi, phi;
    double T = 1.0;
    ControlBounds bounds;
    CostWeights weights;

    std::vector<int> levels;
    GridOptions grid;
    int fine_factor = 8;

    BlockSpec s, g, f, b, c;
    MeasurementSpec measurements;
    OptimizerConfig optimizer;

    std::filesystem::path out_dir = "out";
    bool record_timing = false;
    bool write_state = true;

    std::vector<std::string> warnings;
};

/// Parses and validates configuration text. `origin` names the source in
/// error messages. Throws SyntaxError, ConstraintViolation or
/// InvalidArgument naming the offending field.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");

/// Reads `path` (IoError when unreadable) and parses it.
ExperimentConfig load_config(const std::filesystem::path& path);

ProblemData make_problem(const ExperimentConfig& cfg);

/// Continuous control built from the block expressions.
ContinuousControl make_control(const ExperimentConfig& cfg);

BlockMask optimize_mask(const ExperimentConfig& cfg);

/// Level-n initial control, honouring explicit discrete values.
std::pair<DiscreteControl, MovingGrid> initial_control(const ExperimentConfig& cfg, int n);

/// Measurements of the config: closed-form, or synthesized by a forward
/// solve of the truth controls.
Measurements make_measurements(const ExperimentConfig& cfg);

/// FNV-1a 64 of the config text and the effective seed.
std::uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace stefan
