#include "stefan/experiment.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "stefan/diagnostics.hpp"
#include "stefan/error.hpp"
#include "stefan/forward.hpp"
#include "stefan/optimizer.hpp"
#include "stefan/quadrature.hpp"

namespace stefan {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

const char* to_string(Verb verb) {
    switch (verb) {
        case Verb::Forward: return "forward";
        case Verb::Invert: return "invert";
        case Verb::Study: return "study";
        case Verb::Check: return "check";
    }
    return "?";
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string hash_hex(std::uint64_t h) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

CsvWriter::CsvWriter(const fs::path& path, std::uint64_t hash, std::initializer_list<const char*> columns)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path), width_(columns.size()) {
    if (!out_) throw IoError("cannot write '" + path.string() + "'");
    out_ << "# config_hash: " << hash_hex(hash) << '\n';
    bool first = true;
    for (const char* c : columns) {
        out_ << (first ? "" : ",") << c;
        first = false;
    }
    out_ << '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw InvalidArgument("CSV row width mismatch in '" + path_.string() + "'");
    for (std::size_t j = 0; j < cells.size(); ++j) out_ << (j ? "," : "") << cells[j];
    out_ << '\n';
    if (!out_) throw IoError("write failed for '" + path_.string() + "'");
}

namespace {

std::string I(long long v) { return std::to_string(v); }
std::string D(double v) { return format_double(v); }

const char* mode_name(ControlMode m) {
    switch (m) {
        case ControlMode::Optimize: return "optimize";
        case ControlMode::Fixed: return "fixed";
        case ControlMode::Values: return "values";
    }
    return "?";
}

std::string block_text(const BlockSpec& b) {
    if (b.mode == ControlMode::Values) return "values (" + std::to_string(b.values.size()) + " entries)";
    return std::string(mode_name(b.mode)) + " " + b.expr.to_string();
}

const char* policy_name(M0Policy p) {
    switch (p) {
        case M0Policy::SqrtTau: return "sqrt_tau";
        case M0Policy::Tau: return "tau";
        case M0Policy::Fixed: return "fixed";
    }
    return "?";
}

Json cost_json(const CostBreakdown& c) {
    return Json{{"total", c.total},
                {"term_final_temp", c.term_final_temp},
                {"term_boundary_temp", c.term_boundary_temp},
                {"term_final_position", c.term_final_position},
                {"resolution", c.resolution}};
}

std::string level_file(const char* stem, int n) { return std::string(stem) + "_n" + std::to_string(n) + ".csv"; }

void write_state(const fs::path& path, std::uint64_t hash, const DiscreteState& st) {
    CsvWriter w(path, hash, {"k", "t_k", "i", "x_i", "u", "active_flag"});
    for (int k = 0; k <= st.n(); ++k) {
        const auto row = st.row(k);
        for (int i = 0; i <= st.grid->cells(); ++i)
            w.row({I(k), D(st.time.t(k)), I(i), D(st.grid->xs[static_cast<std::size_t>(i)]),
                   D(row[static_cast<std::size_t>(i)]), I(i <= st.active(k) ? 1 : 0)});
    }
}

void write_trace(const fs::path& path, std::uint64_t hash, const std::vector<TracePoint>& trace) {
    CsvWriter w(path, hash, {"eval_index", "total", "term1", "term2", "term3"});
    for (const auto& p : trace)
        w.row({I(p.eval_index), D(p.cost.total), D(p.cost.term_final_temp), D(p.cost.term_boundary_temp),
               D(p.cost.term_final_position)});
}

void write_control(const fs::path& dir, const std::string& suffix, std::uint64_t hash, const DiscreteControl& v,
                   const TimeGrid& time, const MovingGrid& grid, const BlockMask& mask,
                   std::vector<std::string>& files) {
    {
        const std::string name = "control" + suffix + ".csv";
        CsvWriter w(dir / name, hash, {"k", "t_k", "s", "g"});
        for (int k = 0; k <= v.n(); ++k)
            w.row({I(k), D(time.t(k)), D(v.s[static_cast<std::size_t>(k)]), D(v.g[static_cast<std::size_t>(k)])});
        files.push_back(name);
    }
    if (mask.f) {
        const std::string name = "source" + suffix + ".csv";
        CsvWriter w(dir / name, hash, {"k", "i", "x_i", "x_i1", "f"});
        for (int k = 1; k <= v.n(); ++k)
            for (int i = 0; i < grid.cells(); ++i)
                w.row({I(k), I(i), D(grid.xs[static_cast<std::size_t>(i)]),
                       D(grid.xs[static_cast<std::size_t>(i) + 1]), D(v.f(i, k))});
        files.push_back(name);
    }
    if (mask.b || mask.c) {
        const std::string name = "coefficients" + suffix + ".csv";
        CsvWriter w(dir / name, hash, {"r", "b", "c"});
        for (std::size_t r = 0; r < v.b.size(); ++r) w.row({I(static_cast<long long>(r)), D(v.b[r]), D(v.c[r])});
        files.push_back(name);
    }
}

bool has_values(const ExperimentConfig& cfg) {
    return cfg.s.mode == ControlMode::Values || cfg.g.mode == ControlMode::Values ||
           cfg.b.mode == ControlMode::Values || cfg.c.mode == ControlMode::Values;
}

ContinuousControl diagnostic_control(const ExperimentConfig& cfg, const DiscreteControl& v, const TimeGrid& time,
                                     const MovingGrid& grid, const CoefficientBasis& basis) {
    return has_values(cfg) ? p_n(v, time, grid, basis) : make_control(cfg);
}

class Runner {
public:
    Runner(const ExperimentConfig& cfg, std::ostream& log) : cfg_(cfg), log_(log), hash_(config_hash(cfg)) {}

    Json forward() {
        const ProblemData data = make_problem(cfg_);
        std::optional<Measurements> meas;
        if (cfg_.measurements.present) meas = make_measurements(cfg_);
        Json levels = Json::array();
        for (const int n : cfg_.levels) {
            const TimeGrid time = build_time_grid(cfg_.T, n);
            auto basis = std::make_shared<const CoefficientBasis>(cfg_.bounds.ell, cfg_.T, n + 1);
            auto [v, grid] = initial_control(cfg_, n);
            const DiscreteState st = run_forward(v, data, grid, time, basis);
            const double residual = max_canonical_residual(st);
            Json lv{{"n", n}, {"cells", grid.cells()}, {"identity_residual", residual}};
            if (meas) {
                lv["cost"] = cost_json(eval_discrete_cost(st, v, *meas, cfg_.weights));
                FineSolve fine{cfg_.fine_factor * n, cfg_.grid};
                if (!has_values(cfg_))
                    lv["J_proxy"] = cost_json(eval_continuous_cost(make_control(cfg_), data, *meas, cfg_.weights, fine));
            }
            if (cfg_.write_state) {
                const std::string name = level_file("state", n);
                write_state(cfg_.out_dir / name, hash_, st);
                files_.push_back(name);
            }
            log_ << "forward n=" << n << " identity residual " << residual << '\n';
            levels.push_back(std::move(lv));
        }
        return Json{{"levels", levels}};
    }

    Json invert() {
        const ProblemData data = make_problem(cfg_);
        const Measurements meas = make_measurements(cfg_);
        const int n = cfg_.levels[0];
        auto [init, grid] = initial_control(cfg_, n);
        const LevelContext ctx{&data, &meas, cfg_.weights, cfg_.grid};
        const LevelResult res = minimize_level(ctx, n, cfg_.optimizer, init);
        log_ << "invert n=" << n << " cost " << res.initial_cost.total << " -> " << res.best_cost.total << " in "
             << res.evals << " evaluations\n";
        write_level(res, "", data);
        return Json{{"level", level_json(res)}};
    }

    Json study() {
        const ProblemData data = make_problem(cfg_);
        const Measurements meas = make_measurements(cfg_);
        const LevelContext ctx{&data, &meas, cfg_.weights, cfg_.grid};
        StudyResult res;
        if (cfg_.levels.size() == 1) {
            const auto t0 = std::chrono::steady_clock::now();
            auto [init, grid] = initial_control(cfg_, cfg_.levels[0]);
            res.levels.push_back(minimize_level(ctx, cfg_.levels[0], cfg_.optimizer, init));
            res.wall_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        } else {
            res = convergence_study(ctx, cfg_.levels, cfg_.optimizer, make_control(cfg_));
        }
        const std::vector<double>& walls = res.wall_seconds;

        CsvWriter conv(cfg_.out_dir / "convergence.csv", hash_, {"n", "I_n_star", "gap", "evals", "wall_seconds"});
        files_.push_back("convergence.csv");
        Json levels = Json::array();
        std::vector<std::vector<double>> boundaries;
        for (std::size_t j = 0; j < res.levels.size(); ++j) {
            const LevelResult& l = res.levels[j];
            conv.row({I(l.n), D(l.best_cost.total), j == 0 ? std::string("nan") : D(res.gaps[j - 1]), I(l.evals),
                      D(cfg_.record_timing ? walls[j] : 0.0)});
            write_level(l, "_n" + std::to_string(l.n), data);
            Json lj = level_json(l);
            lj["wall_seconds"] = walls[j];
            levels.push_back(std::move(lj));
            boundaries.push_back(l.best_control.s);
            log_ << "study n=" << l.n << " I* " << l.best_cost.total << " evals " << l.evals << '\n';
        }
        Json out{{"levels", levels}, {"gaps", res.gaps}};
        if (boundaries.size() >= 2) {
            const std::vector<double> gaps = boundary_uniform_gap(boundaries, cfg_.T);
            CsvWriter bg(cfg_.out_dir / "boundary_gaps.csv", hash_, {"n", "gap"});
            for (std::size_t j = 0; j < gaps.size(); ++j) bg.row({I(res.levels[j + 1].n), D(gaps[j])});
            files_.push_back("boundary_gaps.csv");
            out["boundary_gaps"] = gaps;
        }
        return out;
    }

    Json check() {
        const ProblemData data = make_problem(cfg_);
        CsvWriter w(cfg_.out_dir / "diagnostics.csv", hash_,
                    {"n", "identity_residual", "weak_residual_max", "lhs_first", "rhs_data_first", "lhs_second",
                     "rhs_data_second", "lipschitz", "lipschitz_bound", "admissible"});
        files_.push_back("diagnostics.csv");
        Json levels = Json::array();
        for (const int n : cfg_.levels) {
            const TimeGrid time = build_time_grid(cfg_.T, n);
            auto basis = std::make_shared<const CoefficientBasis>(cfg_.bounds.ell, cfg_.T, n + 1);
            auto [v, grid] = initial_control(cfg_, n);
            const DiscreteState st = run_forward(v, data, grid, time, basis);
            const double residual = max_canonical_residual(st);
            const EnergyReport er = energy_report(st, v, data);
            const ContinuousControl cv = diagnostic_control(cfg_, v, time, grid, *basis);
            const WeakResidual wr = weak_form_residual(st, cv, data, polynomial_test_family(cfg_.T));
            const LipschitzReport lr = lipschitz_check(v.s, time);
            const AdmissibilityReport ar = is_admissible(v, grid, time.tau, cfg_.bounds);
            w.row({I(n), D(residual), D(wr.max_abs), D(er.lhs_first), D(er.rhs_data_first), D(er.lhs_second),
                   D(er.rhs_data_second), D(lr.lipschitz), D(lr.bound), I(ar.admissible ? 1 : 0)});
            levels.push_back(Json{{"n", n},
                                  {"identity_residual", residual},
                                  {"weak_residual", wr.values},
                                  {"lipschitz_ok", lr.ok},
                                  {"violations", ar.violations}});
            log_ << "check n=" << n << " identity " << residual << " weak " << wr.max_abs << " energy "
                 << er.lhs_first << '\n';
        }
        Json out{{"levels", levels}};
        if (!has_values(cfg_)) {
            const InclusionReport inc = inclusion_threshold(make_control(cfg_), data, cfg_.grid, cfg_.levels);
            out["inclusion"] = Json{{"levels", inc.levels},
                                    {"admissible", inc.admissible},
                                    {"max_norm", inc.max_norm},
                                    {"threshold", inc.threshold}};
        }
        return out;
    }

    const std::vector<std::string>& files() const { return files_; }

    /// Verb-level configuration problems found while running.
    struct ConfigProblem : InvalidArgument {
        using InvalidArgument::InvalidArgument;
    };

private:
    Json level_json(const LevelResult& l) const {
        return Json{{"n", l.n},
                    {"initial_cost", cost_json(l.initial_cost)},
                    {"best_cost", cost_json(l.best_cost)},
                    {"evals", l.evals},
                    {"epsilon_n", l.epsilon_n},
                    {"budget_exhausted", l.budget_exhausted},
                    {"init_projected", l.init_projected}};
    }

    void write_level(const LevelResult& l, const std::string& suffix, const ProblemData& data) {
        const TimeGrid time = build_time_grid(cfg_.T, l.n);
        const std::string trace = "cost_trace" + suffix + ".csv";
        write_trace(cfg_.out_dir / trace, hash_, l.trace);
        files_.push_back(trace);
        write_control(cfg_.out_dir, suffix, hash_, l.best_control, time, *l.grid, cfg_.optimizer.optimize, files_);
        if (cfg_.write_state) {
            auto basis = std::make_shared<const CoefficientBasis>(cfg_.bounds.ell, cfg_.T, l.n + 1);
            const DiscreteState st = run_forward(l.best_control, data, *l.grid, time, basis);
            const std::string name = "state" + suffix + ".csv";
            write_state(cfg_.out_dir / name, hash_, st);
            files_.push_back(name);
        }
    }

    const ExperimentConfig& cfg_;
    std::ostream& log_;
    std::uint64_t hash_;
    std::vector<std::string> files_;
};

Json config_echo(const ExperimentConfig& cfg) {
    std::vector<int> levels = cfg.levels;
    return Json{{"path", cfg.path},
                {"text", cfg.source},
                {"levels", levels},
                {"m0_policy", policy_name(cfg.grid.policy)},
                {"htau_c", cfg.grid.htau_c},
                {"fine_factor", cfg.fine_factor},
                {"blocks",
                 {{"s", block_text(cfg.s)},
                  {"g", block_text(cfg.g)},
                  {"f", block_text(cfg.f)},
                  {"b", block_text(cfg.b)},
                  {"c", block_text(cfg.c)}}}};
}

}  // namespace

std::string describe_plan(const ExperimentConfig& cfg, Verb verb) {
    std::ostringstream os;
    os << "verb: " << to_string(verb) << '\n';
    os << "config: " << cfg.path << " (hash " << hash_hex(config_hash(cfg)) << ")\n";
    os << "levels:";
    for (const int n : cfg.levels) os << ' ' << n;
    os << '\n';
    os << "grid: m0_policy " << policy_name(cfg.grid.policy) << ", htau_c " << cfg.grid.htau_c << '\n';
    os << "domain: T " << cfg.T << ", s0 " << cfg.bounds.s0 << ", ell " << cfg.bounds.ell << ", delta "
       << cfg.bounds.delta << ", R " << cfg.bounds.R << '\n';
    os << "controls: s " << block_text(cfg.s) << "; g " << block_text(cfg.g) << "; f " << block_text(cfg.f)
       << "; b " << block_text(cfg.b) << "; c " << block_text(cfg.c) << '\n';
    if (cfg.measurements.present) {
        if (cfg.measurements.synthetic)
            os << "measurements: synthetic from a forward solve at n = " << cfg.measurements.synthetic->n << '\n';
        else
            os << "measurements: w " << cfg.measurements.w.to_string() << ", mu " << cfg.measurements.mu.to_string()
               << ", s_bar " << cfg.measurements.s_bar << '\n';
    } else {
        os << "measurements: none\n";
    }
    if (verb == Verb::Invert || verb == Verb::Study)
        os << "optimizer: " << (cfg.optimizer.method == Method::CompassSearch ? "compass" : "fd_gradient")
           << ", max_evals " << cfg.optimizer.max_evals << ", seed " << cfg.optimizer.seed << '\n';
    os << "output: " << cfg.out_dir.string() << '\n';
    for (const auto& w : cfg.warnings) os << "warning: " << w << '\n';
    return os.str();
}

namespace {
std::string verb_problem(const ExperimentConfig& cfg, Verb verb) {
    if ((verb == Verb::Invert || verb == Verb::Study) && !cfg.measurements.present)
        return std::string(to_string(verb)) + " needs a 'measurements' section";
    if (verb == Verb::Invert && cfg.levels.size() != 1)
        return "invert needs a single resolution (discretization.n); use study for several";
    return {};
}
}  // namespace

int run_experiment(const ExperimentConfig& cfg, Verb verb, bool dry_run, std::ostream& log) {
    if (dry_run) {
        log << describe_plan(cfg, verb);
        if (const std::string why = verb_problem(cfg, verb); !why.empty()) {
            log << "error: " << why << '\n';
            return kExitConfig;
        }
        log << "dry run: nothing written\n";
        return kExitOk;
    }
    for (const auto& w : cfg.warnings) log << "warning: " << w << '\n';

    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) {
        log << "error: cannot create output directory '" << cfg.out_dir.string() << "': " << ec.message() << '\n';
        return kExitNumeric;
    }

    Json meta{{"program", "stefan"},
              {"version", "1.0.0"},
              {"verb", to_string(verb)},
              {"config_hash", hash_hex(config_hash(cfg))},
              {"seed", cfg.optimizer.seed},
              {"config", config_echo(cfg)},
              {"tolerances",
               {{"quadrature_rel_tol", quad::AdaptiveRule{}.rel_tol},
                {"coefficient_projection_rel_tol", 1e-8},
                {"thin_cell_fraction", kSnapFraction}}},
              {"J_proxy", "discrete cost of Q_fine(v) at fine_n = fine_factor * n"},
              {"compiler", __VERSION__},
              {"openmp_max_threads", omp_get_max_threads()},
              {"warnings", cfg.warnings}};

    Runner runner(cfg, log);
    int status = kExitOk;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (const std::string why = verb_problem(cfg, verb); !why.empty()) throw Runner::ConfigProblem(why);
        Json results;
        switch (verb) {
            case Verb::Forward: results = runner.forward(); break;
            case Verb::Invert: results = runner.invert(); break;
            case Verb::Study: results = runner.study(); break;
            case Verb::Check: results = runner.check(); break;
        }
        meta["status"] = "ok";
        meta["results"] = std::move(results);
    } catch (const Runner::ConfigProblem& e) {
        status = kExitConfig;
        meta["status"] = "error";
        meta["error"] = {{"kind", "config"}, {"message", e.what()}};
        log << "error: " << e.what() << '\n';
    } catch (const Error& e) {
        status = kExitNumeric;
        meta["status"] = "error";
        meta["error"] = {{"kind", to_string(e.kind())}, {"message", e.what()}};
        if (const auto* s = dynamic_cast<const SingularSystem*>(&e)) meta["error"]["level"] = s->level();
        log << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    }
    meta["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    meta["files"] = runner.files();

    std::ofstream out(cfg.out_dir / "run_metadata.json", std::ios::trunc);
    if (!out) {
        log << "error: cannot write run_metadata.json\n";
        return kExitNumeric;
    }
    out << meta.dump(2) << '\n';
    return status;
}

}  // namespace stefan
