#include "stefan/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "stefan/error.hpp"
#include "stefan/steklov.hpp"

namespace stefan {

namespace {

std::string number_text(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Section {
public:
    Section(YAML::Node node, std::string path, std::string origin, std::set<std::string> allowed)
        : node_(std::move(node)), path_(std::move(path)), origin_(std::move(origin)) {
        if (!node_) return;
        if (!node_.IsMap()) fail(where(node_) + "'" + path_ + "' must be a mapping");
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!allowed.count(key))
                throw InvalidArgument(where(kv.first) + "unknown key '" + qualified(key) + "'");
        }
    }

    bool has(const std::string& key) const { return node_ && node_[key]; }
    YAML::Node raw(const std::string& key) const { return node_ ? node_[key] : YAML::Node(); }
    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    std::string where(const YAML::Node& n) const {
        const auto mark = n.Mark();
        if (mark.line < 0) return origin_ + ": ";
        return origin_ + ":" + std::to_string(mark.line + 1) + ": ";
    }

    double number(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        try {
            return node_[key].as<double>();
        } catch (const YAML::Exception&) {
            throw InvalidArgument(where(node_[key]) + "'" + qualified(key) + "' must be a number");
        }
    }

    int integer(const std::string& key, int fallback) const {
        if (!has(key)) return fallback;
        try {
            return node_[key].as<int>();
        } catch (const YAML::Exception&) {
            throw InvalidArgument(where(node_[key]) + "'" + qualified(key) + "' must be an integer");
        }
    }

    bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        try {
            return node_[key].as<bool>();
        } catch (const YAML::Exception&) {
            throw InvalidArgument(where(node_[key]) + "'" + qualified(key) + "' must be true or false");
        }
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        if (!node_[key].IsScalar()) throw InvalidArgument(where(node_[key]) + "'" + qualified(key) + "' must be a scalar");
        return node_[key].as<std::string>();
    }

    std::vector<double> numbers(const std::string& key) const {
        const YAML::Node n = node_[key];
        if (!n.IsSequence()) throw InvalidArgument(where(n) + "'" + qualified(key) + "' must be a list of numbers");
        std::vector<double> out;
        try {
            for (const auto& x : n) out.push_back(x.as<double>());
        } catch (const YAML::Exception&) {
            throw InvalidArgument(where(n) + "'" + qualified(key) + "' must be a list of numbers");
        }
        return out;
    }

    /// Expression field; `vars` lists the variables it may use.
    expr::Expr expression(const std::string& key, const std::string& fallback, bool allow_x, bool allow_t) const {
        const std::string src = text(key, fallback);
        expr::Expr e;
        try {
            e = expr::parse(src);
        } catch (const SyntaxError& err) {
            throw SyntaxError(err.offset(), err.expected(),
                              (has(key) ? where(node_[key]) : origin_ + ": ") + "field '" + qualified(key) +
                                  "': " + err.what());
        }
        if (!allow_x && e.depends_on_x())
            throw InvalidArgument(where(node_[key]) + "'" + qualified(key) + "' may not depend on x");
        if (!allow_t && e.depends_on_t())
            throw InvalidArgument(where(node_[key]) + "'" + qualified(key) + "' may not depend on t");
        return e;
    }

    [[noreturn]] void fail(const std::string& msg) const { throw InvalidArgument(msg); }

    const YAML::Node& node() const { return node_; }

private:
    YAML::Node node_;
    std::string path_;
    std::string origin_;
};

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConstraintViolation("'" + field + "' " + what);
}

BlockValues block_values(const Section& sec, const std::string& key, BlockValues fallback, const std::string& origin) {
    if (!sec.has(key)) return fallback;
    const YAML::Node n = sec.raw(key);
    if (n.IsScalar()) {
        const double v = sec.number(key, 0.0);
        return {v, v, v, v, v};
    }
    Section sub(n, sec.qualified(key), origin, {"s", "g", "f", "b", "c"});
    return {sub.number("s", fallback.s), sub.number("g", fallback.g), sub.number("f", fallback.f),
            sub.number("b", fallback.b), sub.number("c", fallback.c)};
}

BlockSpec block_spec(const Section& controls, const std::string& name, const std::string& fallback_expr,
                     bool allow_x, const std::string& origin) {
    BlockSpec spec;
    spec.expr = expr::parse(fallback_expr);
    if (!controls.has(name)) return spec;
    Section sec(controls.raw(name), controls.qualified(name), origin, {"mode", "init", "expr", "values"});
    const std::string mode = sec.text("mode", "fixed");
    if (mode == "optimize") {
        spec.mode = ControlMode::Optimize;
        if (sec.has("expr")) sec.fail(sec.where(sec.raw("expr")) + "use 'init' with mode optimize");
        spec.expr = sec.expression("init", fallback_expr, allow_x, true);
    } else if (mode == "fixed") {
        spec.mode = ControlMode::Fixed;
        if (sec.has("init")) sec.fail(sec.where(sec.raw("init")) + "use 'expr' with mode fixed");
        spec.expr = sec.expression("expr", fallback_expr, allow_x, true);
    } else if (mode == "values") {
        spec.mode = ControlMode::Values;
        if (!sec.has("values")) sec.fail(sec.where(sec.node()) + "'" + sec.qualified("values") + "' is required");
        spec.values = sec.numbers("values");
    } else {
        sec.fail(sec.where(sec.raw("mode")) + "'" + sec.qualified("mode") + "' must be optimize, fixed or values");
    }
    return spec;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw SyntaxError(0, {}, origin + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    Section top(root, "", origin, {"problem", "discretization", "controls", "measurements", "optimizer", "output"});

    ExperimentConfig cfg;
    cfg.path = origin;
    cfg.source = text;

    const Section prob(top.raw("problem"), "problem", origin,
                       {"T", "s0", "ell", "delta", "R", "beta0", "beta1", "beta2", "a", "p", "gamma", "chi", "phi"});
    cfg.T = prob.number("T", 1.0);
    cfg.bounds.s0 = prob.number("s0", 1.0);
    cfg.bounds.ell = prob.number("ell", 2.0);
    cfg.bounds.delta = prob.number("delta", 0.5);
    cfg.bounds.R = prob.number("R", 10.0);
    cfg.weights = {prob.number("beta0", 1.0), prob.number("beta1", 1.0), prob.number("beta2", 1.0)};
    cfg.a = prob.expression("a", "1", true, true);
    cfg.p = prob.expression("p", "0", true, true);
    cfg.gamma = prob.expression("gamma", "0", true, true);
    cfg.chi = prob.expression("chi", "0", true, true);
    cfg.phi = prob.expression("phi", "0", true, false);

    require(cfg.T > 0.0, "problem.T", "must be > 0");
    require(cfg.bounds.delta > 0.0, "problem.delta", "must be > 0");
    require(cfg.bounds.s0 >= cfg.bounds.delta, "problem.s0", "must be >= delta");
    require(cfg.bounds.ell >= cfg.bounds.s0, "problem.ell", "must be >= s0");
    require(cfg.bounds.R > 0.0, "problem.R", "must be > 0");
    require(cfg.bounds.s0 * std::sqrt(cfg.T) <= cfg.bounds.R, "problem.R",
            "must admit the constant boundary s0 (s0 * sqrt(T) <= R)");
    require(cfg.weights.beta0 >= 0.0, "problem.beta0", "must be >= 0");
    require(cfg.weights.beta1 >= 0.0, "problem.beta1", "must be >= 0");
    require(cfg.weights.beta2 >= 0.0, "problem.beta2", "must be >= 0");
    const double reach = cfg.bounds.s0 + cfg.bounds.R * std::pow(cfg.T, 1.5);
    if (cfg.bounds.ell < reach)
        cfg.warnings.push_back("ell = " + number_text(cfg.bounds.ell) +
                               " is below s0 + R T^{3/2} = " + number_text(reach) +
                               "; admissible boundaries may reach ell and are clipped there");

    const Section disc(top.raw("discretization"), "discretization", origin,
                       {"n", "levels", "m0_policy", "m0", "htau_c", "fine_factor"});
    if (disc.has("n") && disc.has("levels"))
        disc.fail(disc.where(disc.raw("levels")) + "give either 'discretization.n' or 'discretization.levels'");
    if (disc.has("levels")) {
        for (const double v : disc.numbers("levels")) {
            if (v != std::floor(v)) disc.fail(disc.where(disc.raw("levels")) + "'discretization.levels' must be integers");
            cfg.levels.push_back(static_cast<int>(v));
        }
        require(!cfg.levels.empty(), "discretization.levels", "must not be empty");
    } else {
        cfg.levels.push_back(disc.integer("n", 16));
    }
    for (std::size_t j = 0; j < cfg.levels.size(); ++j) {
        require(cfg.levels[j] >= 2, "discretization.levels", "entries must be >= 2");
        if (j > 0) require(cfg.levels[j] > cfg.levels[j - 1], "discretization.levels", "must be increasing");
    }
    const std::string policy = disc.text("m0_policy", "sqrt_tau");
    if (policy == "sqrt_tau")
        cfg.grid.policy = M0Policy::SqrtTau;
    else if (policy == "tau")
        cfg.grid.policy = M0Policy::Tau;
    else if (policy == "fixed")
        cfg.grid.policy = M0Policy::Fixed;
    else
        disc.fail(disc.where(disc.raw("m0_policy")) + "'discretization.m0_policy' must be sqrt_tau, tau or fixed");
    cfg.grid.htau_c = disc.number("htau_c", 1.0);
    cfg.grid.m0 = disc.integer("m0", 0);
    cfg.fine_factor = disc.integer("fine_factor", 8);
    require(cfg.grid.htau_c > 0.0, "discretization.htau_c", "must be > 0");
    if (cfg.grid.policy == M0Policy::Fixed) require(cfg.grid.m0 >= 2, "discretization.m0", "must be >= 2");
    require(cfg.fine_factor >= 1, "discretization.fine_factor", "must be >= 1");

    const Section ctl(top.raw("controls"), "controls", origin, {"s", "g", "f", "b", "c"});
    cfg.s = block_spec(ctl, "s", number_text(cfg.bounds.s0), false, origin);
    cfg.g = block_spec(ctl, "g", "0", false, origin);
    cfg.f = block_spec(ctl, "f", "0", true, origin);
    cfg.b = block_spec(ctl, "b", "0", true, origin);
    cfg.c = block_spec(ctl, "c", "0", true, origin);
    require(cfg.f.mode != ControlMode::Values, "controls.f", "does not accept explicit values; use an expression");
    for (const auto& [name, spec] : {std::pair<const char*, const BlockSpec*>{"s", &cfg.s}, {"g", &cfg.g},
                                     {"b", &cfg.b}, {"c", &cfg.c}}) {
        if (spec->mode != ControlMode::Values) continue;
        const std::string field = std::string("controls.") + name + ".values";
        require(cfg.levels.size() == 1, field, "needs a single resolution (discretization.n)");
        require(static_cast<int>(spec->values.size()) == cfg.levels[0] + 1, field,
                "must have n + 1 = " + std::to_string(cfg.levels[0] + 1) + " entries");
    }

    if (top.has("measurements")) {
        const Section ms(top.raw("measurements"), "measurements", origin, {"w", "mu", "s_bar", "synthetic"});
        cfg.measurements.present = true;
        if (ms.has("synthetic")) {
            if (ms.has("w") || ms.has("mu") || ms.has("s_bar"))
                ms.fail(ms.where(ms.raw("synthetic")) + "'measurements.synthetic' excludes w, mu and s_bar");
            const Section syn(ms.raw("synthetic"), "measurements.synthetic", origin, {"n", "s", "g", "f", "b", "c"});
            SyntheticSpec spec;
            spec.n = syn.integer("n", 0);
            require(spec.n == 0 || spec.n >= 2, "measurements.synthetic.n", "must be >= 2");
            spec.s = syn.expression("s", number_text(cfg.bounds.s0), false, true);
            spec.g = syn.expression("g", "0", false, true);
            spec.f = syn.expression("f", "0", true, true);
            spec.b = syn.expression("b", "0", true, true);
            spec.c = syn.expression("c", "0", true, true);
            if (spec.n == 0) spec.n = cfg.fine_factor * cfg.levels.back();
            cfg.measurements.synthetic = spec;
        } else {
            cfg.measurements.w = ms.expression("w", "0", true, false);
            cfg.measurements.mu = ms.expression("mu", "0", false, true);
            cfg.measurements.s_bar = ms.number("s_bar", cfg.bounds.s0);
            require(cfg.measurements.s_bar >= cfg.bounds.delta && cfg.measurements.s_bar <= cfg.bounds.ell,
                    "measurements.s_bar", "must lie in [delta, ell]");
        }
    }

    const Section opt(top.raw("optimizer"), "optimizer", origin,
                      {"method", "max_evals", "step_init", "step_min", "fd_epsilon", "seed"});
    const std::string method = opt.text("method", "compass");
    if (method == "compass")
        cfg.optimizer.method = Method::CompassSearch;
    else if (method == "fd_gradient")
        cfg.optimizer.method = Method::FdProjectedGradient;
    else
        opt.fail(opt.where(opt.raw("method")) + "'optimizer.method' must be compass or fd_gradient");
    cfg.optimizer.max_evals = opt.integer("max_evals", cfg.optimizer.max_evals);
    cfg.optimizer.step_init = block_values(opt, "step_init", cfg.optimizer.step_init, origin);
    cfg.optimizer.step_min = block_values(opt, "step_min", cfg.optimizer.step_min, origin);
    cfg.optimizer.fd_epsilon = opt.number("fd_epsilon", cfg.optimizer.fd_epsilon);
    if (opt.has("seed")) {
        try {
            cfg.optimizer.seed = opt.raw("seed").as<std::uint64_t>();
        } catch (const YAML::Exception&) {
            opt.fail(opt.where(opt.raw("seed")) + "'optimizer.seed' must be a nonnegative integer");
        }
    }
    require(cfg.optimizer.max_evals >= 1, "optimizer.max_evals", "must be >= 1");
    for (const Block blk : {Block::S, Block::G, Block::F, Block::B, Block::C}) {
        require(cfg.optimizer.step_min[blk] > 0.0, "optimizer.step_min", "must be > 0");
        require(cfg.optimizer.step_init[blk] >= cfg.optimizer.step_min[blk], "optimizer.step_init",
                "must be >= step_min");
    }
    require(cfg.optimizer.fd_epsilon > 0.0, "optimizer.fd_epsilon", "must be > 0");
    cfg.optimizer.optimize = optimize_mask(cfg);

    const Section out(top.raw("output"), "output", origin, {"dir", "record_timing", "state"});
    cfg.out_dir = out.text("dir", "out");
    cfg.record_timing = out.boolean("record_timing", false);
    cfg.write_state = out.boolean("state", true);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

ProblemData make_problem(const ExperimentConfig& cfg) {
    ProblemData d;
    d.a = Field(cfg.a);
    d.p = Field(cfg.p);
    d.gamma = Field(cfg.gamma);
    d.chi = Field(cfg.chi);
    d.phi = Field(cfg.phi);
    d.T = cfg.T;
    d.bounds = cfg.bounds;
    return d;
}

namespace {

TimeFn time_fn(const expr::Expr& e) {
    if (e.is_constant()) {
        const double v = e.eval(0.0, 0.0);
        return [v](double) { return v; };
    }
    return [e](double t) { return e.eval(0.0, t); };
}

ContinuousControl control_from(const expr::Expr& s, const expr::Expr& g, const expr::Expr& f, const expr::Expr& b,
                               const expr::Expr& c) {
    ContinuousControl v;
    v.s = time_fn(s);
    if (s.is_constant()) v.s_prime = v.s_second = [](double) { return 0.0; };
    v.g = time_fn(g);
    if (g.is_constant()) v.g_prime = [](double) { return 0.0; };
    v.f = Field(f);
    v.b = Field(b);
    v.c = Field(c);
    return v;
}

}  // namespace

ContinuousControl make_control(const ExperimentConfig& cfg) {
    return control_from(cfg.s.expr, cfg.g.expr, cfg.f.expr, cfg.b.expr, cfg.c.expr);
}

BlockMask optimize_mask(const ExperimentConfig& cfg) {
    return {cfg.s.mode == ControlMode::Optimize, cfg.g.mode == ControlMode::Optimize,
            cfg.f.mode == ControlMode::Optimize, cfg.b.mode == ControlMode::Optimize,
            cfg.c.mode == ControlMode::Optimize};
}

std::pair<DiscreteControl, MovingGrid> initial_control(const ExperimentConfig& cfg, int n) {
    const TimeGrid time = build_time_grid(cfg.T, n);
    const CoefficientBasis basis(cfg.bounds.ell, cfg.T, n + 1);
    const ContinuousControl cont = make_control(cfg);
    DiscreteControl v;
    v.s = cfg.s.mode == ControlMode::Values ? cfg.s.values : sample_boundary(cont.s, cfg.bounds.s0, time);
    MovingGrid grid = build_moving_grid(v.s, cfg.bounds.ell, cfg.bounds.delta, time.tau, cfg.grid);
    if (cfg.g.mode == ControlMode::Values) {
        v.g = cfg.g.values;
    } else {
        v.g.resize(static_cast<std::size_t>(n) + 1);
        for (int k = 0; k <= n; ++k) v.g[static_cast<std::size_t>(k)] = cont.g(time.t(k));
    }
    v.f = cell_averages(cont.f, grid, time, CellRange::All).values;
    v.b = cfg.b.mode == ControlMode::Values ? cfg.b.values : basis.project(cont.b);
    v.c = cfg.c.mode == ControlMode::Values ? cfg.c.values : basis.project(cont.c);
    return {std::move(v), std::move(grid)};
}

Measurements make_measurements(const ExperimentConfig& cfg) {
    const MeasurementSpec& ms = cfg.measurements;
    if (!ms.present) throw InvalidArgument("the config has no 'measurements' section");
    if (ms.synthetic) {
        const SyntheticSpec& syn = *ms.synthetic;
        const ProblemData data = make_problem(cfg);
        const ContinuousControl truth = control_from(syn.s, syn.g, syn.f, syn.b, syn.c);
        const TimeGrid time = build_time_grid(cfg.T, syn.n);
        auto basis = std::make_shared<const CoefficientBasis>(cfg.bounds.ell, cfg.T, syn.n + 1);
        auto [v, grid] = discretize_control(truth, data, time, cfg.grid, *basis);
        const DiscreteState st = run_forward(v, data, grid, time, basis);
        return measurements_from_state(st, v);
    }
    Measurements m;
    m.w = Field(ms.w);
    m.mu = time_fn(ms.mu);
    m.s_bar = ms.s_bar;
    return m;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const std::string& s) {
        for (const unsigned char ch : s) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
    };
    feed(cfg.source);
    feed("\nseed=" + std::to_string(cfg.optimizer.seed));
    return h;
}

}  // namespace stefan
