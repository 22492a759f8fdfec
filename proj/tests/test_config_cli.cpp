#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "stefan/config.hpp"
#include "stefan/error.hpp"
#include "stefan/experiment.hpp"

using namespace stefan;
namespace fs = std::filesystem;

namespace {
const std::string base = R"(problem:
  T: 1
  s0: 1
  ell: 2
  delta: 0.5
  R: 10
  chi: 2*x
  phi: x^2
discretization:
  levels: [4, 8]
controls:
  s: {mode: fixed, expr: 1}
  g: {mode: fixed, expr: 0}
)";

std::string replace(std::string s, const std::string& from, const std::string& to) {
    s.replace(s.find(from), from.size(), to);
    return s;
}
}  // namespace

TEST_CASE("valid config parses") {
    const ExperimentConfig c = parse_config(base);
    CHECK(c.levels == std::vector<int>{4, 8});
    CHECK(c.bounds.delta == 0.5);
    CHECK(c.phi.eval(3.0, 0.0) == 9.0);
    CHECK(c.s.mode == ControlMode::Fixed);
    CHECK_FALSE(optimize_mask(c).g);
}

TEST_CASE("config errors name the field") {
    try {
        parse_config(replace(base, "delta: 0.5", "delta: 0"));
        FAIL("expected ConstraintViolation");
    } catch (const ConstraintViolation& e) {
        CHECK(std::string(e.what()).find("delta") != std::string::npos);
    }
    try {
        parse_config(replace(base, "phi: x^2", "phi: x^^2"));
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(std::string(e.what()).find("phi") != std::string::npos);
    }
    try {
        parse_config(replace(base, "R: 10", "R: 10\n  Rr: 3"));
        FAIL("expected InvalidArgument");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find("Rr") != std::string::npos);
    }
    CHECK_THROWS(parse_config(replace(base, "phi: x^2", "phi: x*t")));
    CHECK_THROWS_AS(load_config("/nonexistent/config.yaml"), IoError);
}

TEST_CASE("config hash depends on seed and text") {
    ExperimentConfig a = parse_config(base), b = parse_config(base);
    CHECK(config_hash(a) == config_hash(b));
    b.optimizer.seed = 9;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(hash_hex(0xabcULL).size() == 16);
    CHECK(format_double(0.1) == "0.10000000000000001");
}

namespace {
int run_cli(const std::string& args) {
    return std::system((std::string(STEFAN_CLI) + " " + args + " > /dev/null 2>&1").c_str());
}
}  // namespace

TEST_CASE("CLI dry run writes nothing and reports config errors") {
    const fs::path dir = fs::temp_directory_path() / "stefan_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "c.yaml";
    std::ofstream(cfg) << base;
    const fs::path out = dir / "out";
    CHECK(run_cli("--config " + cfg.string() + " --out " + out.string() + " --dry-run forward") == 0);
    CHECK(WEXITSTATUS(run_cli("--config " + cfg.string() + " --out " + out.string() + " --dry-run study")) == 2);
    const fs::path inv = dir / "inv.yaml";
    std::ofstream(inv) << replace(base, "g: {mode: fixed, expr: 0}", "g: {mode: optimize, init: 0}") +
                              "measurements:\n  synthetic: {n: 16, s: 1, g: 1}\n";
    CHECK(run_cli("--config " + inv.string() + " --out " + out.string() + " --dry-run study") == 0);
    CHECK_FALSE(fs::exists(out));
    CHECK(run_cli("--config " + cfg.string() + " --out " + out.string() + " forward") == 0);
    CHECK(fs::exists(out / "run_metadata.json"));
    const fs::path bad = dir / "bad.yaml";
    std::ofstream(bad) << replace(base, "delta: 0.5", "delta: -1");
    CHECK(WEXITSTATUS(run_cli("--config " + bad.string() + " --dry-run forward")) == 2);
    // invert takes a single level
    CHECK(WEXITSTATUS(run_cli("--config " + inv.string() + " --out " + out.string() + " --dry-run invert")) == 2);
    fs::remove_all(dir);
}
