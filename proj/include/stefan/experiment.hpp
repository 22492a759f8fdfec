#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iosfwd>
#include <string>
#include <vector>

#include "stefan/config.hpp"

namespace stefan {

enum class Verb { Forward, Invert, Study, Check };

const char* to_string(Verb verb);

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

/// %.17g
std::string format_double(double v);

std::string hash_hex(std::uint64_t h);

/// CSV file whose first line is "# config_hash: <hex>".
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::uint64_t hash, std::initializer_list<const char*> columns);

    /// Cells are already formatted.
    void row(const std::vector<std::string>& cells);

private:
    std::ofstream out_;
    std::filesystem::path path_;
    std::size_t width_;
};

/// Human-readable description of what `verb` would do.
std::string describe_plan(const ExperimentConfig& cfg, Verb verb);

/// Runs the verb, writing artifacts into cfg.out_dir (nothing when
/// dry_run). Returns the process exit status; failures are recorded in
/// run_metadata.json and reported on `log`.
int run_experiment(const ExperimentConfig& cfg, Verb verb, bool dry_run, std::ostream& log);

}  // namespace stefan
