#pragma once

// Command-line front end: configuration, subcommands and file output.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kolmo/dynamics.hpp"

namespace kolmo::cli {

enum class Format { csv, json };

struct RunConfig {
    SimConfig sim;
    std::optional<double> reynolds;  ///< unset: subcommands that allow it use R_c
    double theta = 0.0;
    int order = 2;

    // sweeps
    std::vector<double> r_list;
    double r_min = 0.0, r_max = 0.0;
    int r_count = 0;
    std::vector<double> kx_list;
    double kx_min = 0.0, kx_max = 0.0;
    int kx_count = 0;

    // field sampling
    int grid_nx = 241;
    int grid_ny = 0;         ///< 0 selects 2N * 30 + 1
    double x_periods = 3.0;  ///< sampled window is centred on x = 0
    std::string source = "secondary";  ///< field: basic | eigen | secondary | state
    std::string state_file;

    // simulate / sensitivity
    std::string initial = "basic";  ///< basic | secondary
    double perturb = 1e-3;
    bool stop_at_steady = false;
    int runs = 4;
    unsigned threads = 0;

    std::filesystem::path out = ".";
    Format format = Format::csv;

    std::vector<double> r_grid() const;
    std::vector<double> kx_grid() const;
    int field_ny() const { return grid_ny > 0 ? grid_ny : 2 * sim.geom.n_walls * 30 + 1; }
    void validate() const;
};

/// Sets one key; both '-' and '_' separators are accepted. Unknown keys and
/// unparsable values throw ValidationError.
void apply_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// Flat "key = value" text with '#' comments.
void apply_config_text(RunConfig& cfg, const std::string& text);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Documented list of all keys, as printed by --help.
std::string key_help();

/// 17 significant digits, "nan"/"inf"/"-inf" for non-finite values.
std::string fmt(double v);

int cmd_sigma_curve(const RunConfig& cfg, std::ostream& log);
int cmd_neutral_curve(const RunConfig& cfg, std::ostream& log);
int cmd_eigenfunction(const RunConfig& cfg, std::ostream& log);
int cmd_landau(const RunConfig& cfg, std::ostream& log);
int cmd_secondary(const RunConfig& cfg, std::ostream& log);
int cmd_simulate(const RunConfig& cfg, std::ostream& log);
int cmd_field(const RunConfig& cfg, std::ostream& log);
int cmd_sensitivity(const RunConfig& cfg, std::ostream& log);

/// Full entry point. Exit codes: 0 success, 2 validation error, 3 numerical failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kolmo::cli
