#pragma once

#include "cavity/experiments.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cavity::cli {

enum class Command { trajectory, estimator, transition, profile, sweep, figure };
enum class FigureId { fig2, fig3, fig4, fig5a, fig5b };

std::string_view to_string(Command c);
std::string_view to_string(FigureId f);

/// Malformed input: bad flag, bad JSON, unknown key or a value of the wrong shape.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum ExitCode : int { kOk = 0, kFailure = 1, kInvalid = 2, kAccuracy = 3 };

/// --help was given; carries the help text.
class HelpRequested : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    Command command = Command::estimator;
    std::optional<FigureId> figure;

    // Physics and accuracy settings for every command. Single-worldline
    // commands (trajectory, transition) use the first R, L and anchor and a
    // scenario of schwarzschild or rindler.
    SweepSpec sweep;

    std::optional<double> a;         // Rindler acceleration; matched from (R, L, anchor) when absent
    std::optional<double> tau_end;   // defaults to the full transit
    int samples = 201;               // trajectory rows

    // Estimator commands evaluate every (R, L) of `sweep`; fig2 adds the two slices.
    double slice_L = 2.0;
    double slice_R = 10.0;

    std::filesystem::path output;  // main CSV; the manifest goes next to it
    std::vector<std::string> overridden;  // figure parameters changed under --override

    /// Throws DomainError on any physical or numerical invariant violation.
    void validate() const;
};

/// Parses command-line arguments (argv[0] excluded) with an optional JSON
/// config named by --config. Flags override config keys. `default_output_dir`
/// is used when no --output is given. Throws ConfigError, HelpRequested or
/// DomainError.
RunConfig parse_config(const std::vector<std::string>& args, const std::filesystem::path& default_output_dir);

struct ExecuteReport {
    std::vector<std::filesystem::path> written;
    std::size_t rows = 0;
    std::size_t flagged_rows = 0;
};

/// Runs the command and writes CSV(s) plus a JSON manifest atomically. On any
/// exception nothing is left behind.
ExecuteReport execute(const RunConfig& cfg);

/// Full entry point: parse, execute, map exceptions to exit codes.
int run(const std::vector<std::string>& args);

}  // namespace cavity::cli
