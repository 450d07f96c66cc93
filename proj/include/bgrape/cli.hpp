#pragma once

// Command-line front end. Subcommands: optimize, landscape, distribution,
// baseline, evaluate.

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>

#include "bgrape/config.hpp"

namespace bgrape {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNumericError = 3;

std::unique_ptr<HamiltonianModel> make_model(const ExperimentConfig& config);
GateTarget make_gate(const ExperimentConfig& config);

/// Output directory for one run: `base` itself with `force`, otherwise a new
/// `base/<command>-<UTC timestamp>[-n]` that did not exist before.
std::filesystem::path prepare_output_dir(const std::filesystem::path& base,
                                         const std::string& command, bool force);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bgrape
