#pragma once

// Experiment configuration files.
//
// The format is a small TOML subset: `[section]` headers, `key = value`
// lines, `#` comments. Values are numbers, booleans, double-quoted strings or
// single-line arrays of numbers. Keys before the first header belong to the
// root section.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bgrape/evaluation.hpp"
#include "bgrape/optimizer.hpp"

namespace bgrape {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(what), line_(line) {}
  /// 1-based line of the offending entry, 0 when not tied to a line.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

using ConfigValue = std::variant<double, bool, std::string, std::vector<double>>;

struct ConfigEntry {
  ConfigValue value;
  std::size_t line = 0;
};

class ConfigTable {
 public:
  static ConfigTable parse(const std::string& text, const std::string& origin = "config");
  static ConfigTable load(const std::filesystem::path& path);

  bool has(const std::string& section, const std::string& key) const;
  /// Line of the entry, 0 when absent.
  std::size_t line(const std::string& section, const std::string& key) const;

  std::optional<double> number(const std::string& section, const std::string& key) const;
  std::optional<std::int64_t> integer(const std::string& section, const std::string& key) const;
  std::optional<bool> boolean(const std::string& section, const std::string& key) const;
  std::optional<std::string> string(const std::string& section, const std::string& key) const;
  std::optional<std::vector<double>> array(const std::string& section,
                                           const std::string& key) const;

  /// Throws on any key in `section` not listed in `allowed`.
  void require_known(const std::string& section,
                     const std::vector<std::string>& allowed) const;
  std::vector<std::string> sections() const;
  /// Line of the section header, 0 for the root section.
  std::size_t section_line(const std::string& section) const;

  const std::string& origin() const { return origin_; }

 private:
  const ConfigEntry* find(const std::string& section, const std::string& key) const;
  [[noreturn]] void type_error(const std::string& section, const std::string& key,
                               const char* expected) const;

  std::string origin_;
  std::map<std::string, std::map<std::string, ConfigEntry>> sections_;
  std::map<std::string, std::size_t> section_lines_;
};

enum class ModelKind { kThreeQubit, kNoisyQubit };
enum class TargetKind { kToffoli, kRxPi, kFile };

struct ExperimentConfig {
  std::uint64_t seed = 0;

  ModelKind model = ModelKind::kThreeQubit;
  double duration = 10.0;
  Eigen::Index segments = 100;
  std::optional<double> bound;

  TargetKind target = TargetKind::kToffoli;
  std::filesystem::path target_file;
  /// Rephase the target to determinant 1 (see special_unitary_representative).
  bool special_unitary = true;

  UncertaintyDistribution distribution;

  BatchMode batch_mode = BatchMode::kFresh;
  std::size_t batch_size = 10;
  OptimizerConfig optimizer;
  /// Starting field; drawn at random from the seed when empty.
  std::filesystem::path initial_field;

  GridSpec grid;
  double threshold = 1e-3;
  std::size_t eval_samples = 10000;

  BaselineKind baseline = BaselineKind::kRectangular;
  std::optional<double> gaussian_width;

  std::filesystem::path output_dir = "runs";
  int threads = 1;

  /// Verbatim config text, echoed into manifests.
  std::string source_text;
};

/// Reads and validates a config file. Relative paths inside the file are
/// resolved against the file's directory. Throws ConfigError.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::filesystem::path& base_dir,
                                         const std::string& origin = "config");

std::string to_string(FidelityKind kind);
std::string to_string(BatchMode mode);
std::string to_string(MomentumKind kind);
std::string to_string(ModelKind kind);
std::string to_string(BaselineKind kind);

}  // namespace bgrape
