#pragma once

// File formats shared by the command-line tool and the plotting scripts.
//
//   trace.csv      iter,samples,batch_loss,test_loss   (test_loss empty when not evaluated)
//   field CSV      segment,channel,amplitude           (plus a "# duration = T" first line)
//   landscape.csv  eps1,eps2,infidelity
//   errors.csv     index,infidelity                    (ascending)
//   target CSV     row,col,re,im
//
// Numbers are written with 17 significant digits.

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bgrape/dynamics.hpp"
#include "bgrape/evaluation.hpp"
#include "bgrape/optimizer.hpp"

namespace bgrape {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_number(double value);

class TraceWriter {
 public:
  explicit TraceWriter(const std::filesystem::path& path);
  void write(const TraceRow& row);

 private:
  std::filesystem::path path_;
  std::unique_ptr<std::ofstream> out_;
};

void write_field(const std::filesystem::path& path, const ControlField& field);
/// Reads a field written by write_field. The duration comes from the header
/// line when present, otherwise from `fallback_duration`.
ControlField read_field(const std::filesystem::path& path,
                        std::optional<double> fallback_duration = std::nullopt,
                        std::optional<double> bound = std::nullopt);

void write_landscape(const std::filesystem::path& path, const RobustnessLandscape& landscape);
void write_errors(const std::filesystem::path& path, const ErrorDistribution& errors);

void write_target(const std::filesystem::path& path, const ComplexMatrix& matrix);
ComplexMatrix read_target(const std::filesystem::path& path);

/// Lower-case hex SHA-256 of the file contents.
std::string sha256_file(const std::filesystem::path& path);

/// Writes `text` to a temporary sibling and renames it over `path`.
void write_atomically(const std::filesystem::path& path, const std::string& text);

}  // namespace bgrape
