#include "bgrape/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace bgrape {

namespace fs = std::filesystem;

std::string format_number(double value) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                 std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

namespace {

std::ofstream open_for_write(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& text, const fs::path& path, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || text.find_first_not_of(" \t\r", used) != std::string::npos) {
    throw IoError(path.string() + ":" + std::to_string(line) + ": not a number: '" +
                  text + "'");
  }
  return v;
}

long parse_index(const std::string& text, const fs::path& path, std::size_t line) {
  const double v = parse_double(text, path, line);
  if (v < 0 || v != static_cast<double>(static_cast<long>(v))) {
    throw IoError(path.string() + ":" + std::to_string(line) +
                  ": expected a non-negative integer, got '" + text + "'");
  }
  return static_cast<long>(v);
}

struct CsvRows {
  std::vector<std::string> comments;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
};

CsvRows read_csv(const fs::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CsvRows out;
  std::string line;
  std::size_t number = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      out.comments.push_back(line);
      continue;
    }
    if (!seen_header) {
      if (line != header) {
        throw IoError(path.string() + ":" + std::to_string(number) +
                      ": expected header '" + header + "'");
      }
      seen_header = true;
      continue;
    }
    out.rows.emplace_back(number, split_csv(line));
  }
  if (!seen_header) throw IoError(path.string() + ": missing header '" + header + "'");
  return out;
}

}  // namespace

TraceWriter::TraceWriter(const fs::path& path)
    : path_(path), out_(std::make_unique<std::ofstream>(open_for_write(path))) {
  *out_ << "iter,samples,batch_loss,test_loss\n";
}

void TraceWriter::write(const TraceRow& row) {
  *out_ << row.iteration << ',' << row.samples << ',' << format_number(row.batch_loss)
        << ',';
  if (row.test_loss) *out_ << format_number(*row.test_loss);
  *out_ << '\n';
  finish(*out_, path_);
}

void write_field(const fs::path& path, const ControlField& field) {
  std::ofstream out = open_for_write(path);
  out << "# duration = " << format_number(field.duration()) << '\n';
  out << "segment,channel,amplitude\n";
  for (Eigen::Index m = 0; m < field.num_segments(); ++m) {
    for (Eigen::Index k = 0; k < field.num_controls(); ++k) {
      out << m << ',' << k << ',' << format_number(field(m, k)) << '\n';
    }
  }
  finish(out, path);
}

ControlField read_field(const fs::path& path, std::optional<double> fallback_duration,
                        std::optional<double> bound) {
  const CsvRows csv = read_csv(path, "segment,channel,amplitude");
  std::optional<double> duration = fallback_duration;
  for (const std::string& c : csv.comments) {
    const auto eq = c.find('=');
    if (c.find("duration") != std::string::npos && eq != std::string::npos) {
      duration = parse_double(c.substr(eq + 1), path, 1);
    }
  }
  if (!duration) throw IoError(path.string() + ": no duration in file or config");

  std::map<std::pair<long, long>, double> cells;
  long max_m = -1, max_k = -1;
  for (const auto& [line, cols] : csv.rows) {
    if (cols.size() != 3) {
      throw IoError(path.string() + ":" + std::to_string(line) + ": expected 3 columns");
    }
    const long m = parse_index(cols[0], path, line);
    const long k = parse_index(cols[1], path, line);
    if (!cells.emplace(std::make_pair(m, k), parse_double(cols[2], path, line)).second) {
      throw IoError(path.string() + ":" + std::to_string(line) + ": duplicate entry (" +
                    cols[0] + ", " + cols[1] + ")");
    }
    max_m = std::max(max_m, m);
    max_k = std::max(max_k, k);
  }
  if (cells.empty()) throw IoError(path.string() + ": no amplitudes");
  const auto rows = static_cast<std::size_t>(max_m + 1);
  const auto cols = static_cast<std::size_t>(max_k + 1);
  if (cells.size() != rows * cols) {
    throw IoError(path.string() + ": amplitudes do not form a full " +
                  std::to_string(rows) + "x" + std::to_string(cols) + " table");
  }
  RealMatrix a(max_m + 1, max_k + 1);
  for (const auto& [mk, v] : cells) a(mk.first, mk.second) = v;
  try {
    return ControlField(std::move(a), *duration, bound);
  } catch (const ContractError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_landscape(const fs::path& path, const RobustnessLandscape& landscape) {
  std::ofstream out = open_for_write(path);
  out << "eps1,eps2,infidelity\n";
  for (std::size_t i = 0; i < landscape.grid.eps1.points; ++i) {
    for (std::size_t j = 0; j < landscape.grid.eps2.points; ++j) {
      out << format_number(landscape.grid.eps1.node(i)) << ','
          << format_number(landscape.grid.eps2.node(j)) << ','
          << format_number(landscape.values(static_cast<Eigen::Index>(i),
                                            static_cast<Eigen::Index>(j)))
          << '\n';
    }
  }
  finish(out, path);
}

void write_errors(const fs::path& path, const ErrorDistribution& errors) {
  std::ofstream out = open_for_write(path);
  out << "index,infidelity\n";
  for (std::size_t i = 0; i < errors.errors.size(); ++i) {
    out << i << ',' << format_number(errors.errors[i]) << '\n';
  }
  finish(out, path);
}

void write_target(const fs::path& path, const ComplexMatrix& matrix) {
  std::ofstream out = open_for_write(path);
  out << "row,col,re,im\n";
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
      out << r << ',' << c << ',' << format_number(matrix(r, c).real()) << ','
          << format_number(matrix(r, c).imag()) << '\n';
    }
  }
  finish(out, path);
}

ComplexMatrix read_target(const fs::path& path) {
  const CsvRows csv = read_csv(path, "row,col,re,im");
  std::map<std::pair<long, long>, Complex> cells;
  long n = 0;
  for (const auto& [line, cols] : csv.rows) {
    if (cols.size() != 4) {
      throw IoError(path.string() + ":" + std::to_string(line) + ": expected 4 columns");
    }
    const long r = parse_index(cols[0], path, line);
    const long c = parse_index(cols[1], path, line);
    cells[{r, c}] = Complex(parse_double(cols[2], path, line), parse_double(cols[3], path, line));
    n = std::max({n, r + 1, c + 1});
  }
  if (n == 0 || cells.size() != static_cast<std::size_t>(n * n)) {
    throw IoError(path.string() + ": entries do not form a square matrix");
  }
  ComplexMatrix m(n, n);
  for (const auto& [rc, v] : cells) m(rc.first, rc.second) = v;
  return m;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                               &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256: digest init failed");
  }
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

void write_atomically(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out = open_for_write(tmp);
    out << text;
    finish(out, tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace bgrape
