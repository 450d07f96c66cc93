#include "bgrape/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "bgrape/io.hpp"

namespace bgrape {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Drops a trailing comment, ignoring '#' inside double quotes.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

bool parse_number(const std::string& text, double& out) {
  if (text.empty()) return false;
  std::string t;
  t.reserve(text.size());
  for (char c : text) {
    if (c != '_') t.push_back(c);
  }
  std::size_t used = 0;
  try {
    out = std::stod(t, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == t.size() && std::isfinite(out);
}

ConfigValue parse_value(const std::string& text, const std::string& where) {
  if (text.empty()) throw ConfigError(where + ": missing value");
  if (text.front() == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < text.size() && text[i] != '"'; ++i) {
      if (text[i] == '\\' && i + 1 < text.size()) {
        const char c = text[++i];
        out.push_back(c == 'n' ? '\n' : c == 't' ? '\t' : c);
      } else {
        out.push_back(text[i]);
      }
    }
    if (i >= text.size()) throw ConfigError(where + ": unterminated string");
    if (!trim(text.substr(i + 1)).empty()) {
      throw ConfigError(where + ": unexpected text after string");
    }
    return out;
  }
  if (text == "true") return true;
  if (text == "false") return false;
  if (text.front() == '[') {
    if (text.back() != ']') throw ConfigError(where + ": unterminated array");
    std::vector<double> values;
    const std::string body = trim(text.substr(1, text.size() - 2));
    if (body.empty()) return values;
    std::istringstream in(body);
    std::string item;
    while (std::getline(in, item, ',')) {
      double v = 0.0;
      item = trim(item);
      if (item.empty() && in.eof()) break;  // trailing comma
      if (!parse_number(item, v)) {
        throw ConfigError(where + ": array element '" + item + "' is not a number");
      }
      values.push_back(v);
    }
    return values;
  }
  double v = 0.0;
  if (!parse_number(text, v)) {
    throw ConfigError(where + ": cannot parse value '" + text +
                      "' (strings need double quotes)");
  }
  return v;
}

std::string qualified(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

}  // namespace

ConfigTable ConfigTable::parse(const std::string& text, const std::string& origin) {
  ConfigTable table;
  table.origin_ = origin;
  table.sections_[""];
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const std::string where = origin + ":" + std::to_string(number);
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header", number);
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name", number);
      if (table.sections_.count(section) && section != "") {
        throw ConfigError(where + ": section [" + section + "] appears twice", number);
      }
      table.sections_[section];
      table.section_lines_[section] = number;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected 'key = value'", number);
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": missing key", number);
    ConfigValue value;
    try {
      value = parse_value(trim(line.substr(eq + 1)), where);
    } catch (ConfigError& e) {
      throw ConfigError(e.what(), number);
    }
    auto& entries = table.sections_[section];
    if (!entries.emplace(key, ConfigEntry{std::move(value), number}).second) {
      throw ConfigError(where + ": duplicate key '" + qualified(section, key) + "'", number);
    }
  }
  return table;
}

ConfigTable ConfigTable::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path.string());
}

const ConfigEntry* ConfigTable::find(const std::string& section,
                                     const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  const auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

std::size_t ConfigTable::line(const std::string& section, const std::string& key) const {
  const ConfigEntry* e = find(section, key);
  return e ? e->line : 0;
}

bool ConfigTable::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

void ConfigTable::type_error(const std::string& section, const std::string& key,
                             const char* expected) const {
  const ConfigEntry* e = find(section, key);
  const std::size_t line = e ? e->line : 0;
  throw ConfigError(origin_ + ":" + std::to_string(line) + ": '" + qualified(section, key) +
                        "' must be " + expected,
                    line);
}

std::optional<double> ConfigTable::number(const std::string& section,
                                          const std::string& key) const {
  const ConfigEntry* e = find(section, key);
  if (!e) return std::nullopt;
  if (const auto* v = std::get_if<double>(&e->value)) return *v;
  type_error(section, key, "a number");
}

std::optional<std::int64_t> ConfigTable::integer(const std::string& section,
                                                 const std::string& key) const {
  const auto v = number(section, key);
  if (!v) return std::nullopt;
  if (*v != std::floor(*v) || std::abs(*v) > 9.0e15) type_error(section, key, "an integer");
  return static_cast<std::int64_t>(*v);
}

std::optional<bool> ConfigTable::boolean(const std::string& section,
                                         const std::string& key) const {
  const ConfigEntry* e = find(section, key);
  if (!e) return std::nullopt;
  if (const auto* v = std::get_if<bool>(&e->value)) return *v;
  type_error(section, key, "true or false");
}

std::optional<std::string> ConfigTable::string(const std::string& section,
                                               const std::string& key) const {
  const ConfigEntry* e = find(section, key);
  if (!e) return std::nullopt;
  if (const auto* v = std::get_if<std::string>(&e->value)) return *v;
  type_error(section, key, "a quoted string");
}

std::optional<std::vector<double>> ConfigTable::array(const std::string& section,
                                                      const std::string& key) const {
  const ConfigEntry* e = find(section, key);
  if (!e) return std::nullopt;
  if (const auto* v = std::get_if<std::vector<double>>(&e->value)) return *v;
  type_error(section, key, "an array of numbers");
}

void ConfigTable::require_known(const std::string& section,
                                const std::vector<std::string>& allowed) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return;
  for (const auto& [key, entry] : s->second) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(origin_ + ":" + std::to_string(entry.line) + ": unknown key '" +
                            qualified(section, key) + "'",
                        entry.line);
    }
  }
}

std::size_t ConfigTable::section_line(const std::string& section) const {
  const auto it = section_lines_.find(section);
  return it == section_lines_.end() ? 0 : it->second;
}

std::vector<std::string> ConfigTable::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, entries] : sections_) out.push_back(name);
  return out;
}

std::string to_string(FidelityKind kind) {
  return kind == FidelityKind::kPhaseSensitive ? "phase_sensitive" : "phase_invariant";
}

std::string to_string(BatchMode mode) {
  switch (mode) {
    case BatchMode::kFresh: return "fresh";
    case BatchMode::kFixed: return "fixed";
    case BatchMode::kNominal: return "nominal";
  }
  return "?";
}

std::string to_string(MomentumKind kind) {
  switch (kind) {
    case MomentumKind::kNone: return "none";
    case MomentumKind::kBlend: return "blend";
    case MomentumKind::kAccumulated: return "accumulated";
  }
  return "?";
}

std::string to_string(ModelKind kind) {
  return kind == ModelKind::kThreeQubit ? "three_qubit" : "noisy_qubit";
}

std::string to_string(BaselineKind kind) {
  return kind == BaselineKind::kRectangular ? "rectangular" : "gaussian";
}

namespace {

class Reader {
 public:
  explicit Reader(const ConfigTable& t) : t_(t) {}

  [[noreturn]] void fail(const std::string& section, const std::string& key,
                         const std::string& message) const {
    const std::size_t line = t_.line(section, key);
    throw ConfigError(t_.origin() + ":" + std::to_string(line) + ": '" +
                          qualified(section, key) + "' " + message,
                      line);
  }

  std::size_t positive_size(const std::string& section, const std::string& key,
                            std::size_t fallback) const {
    const auto v = t_.integer(section, key);
    if (!v) return fallback;
    if (*v < 1) fail(section, key, "must be >= 1");
    return static_cast<std::size_t>(*v);
  }

  double number(const std::string& section, const std::string& key, double fallback) const {
    return t_.number(section, key).value_or(fallback);
  }

  double positive(const std::string& section, const std::string& key, double fallback) const {
    const double v = number(section, key, fallback);
    if (!(v > 0.0)) fail(section, key, "must be > 0");
    return v;
  }

  template <typename E>
  E choice(const std::string& section, const std::string& key, E fallback,
           const std::vector<std::pair<std::string, E>>& options) const {
    const auto v = t_.string(section, key);
    if (!v) return fallback;
    std::string names;
    for (const auto& [name, value] : options) {
      if (name == *v) return value;
      names += (names.empty() ? "" : ", ") + name;
    }
    fail(section, key, "must be one of: " + names);
  }

 private:
  const ConfigTable& t_;
};

const std::vector<std::string> kSections = {"",          "model",      "target",
                                            "distribution", "scheduler", "optimizer",
                                            "evaluation",   "baseline",  "output"};

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text, const fs::path& base_dir,
                                         const std::string& origin) {
  const ConfigTable t = ConfigTable::parse(text, origin);
  for (const std::string& s : t.sections()) {
    if (std::find(kSections.begin(), kSections.end(), s) == kSections.end()) {
      const std::size_t line = t.section_line(s);
      throw ConfigError(origin + ":" + std::to_string(line) + ": unknown section [" + s + "]",
                        line);
    }
  }
  t.require_known("", {"seed", "threads"});
  t.require_known("model", {"kind", "duration", "segments", "bound"});
  t.require_known("target", {"kind", "file", "special_unitary"});
  t.require_known("distribution",
                  {"kind", "lo", "hi", "modes", "freq_lo", "freq_hi", "amp_sigma"});
  t.require_known("scheduler", {"mode", "batch_size"});
  t.require_known("optimizer",
                  {"learning_rate", "step_scale", "momentum", "lambda", "sample_budget",
                   "test_set_size", "test_every", "stop_loss", "decay_every",
                   "decay_factor", "fidelity", "initial_field"});
  t.require_known("evaluation", {"grid_points", "grid_lo", "grid_hi", "threshold", "samples"});
  t.require_known("baseline", {"kind", "gaussian_width"});
  t.require_known("output", {"dir"});

  const Reader r(t);
  ExperimentConfig c;
  c.source_text = text;
  auto resolve = [&](const fs::path& p) { return p.is_absolute() ? p : base_dir / p; };

  const auto seed = t.integer("", "seed");
  if (!seed) throw ConfigError(origin + ": 'seed' is required");
  if (*seed < 0) r.fail("", "seed", "must be >= 0");
  c.seed = static_cast<std::uint64_t>(*seed);
  c.threads = static_cast<int>(r.positive_size("", "threads", 1));

  c.model = r.choice<ModelKind>("model", "kind", ModelKind::kThreeQubit,
                                {{"three_qubit", ModelKind::kThreeQubit},
                                 {"noisy_qubit", ModelKind::kNoisyQubit}});
  const bool three = c.model == ModelKind::kThreeQubit;
  c.duration = r.positive("model", "duration", three ? 10.0 : 2.0);
  c.segments = static_cast<Eigen::Index>(r.positive_size("model", "segments", three ? 100 : 40));
  if (const auto b = t.number("model", "bound")) {
    if (!(*b > 0.0)) r.fail("model", "bound", "must be > 0");
    c.bound = *b;
  }

  c.target = r.choice<TargetKind>("target", "kind", three ? TargetKind::kToffoli : TargetKind::kRxPi,
                                  {{"toffoli", TargetKind::kToffoli},
                                   {"rx_pi", TargetKind::kRxPi},
                                   {"file", TargetKind::kFile}});
  if (c.target == TargetKind::kFile) {
    const auto f = t.string("target", "file");
    if (!f) throw ConfigError(origin + ": target.kind = \"file\" needs target.file");
    c.target_file = resolve(*f);
    if (!fs::exists(c.target_file)) {
      r.fail("target", "file", "refers to a missing file: " + c.target_file.string());
    }
  } else if (t.has("target", "file")) {
    r.fail("target", "file", "is only valid with kind = \"file\"");
  }
  c.special_unitary = t.boolean("target", "special_unitary").value_or(true);

  enum class DistKind { kBox, kFourier };
  const DistKind dk = r.choice<DistKind>("distribution", "kind",
                                         three ? DistKind::kBox : DistKind::kFourier,
                                         {{"uniform_box", DistKind::kBox},
                                          {"fourier", DistKind::kFourier}});
  if (dk == DistKind::kBox) {
    const auto lo = t.array("distribution", "lo").value_or(std::vector<double>{-0.2, -0.2});
    const auto hi = t.array("distribution", "hi").value_or(std::vector<double>{0.2, 0.2});
    if (lo.size() != hi.size()) r.fail("distribution", "hi", "must have the length of 'lo'");
    UniformBox box{Eigen::Map<const RealVector>(lo.data(), static_cast<Eigen::Index>(lo.size())),
                   Eigen::Map<const RealVector>(hi.data(), static_cast<Eigen::Index>(hi.size()))};
    c.distribution = box;
  } else {
    FourierNoise n;
    n.num_modes = static_cast<int>(r.positive_size("distribution", "modes", 10));
    n.freq_lo = r.number("distribution", "freq_lo", n.freq_lo);
    n.freq_hi = r.number("distribution", "freq_hi", n.freq_hi);
    n.amp_sigma = r.positive("distribution", "amp_sigma", n.amp_sigma);
    c.distribution = n;
  }
  try {
    validate(c.distribution);
  } catch (const ContractError& e) {
    throw ConfigError(origin + ": [distribution] " + e.what());
  }
  if (three && dk != DistKind::kBox) {
    r.fail("distribution", "kind", "must be \"uniform_box\" for the three_qubit model");
  }
  if (three && sample_dim(c.distribution) != 2) {
    r.fail("distribution", "lo", "must have 2 entries for the three_qubit model");
  }
  if (!three && dk != DistKind::kFourier) {
    r.fail("distribution", "kind", "must be \"fourier\" for the noisy_qubit model");
  }

  c.batch_mode = r.choice<BatchMode>("scheduler", "mode", BatchMode::kFresh,
                                     {{"fresh", BatchMode::kFresh},
                                      {"fixed", BatchMode::kFixed},
                                      {"nominal", BatchMode::kNominal}});
  c.batch_size = r.positive_size("scheduler", "batch_size", 10);

  OptimizerConfig& o = c.optimizer;
  o.seed = c.seed;
  o.threads = c.threads;
  o.learning_rate = r.positive("optimizer", "learning_rate", o.learning_rate);
  o.step_scale = r.choice<StepScale>("optimizer", "step_scale", o.step_scale,
                                     {{"unnormalized", StepScale::kUnnormalized},
                                      {"normalized", StepScale::kNormalized}});
  o.momentum = r.choice<MomentumKind>("optimizer", "momentum", o.momentum,
                                      {{"blend", MomentumKind::kBlend},
                                       {"accumulated", MomentumKind::kAccumulated},
                                       {"none", MomentumKind::kNone}});
  o.momentum_lambda = r.number("optimizer", "lambda", o.momentum_lambda);
  if (!(o.momentum_lambda > 0.0 && o.momentum_lambda <= 1.0)) {
    r.fail("optimizer", "lambda", "must lie in (0, 1]");
  }
  o.sample_budget = r.positive_size("optimizer", "sample_budget", o.sample_budget);
  o.test_set_size = r.positive_size("optimizer", "test_set_size", o.test_set_size);
  o.test_every = r.positive_size("optimizer", "test_every", o.test_every);
  if (t.has("optimizer", "stop_loss")) o.stop_loss = r.positive("optimizer", "stop_loss", 1.0);
  if (const auto d = t.integer("optimizer", "decay_every")) {
    if (*d < 0) r.fail("optimizer", "decay_every", "must be >= 0");
    o.decay_every = static_cast<std::size_t>(*d);
  }
  o.decay_factor = r.positive("optimizer", "decay_factor", o.decay_factor);
  o.fidelity = r.choice<FidelityKind>("optimizer", "fidelity", o.fidelity,
                                      {{"phase_sensitive", FidelityKind::kPhaseSensitive},
                                       {"phase_invariant", FidelityKind::kPhaseInvariant}});
  if (const auto f = t.string("optimizer", "initial_field")) {
    c.initial_field = resolve(*f);
    if (!fs::exists(c.initial_field)) {
      r.fail("optimizer", "initial_field", "refers to a missing file: " + c.initial_field.string());
    }
  }
  const std::size_t per_iteration = c.batch_mode == BatchMode::kNominal ? 1 : c.batch_size;
  if (o.sample_budget < per_iteration) {
    r.fail("optimizer", "sample_budget", "must be at least the batch size");
  }

  const std::size_t points = r.positive_size("evaluation", "grid_points", 41);
  if (points < 2) r.fail("evaluation", "grid_points", "must be >= 2");
  const double lo = r.number("evaluation", "grid_lo", -0.2);
  const double hi = r.number("evaluation", "grid_hi", 0.2);
  if (!(lo <= hi)) r.fail("evaluation", "grid_hi", "must not be below grid_lo");
  c.grid = GridSpec{{lo, hi, points}, {lo, hi, points}};
  c.threshold = r.positive("evaluation", "threshold", c.threshold);
  c.eval_samples = r.positive_size("evaluation", "samples", c.eval_samples);

  c.baseline = r.choice<BaselineKind>("baseline", "kind", c.baseline,
                                      {{"rectangular", BaselineKind::kRectangular},
                                       {"gaussian", BaselineKind::kGaussian}});
  if (t.has("baseline", "gaussian_width")) {
    c.gaussian_width = r.positive("baseline", "gaussian_width", 1.0);
  }

  if (const auto d = t.string("output", "dir")) c.output_dir = resolve(*d);
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_experiment_config(text.str(), path.parent_path(), path.string());
}

}  // namespace bgrape
