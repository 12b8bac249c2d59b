#include "difftomo/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace difftomo {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

const std::map<std::string, std::string>& RunConfig::defaults() {
  static const std::map<std::string, std::string> table = {
      {"seed", "0"},
      {"threads", "1"},
      {"out", "out"},
      // geometry
      {"mesh.radius", "1"},
      {"mesh.h", "0.125"},
      {"mesh.file", ""},
      {"recon.h", ""},
      // phantom: "x y radius mu_a diff" groups separated by ';'
      {"phantom.mu_a", "0.1"},
      {"phantom.diff", "0.05"},
      {"phantom.c", "1"},
      {"phantom.inclusions", ""},
      {"layout.sources", "16"},
      {"layout.detectors", "16"},
      {"layout.half_width", "0.3"},
      {"layout.offset", "0"},
      {"omega", "0"},
      {"zeta", "1"},
      // simulate
      {"noise.kind", "none"},
      {"noise.level", "0.01"},
      {"noise.seed", ""},
      {"data.file", ""},
      // reconstruct
      {"solver", "gn"},
      {"solver.alpha", "1"},
      {"solver.iterations", "10"},
      {"solver.unknowns", "absorption"},
      {"solver.prior", "diagonal"},
      {"solver.prior_std", "0.3"},
      {"solver.noise", "relative"},
      {"solver.noise_level", "0.01"},
      {"solver.memory", "5"},
      {"solver.relaxation", "1"},
      {"image.size", "64"},
      // shape
      {"shape.method", "lm"},
      {"shape.order", "2"},
      {"shape.radius", "0.5"},
      {"shape.center", "0 0"},
      {"shape.mu_a", "0.3"},
      {"shape.diff", "0.03"},
      {"shape.iterations", "20"},
      {"shape.lm_lambda", "0.01"},
      {"levelset.circles", "0 0 0.5"},
      {"levelset.cap", "0.1"},
      {"levelset.dt", "0.05"},
      {"levelset.interior_dt", "0"},
      {"levelset.band", "0"},
      {"levelset.iterations", "50"},
      // approximation error
      {"aem.samples", "20"},
      {"aem.mean.file", ""},
      {"aem.cov.file", ""},
      {"aem.sigma", "0.3"},
      {"aem.length", "0.3"},
      // direct inversion
      {"direct.method", "broken_ray"},
      {"broken_ray.alpha", "0"},
      {"broken_ray.ny", "64"},
      {"broken_ray.nz", "64"},
      {"broken_ray.width", "1"},
      {"broken_ray.theta", "0.5235987755982988"},
      {"broken_ray.oversample", "8"},
      {"born.per_side", "3"},
      {"born.contrast", "0.05"},
      {"born.order", "3"},
      {"born.truncation", "1e-8"},
      {"halfspace.n", "16"},
      {"halfspace.spacing", "1"},
      {"halfspace.depth_max", "6"},
      {"halfspace.depth_samples", "25"},
      {"halfspace.mu_a", "0.3333333333333333"},
      {"halfspace.diff", "0.3333333333333333"},
      {"halfspace.l_ext", "0.5"},
      {"halfspace.alpha", "1e-4"},
  };
  return table;
}

RunConfig::RunConfig() : values_(defaults()) {}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (!defaults().count(key))
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    cfg.set(key, trim(line.substr(eq + 1)));
  }
  for (const auto& [key, value] : cfg.values_)
    if (ends_with(key, ".file") && !value.empty() && !std::filesystem::exists(value))
      throw ConfigError(origin + ": " + key + " refers to a missing file: " + value);
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f.good()) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!defaults().count(key)) throw ConfigError("unknown key '" + key + "'");
  values_[key] = value;
  explicit_[key] = true;
}

const std::string& RunConfig::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
  return it->second;
}

double RunConfig::num(const std::string& key) const {
  const std::string& s = str(key);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || trim(s.substr(used)) != "" || !std::isfinite(v))
    throw ConfigError("key '" + key + "' needs a number, got '" + s + "'");
  return v;
}

int RunConfig::integer(const std::string& key) const {
  const double v = num(key);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError("key '" + key + "' needs an integer");
  return static_cast<int>(v);
}

std::uint64_t RunConfig::u64(const std::string& key) const {
  const std::string& s = str(key);
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || s[0] == '-')
    throw ConfigError("key '" + key + "' needs a non-negative integer, got '" + s + "'");
  return v;
}

std::vector<std::vector<double>> RunConfig::groups(const std::string& key) const {
  std::vector<std::vector<double>> out;
  std::stringstream all(str(key));
  std::string part;
  while (std::getline(all, part, ';')) {
    if (trim(part).empty()) continue;
    std::istringstream ss(part);
    std::vector<double> g;
    std::string tok;
    while (ss >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) throw ConfigError("key '" + key + "': bad number '" + tok + "'");
      g.push_back(v);
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::string RunConfig::canonical() const {
  std::string s;
  for (const auto& [key, value] : values_)
    if (key != "out") s += key + "=" + value + "\n";
  return s;
}

}  // namespace difftomo
