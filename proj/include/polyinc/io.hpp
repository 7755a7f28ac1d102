#pragma once

// Geometry JSON, key-value experiment configs, atomic file output and run
// manifests.

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "polyinc/dtn.hpp"
#include "polyinc/geometry.hpp"
#include "polyinc/mesh.hpp"

namespace polyinc {

using json = nlohmann::json;

/// Background, contrast and (possibly absent) inclusion read from one file.
struct Geometry {
  LayeredBackground bg;
  double k = 1;
  std::optional<Polygon> polygon;
};

namespace detail {

inline const json& field(const json& j, const char* name) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "geometry: top level must be an object");
  if (!j.contains(name)) throw Error(ErrorCode::InvalidInput, std::string("geometry: missing field '") + name + "'");
  return j.at(name);
}

inline double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw Error(ErrorCode::InvalidInput, "geometry: field '" + what + "' must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw Error(ErrorCode::InvalidInput, "geometry: field '" + what + "' must be finite");
  return v;
}

inline std::vector<double> numbers(const json& j, const std::string& what) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidInput, "geometry: field '" + what + "' must be an array");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(number(j[i], what + "[" + std::to_string(i) + "]"));
  return v;
}

}  // namespace detail

/// {"L": .., "omegas": [..], "gammas": [..], "k": .., "vertices": [[x, y], ..]};
/// an empty vertex list means no inclusion.
inline Geometry parse_geometry(const json& j) {
  Geometry g;
  g.bg.L = detail::number(detail::field(j, "L"), "L");
  g.bg.omegas = detail::numbers(detail::field(j, "omegas"), "omegas");
  g.bg.gammas = detail::numbers(detail::field(j, "gammas"), "gammas");
  g.k = detail::number(detail::field(j, "k"), "k");
  const json& vs = detail::field(j, "vertices");
  if (!vs.is_array()) throw Error(ErrorCode::InvalidInput, "geometry: field 'vertices' must be an array");
  std::vector<Vec2> pts;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const std::string name = "vertices[" + std::to_string(i) + "]";
    if (!vs[i].is_array() || vs[i].size() != 2) throw Error(ErrorCode::InvalidInput, "geometry: field '" + name + "' must be [x, y]");
    pts.push_back({detail::number(vs[i][0], name), detail::number(vs[i][1], name)});
  }
  try {
    g.bg.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidInput, std::string("geometry: fields 'L'/'omegas'/'gammas': ") + e.what());
  }
  if (!(g.k > 0)) throw Error(ErrorCode::InvalidInput, "geometry: field 'k' must be positive");
  if (!pts.empty()) {
    if (pts.size() < 3) throw Error(ErrorCode::InvalidInput, "geometry: field 'vertices' needs at least three points");
    g.polygon = Polygon(std::move(pts));
  }
  return g;
}

inline json to_json(const Geometry& g) {
  json v = json::array();
  if (g.polygon)
    for (const auto& p : g.polygon->vertices()) v.push_back({p.x, p.y});
  return {{"L", g.bg.L}, {"omegas", g.bg.omegas}, {"gammas", g.bg.gammas}, {"k", g.k}, {"vertices", v}};
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Geometry read_geometry(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidInput, "geometry '" + path + "': malformed JSON: " + e.what());
  }
  return parse_geometry(j);
}

/// Writes to a temporary sibling and renames it over the target.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::InvalidInput, "cannot write '" + tmp + "'");
    out << content;
    if (!out) throw Error(ErrorCode::InvalidInput, "write to '" + tmp + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

/// `key = value` lines; values are JSON scalars or arrays, or bare strings.
/// Blank lines and lines starting with '#' are ignored.
class Config {
 public:
  static Config parse(const std::string& text) {
    Config c;
    c.text_ = text;
    std::istringstream in(text);
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
      ++no;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::InvalidInput, "config line " + std::to_string(no) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string raw = trim(line.substr(eq + 1));
      if (key.empty()) throw Error(ErrorCode::InvalidInput, "config line " + std::to_string(no) + ": empty key");
      json v;
      try {
        v = json::parse(raw);
      } catch (const json::parse_error&) {
        v = raw;
      }
      c.values_[key] = v;
    }
    return c;
  }

  static Config load(const std::string& path) {
    const std::string text = read_text(path);
    // A run manifest carries the config text it was produced from.
    try {
      const json j = json::parse(text);
      if (j.is_object() && j.contains("config") && j["config"].is_string()) {
        Config c = parse(j["config"].get<std::string>());
        c.base_ = j.value("config_dir", std::filesystem::path(path).parent_path().string());
        return c;
      }
    } catch (const json::parse_error&) {
    }
    Config c = parse(text);
    c.base_ = std::filesystem::path(path).parent_path().string();
    return c;
  }

  bool has(const std::string& k) const { return values_.count(k) > 0; }
  const std::string& text() const { return text_; }
  const std::string& base_dir() const { return base_; }

  double number(const std::string& k, std::optional<double> def = std::nullopt) const {
    if (!has(k)) {
      if (def) return *def;
      throw Error(ErrorCode::InvalidInput, "config: missing key '" + k + "'");
    }
    const json& v = values_.at(k);
    if (!v.is_number()) throw Error(ErrorCode::InvalidInput, "config: key '" + k + "' must be a number");
    return v.get<double>();
  }
  long integer(const std::string& k, std::optional<long> def = std::nullopt) const {
    const double v = number(k, def ? std::optional<double>(static_cast<double>(*def)) : std::nullopt);
    if (v != std::floor(v)) throw Error(ErrorCode::InvalidInput, "config: key '" + k + "' must be an integer");
    return static_cast<long>(v);
  }
  std::string string(const std::string& k, std::optional<std::string> def = std::nullopt) const {
    if (!has(k)) {
      if (def) return *def;
      throw Error(ErrorCode::InvalidInput, "config: missing key '" + k + "'");
    }
    const json& v = values_.at(k);
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  }
  /// Path value resolved against the config file's directory.
  std::string path(const std::string& k) const {
    std::filesystem::path p = string(k);
    if (p.is_relative() && !base_.empty()) p = std::filesystem::path(base_) / p;
    return p.string();
  }
  /// Nonempty ascending list of numbers.
  std::vector<double> grid(const std::string& k, std::optional<std::vector<double>> def = std::nullopt) const {
    if (!has(k)) {
      if (def) return *def;
      throw Error(ErrorCode::InvalidInput, "config: missing key '" + k + "'");
    }
    const json& v = values_.at(k);
    if (!v.is_array() || v.empty()) throw Error(ErrorCode::InvalidInput, "config: key '" + k + "' must be a nonempty array");
    std::vector<double> g;
    for (const auto& x : v) {
      if (!x.is_number()) throw Error(ErrorCode::InvalidInput, "config: key '" + k + "' must contain numbers");
      g.push_back(x.get<double>());
    }
    for (std::size_t i = 1; i < g.size(); ++i)
      if (!(g[i] > g[i - 1])) throw Error(ErrorCode::InvalidInput, "config: key '" + k + "' must be strictly ascending");
    return g;
  }
  /// Command-line override; recorded in the text so manifests replay it.
  void set(const std::string& k, const std::string& raw) {
    if (!text_.empty() && text_.back() != '\n') text_ += '\n';
    text_ += k + " = " + raw + "\n";
    json v;
    try {
      v = json::parse(raw);
    } catch (const json::parse_error&) {
      v = raw;
    }
    values_[k] = v;
  }

  /// A-priori data from keys N0, d0, r0, K0, beta0, c0, m (k from the geometry).
  AprioriData apriori(double k, double L) const {
    AprioriData a;
    a.N0 = static_cast<int>(integer("N0", a.N0));
    a.d0 = number("d0", a.d0);
    a.r0 = number("r0", a.r0);
    a.K0 = number("K0", a.K0);
    a.beta0 = number("beta0", a.beta0);
    a.c0 = number("c0", a.c0);
    a.m = static_cast<int>(integer("m", a.m));
    a.k = k;
    a.L = L;
    return a;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }
  std::map<std::string, json> values_;
  std::string text_;
  std::string base_;
};

inline std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline json mesh_stats(const Mesh& m) {
  return {{"nodes", m.num_nodes()},
          {"triangles", m.num_triangles()},
          {"boundary_nodes", m.boundary_nodes.size()},
          {"h", m.h},
          {"max_edge", m.max_edge()},
          {"min_angle_deg", m.achieved_min_angle},
          {"id", hex64(m.id())}};
}

inline json manifest(const std::string& command, const Config& cfg, const json& meshes, const json& outputs) {
  return {{"tool", "polyinc"},
          {"version", kVersion},
          {"command", command},
          {"config_hash", hex64(fnv1a(cfg.text()))},
          {"config", cfg.text()},
          {"config_dir", cfg.base_dir()},
          {"meshes", meshes},
          {"outputs", outputs}};
}

inline json to_json(const DtNOperator& op) {
  json nodes = json::array();
  for (const auto& p : op.space.points) nodes.push_back({p.x, p.y});
  json rows = json::array();
  for (long i = 0; i < op.matrix.rows(); ++i) {
    json r = json::array();
    for (long j = 0; j < op.matrix.cols(); ++j) r.push_back(op.matrix(i, j));
    rows.push_back(std::move(r));
  }
  json eig = json::array();
  if (op.gram)
    for (long i = 0; i < op.gram->eigenvalues.size(); ++i) eig.push_back(op.gram->eigenvalues[i]);
  return {{"size", op.size()},
          {"mesh_id", hex64(op.mesh_id)},
          {"boundary_nodes", nodes},
          {"perimeter", op.space.perimeter},
          {"matrix", rows},
          {"gram", {{"kind", "spectral H^1/2 via boundary Laplace-Beltrami"}, {"eigenvalues", eig}}}};
}

}  // namespace polyinc
