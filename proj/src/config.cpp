#include "thintube/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace thintube {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key())) throw ConfigError("unknown key '" + where + item.key() + "'");
}

template <class T>
T get(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + key + "' has the wrong type");
  }
}

template <class T>
void read(const json& obj, const std::string& prefix, const char* key, T& into) {
  if (auto it = obj.find(key); it != obj.end()) into = get<T>(*it, prefix + key);
}

void read_pair(const json& obj, const std::string& prefix, const char* key, Vec2& into) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  const auto v = get<std::vector<double>>(*it, prefix + key);
  if (v.size() != 2) throw ConfigError("key '" + prefix + key + "' needs two numbers");
  into = {v[0], v[1]};
}

BoundaryCondition parse_bc(const std::string& s) {
  if (s == "dirichlet") return BoundaryCondition::Dirichlet;
  if (s == "neumann") return BoundaryCondition::Neumann;
  throw ConfigError("boundary must be 'dirichlet' or 'neumann', got '" + s + "'");
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  require_object(doc, "",
                 {"command", "geometry", "section", "eps", "j_max", "boundary", "n", "delta", "window", "tube3d",
                  "output"});
  RunConfig out;
  StudyConfig& cfg = out.study;
  if (auto it = doc.find("command"); it != doc.end()) out.command = get<std::string>(*it, "command");

  if (auto it = doc.find("geometry"); it != doc.end()) {
    const std::string p = "geometry.";
    require_object(*it, p, {"curvature", "torsion", "rotation", "profile", "unbounded", "a", "b"});
    read(*it, p, "curvature", cfg.geometry.curvature);
    read(*it, p, "torsion", cfg.geometry.torsion);
    read(*it, p, "rotation", cfg.geometry.rotation);
    read(*it, p, "profile", cfg.geometry.profile);
    read(*it, p, "unbounded", cfg.geometry.unbounded);
    read(*it, p, "a", cfg.geometry.a);
    read(*it, p, "b", cfg.geometry.b);
  }
  if (auto it = doc.find("section"); it != doc.end()) {
    const std::string p = "section.";
    require_object(*it, p, {"shape", "radius", "center", "x_range", "y_range", "vertices", "n"});
    read(*it, p, "shape", cfg.section.shape);
    read(*it, p, "radius", cfg.section.radius);
    read_pair(*it, p, "center", cfg.section.center);
    read_pair(*it, p, "x_range", cfg.section.x_range);
    read_pair(*it, p, "y_range", cfg.section.y_range);
    read(*it, p, "n", cfg.section.n);
    if (auto v = it->find("vertices"); v != it->end()) {
      const auto pts = get<std::vector<std::vector<double>>>(*v, p + "vertices");
      cfg.section.vertices.clear();
      for (const auto& q : pts) {
        if (q.size() != 2) throw ConfigError("key 'section.vertices' needs [x, y] pairs");
        cfg.section.vertices.push_back({q[0], q[1]});
      }
    }
  }
  read(doc, "", "eps", cfg.eps);
  read(doc, "", "j_max", cfg.j_max);
  read(doc, "", "n", cfg.n);
  read(doc, "", "delta", cfg.delta);
  if (auto it = doc.find("boundary"); it != doc.end()) cfg.bc = parse_bc(get<std::string>(*it, "boundary"));
  if (auto it = doc.find("window"); it != doc.end()) {
    const std::string p = "window.";
    require_object(*it, p, {"cap", "start", "growth"});
    read(*it, p, "cap", cfg.window.cap);
    read(*it, p, "start", cfg.window.start);
    read(*it, p, "growth", cfg.window.growth);
  }
  if (auto it = doc.find("tube3d"); it != doc.end()) {
    const std::string p = "tube3d.";
    require_object(*it, p, {"n_s", "section_n", "coarse_n_s", "coarse_section_n", "spread_limit"});
    read(*it, p, "n_s", cfg.tube3d.n_s);
    read(*it, p, "section_n", cfg.tube3d.section_n);
    read(*it, p, "coarse_n_s", cfg.tube3d.coarse_n_s);
    read(*it, p, "coarse_section_n", cfg.tube3d.coarse_section_n);
    read(*it, p, "spread_limit", cfg.tube3d.spread_limit);
  }
  if (auto it = doc.find("output"); it != doc.end()) {
    const std::string p = "output.";
    require_object(*it, p, {"csv", "json"});
    read(*it, p, "csv", cfg.csv_path);
    read(*it, p, "json", cfg.json_path);
  }
  return out;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string config_json(const RunConfig& config) {
  const StudyConfig& c = config.study;
  json j;
  if (config.command) j["command"] = *config.command;
  j["geometry"] = {{"curvature", c.geometry.curvature}, {"torsion", c.geometry.torsion},
                   {"rotation", c.geometry.rotation},   {"profile", c.geometry.profile},
                   {"unbounded", c.geometry.unbounded}, {"a", c.geometry.a},
                   {"b", c.geometry.b}};
  json vertices = json::array();
  for (const auto& v : c.section.vertices) vertices.push_back({v[0], v[1]});
  j["section"] = {{"shape", c.section.shape},
                  {"radius", c.section.radius},
                  {"center", {c.section.center[0], c.section.center[1]}},
                  {"x_range", {c.section.x_range[0], c.section.x_range[1]}},
                  {"y_range", {c.section.y_range[0], c.section.y_range[1]}},
                  {"vertices", vertices},
                  {"n", c.section.n}};
  j["eps"] = c.eps;
  j["j_max"] = c.j_max;
  j["boundary"] = to_string(c.bc);
  j["n"] = c.n;
  j["delta"] = c.delta;
  j["window"] = {{"cap", c.window.cap}, {"start", c.window.start}, {"growth", c.window.growth}};
  j["tube3d"] = {{"n_s", c.tube3d.n_s},
                 {"section_n", c.tube3d.section_n},
                 {"coarse_n_s", c.tube3d.coarse_n_s},
                 {"coarse_section_n", c.tube3d.coarse_section_n},
                 {"spread_limit", c.tube3d.spread_limit}};
  j["output"] = {{"csv", c.csv_path}, {"json", c.json_path}};
  return j.dump(2) + "\n";
}

}  // namespace thintube
