#pragma once

// Command-line surface: run configuration, provenance, and the six
// subcommands. Commands write to an output directory and report to a
// stream, so they can be driven in-process by tests.
//
// Config format: INI sections with "key = value" lines, '#' or ';' comments.
// A file ending in .json (or starting with '{') is read as JSON with the same
// section/key layout.

#include <atomic>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nlslab/diagnostics.hpp"
#include "nlslab/dynamics.hpp"
#include "nlslab/groundstate.hpp"
#include "nlslab/verify.hpp"

namespace nlslab::cli {

inline constexpr const char* kVersion = "nlslab 0.1.0";
inline constexpr const char* kOutEnv = "NLSLAB_OUT";

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kNonConvergence = 3,
  kNaNGuard = 4,
  kVerifyFailed = 5,
};

// ---------------------------------------------------------------------------
// Config documents

struct ConfigValue {
  std::string text;
  int line = 0;  // 0 when the source has no line information
};

struct ConfigDocument {
  std::string source;
  std::string base_dir;  // relative paths in the config resolve against this
  std::map<std::string, std::map<std::string, ConfigValue>> sections;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string where(const std::string& source, int line) {
  return line > 0 ? source + ":" + std::to_string(line) : source;
}

}  // namespace detail

inline ConfigDocument parse_ini(const std::string& text, const std::string& source = "<config>") {
  ConfigDocument doc;
  doc.source = source;
  std::istringstream is(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string s = raw;
    for (char c : {'#', ';'}) {
      const auto pos = s.find(c);
      if (pos != std::string::npos) s.erase(pos);
    }
    s = detail::trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(detail::where(source, line) + ": unterminated section header");
      section = detail::trim(s.substr(1, s.size() - 2));
      if (section.empty()) throw ConfigError(detail::where(source, line) + ": empty section name");
      doc.sections[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(detail::where(source, line) + ": expected 'key = value'");
    if (section.empty()) throw ConfigError(detail::where(source, line) + ": key outside any [section]");
    const std::string key = detail::trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError(detail::where(source, line) + ": empty key");
    auto& sec = doc.sections[section];
    if (sec.count(key)) throw ConfigError(detail::where(source, line) + ": duplicate key '" + key + "' in [" + section + "]");
    sec[key] = {detail::trim(s.substr(eq + 1)), line};
  }
  return doc;
}

inline ConfigDocument parse_json_config(const std::string& text, const std::string& source = "<config>") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
    throw ConfigError(detail::where(source, line) + ": invalid JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw ConfigError(source + ": top level must be an object of sections");
  ConfigDocument doc;
  doc.source = source;
  for (const auto& [name, sec] : j.items()) {
    if (!sec.is_object()) throw ConfigError(source + ": section '" + name + "' must be an object");
    auto& out = doc.sections[name];
    for (const auto& [key, v] : sec.items()) {
      std::string t;
      if (v.is_string()) t = v.get<std::string>();
      else if (v.is_array()) {
        for (std::size_t i = 0; i < v.size(); ++i) t += (i ? "," : "") + (v[i].is_string() ? v[i].get<std::string>() : v[i].dump());
      } else t = v.dump();
      out[key] = {t, 0};
    }
  }
  return doc;
}

inline ConfigDocument read_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  const bool json = std::filesystem::path(path).extension() == ".json" || (first != std::string::npos && text[first] == '{');
  auto doc = json ? parse_json_config(text, path) : parse_ini(text, path);
  doc.base_dir = std::filesystem::path(path).parent_path().string();
  return doc;
}

/// Typed access to one section; remembers which keys were read so unknown
/// keys can be rejected.
class SectionReader {
 public:
  SectionReader(const ConfigDocument& doc, std::string name) : doc_(doc), name_(std::move(name)) {
    auto it = doc.sections.find(name_);
    if (it != doc.sections.end()) sec_ = &it->second;
  }

  bool has(const std::string& key) const { return sec_ && sec_->count(key); }

  std::string str(const std::string& key, const std::string& def) {
    const auto* v = find(key);
    return v ? v->text : def;
  }

  double num(const std::string& key, double def) {
    const auto* v = find(key);
    if (!v) return def;
    try {
      std::size_t used = 0;
      const double x = std::stod(v->text, &used);
      if (used != v->text.size() || !std::isfinite(x)) throw std::invalid_argument("");
      return x;
    } catch (const std::logic_error&) {
      fail(*v, key, "expected a number, got '" + v->text + "'");
    }
  }

  int integer(const std::string& key, int def) {
    const auto* v = find(key);
    if (!v) return def;
    try {
      std::size_t used = 0;
      const long x = std::stol(v->text, &used);
      if (used != v->text.size() || x < INT32_MIN || x > INT32_MAX) throw std::invalid_argument("");
      return static_cast<int>(x);
    } catch (const std::logic_error&) {
      fail(*v, key, "expected an integer, got '" + v->text + "'");
    }
  }

  bool boolean(const std::string& key, bool def) {
    const auto* v = find(key);
    if (!v) return def;
    std::string t = v->text;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
    if (t == "false" || t == "no" || t == "off" || t == "0") return false;
    fail(*v, key, "expected true or false, got '" + v->text + "'");
  }

  std::vector<double> list(const std::string& key, std::vector<double> def) {
    const auto* v = find(key);
    if (!v) return def;
    std::vector<double> out;
    std::string t = v->text;
    for (char& c : t)
      if (c == '[' || c == ']') c = ' ';
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = detail::trim(item);
      if (item.empty()) continue;
      try {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument("");
      } catch (const std::logic_error&) {
        fail(*v, key, "expected a comma-separated list of numbers, got '" + v->text + "'");
      }
    }
    return out;
  }

  /// Line of a key, or 0.
  int line(const std::string& key) const { return has(key) ? sec_->at(key).line : 0; }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(detail::where(doc_.source, line(key)) + ": [" + name_ + "] " + key + ": " + msg);
  }

  void reject_unknown() const {
    if (!sec_) return;
    for (const auto& [k, v] : *sec_)
      if (!used_.count(k)) throw ConfigError(detail::where(doc_.source, v.line) + ": unknown key '" + k + "' in [" + name_ + "]");
  }

 private:
  const ConfigValue* find(const std::string& key) {
    used_.insert(key);
    if (!sec_) return nullptr;
    auto it = sec_->find(key);
    return it == sec_->end() ? nullptr : &it->second;
  }

  [[noreturn]] void fail(const ConfigValue& v, const std::string& key, const std::string& msg) const {
    throw ConfigError(detail::where(doc_.source, v.line) + ": [" + name_ + "] " + key + ": " + msg);
  }

  const ConfigDocument& doc_;
  std::string name_;
  const std::map<std::string, ConfigValue>* sec_ = nullptr;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Run configuration

enum class InitialKind { GAUSSIAN, SCALED_GROUND_STATE, FILE };

inline std::string to_string(InitialKind k) {
  switch (k) {
    case InitialKind::GAUSSIAN: return "GAUSSIAN";
    case InitialKind::SCALED_GROUND_STATE: return "SCALED_GROUND_STATE";
    case InitialKind::FILE: return "FILE";
  }
  return "?";
}

struct InitialData {
  InitialKind kind = InitialKind::SCALED_GROUND_STATE;
  double amplitude = 1.0;  // GAUSSIAN: amplitude·exp(-r²/(2 width²))
  double width = 1.0;
  double scale = 0.5;      // SCALED_GROUND_STATE: scale·Q
  std::string path;        // FILE: text profile "r Re Im" on the run grid
};

struct VerifySettings {
  std::uint64_t seed = 1;
  int weinstein_samples = 500;
  int sobolev_samples = 1000;
  double ground_R_max = 20.0;
  int ground_J = 49152;
  double morawetz_t_end = 10.0;
};

struct RunConfig {
  EquationSpec spec = EquationSpec::nls(3, Rational(3));
  double R_max = 60.0;
  int J = 4096;
  SimConfig sim;
  InitialData init;
  std::vector<double> radii{10.0};
  std::vector<double> eps{0.05};  // fractions of M[u0]
  int snapshot_every = 0;
  std::string out_dir = "nlslab_out";
  std::string ground_path;  // stem; defaults to <out>/ground
  int ground_max_iterations = GroundStateOptions{}.max_iterations;
  std::vector<double> sweep_scales{0.3, 0.5, 0.8};
  VerifySettings verify;

  std::string ground_stem() const {
    return ground_path.empty() ? (std::filesystem::path(out_dir) / "ground").string() : ground_path;
  }
};

inline RunConfig build_run_config(const ConfigDocument& doc) {
  static const std::set<std::string> known{"equation", "grid", "sim", "initial", "diagnostics", "ground", "sweep", "verify"};
  for (const auto& [name, sec] : doc.sections) {
    if (!known.count(name)) {
      const int line = sec.empty() ? 0 : sec.begin()->second.line;
      throw ConfigError(detail::where(doc.source, line) + ": unknown section [" + name + "]");
    }
  }
  auto resolve = [&](const std::string& p) {
    if (p.empty() || std::filesystem::path(p).is_absolute() || doc.base_dir.empty()) return p;
    return (std::filesystem::path(doc.base_dir) / p).string();
  };
  RunConfig rc;

  SectionReader eq(doc, "equation");
  {
    std::map<std::string, std::string> kv{{"kind", eq.str("kind", "NLS")},
                                          {"N", std::to_string(eq.integer("N", 3))},
                                          {"p", eq.str("p", "3")}};
    const std::string gamma = eq.str("gamma", "");
    if (!gamma.empty()) kv["gamma"] = gamma;
    try {
      rc.spec = EquationSpec::from_kv(kv);
      if (!rc.spec.is_nls() && gamma.empty()) eq.fail("gamma", "required for GHARTREE");
      rc.spec.validate();
    } catch (const InvalidSpec& e) {
      eq.fail("kind", e.what());
    } catch (const ConfigError& e) {
      if (std::string(e.what()).find(doc.source) == 0) throw;
      throw ConfigError(detail::where(doc.source, eq.line("kind")) + ": [equation] " + e.what());
    }
    eq.reject_unknown();
  }

  SectionReader grid(doc, "grid");
  rc.R_max = grid.num("R_max", rc.R_max);
  rc.J = grid.integer("J", rc.J);
  if (!(rc.R_max > 0.0)) grid.fail("R_max", "must be positive");
  if (rc.J < 16) grid.fail("J", "must be at least 16");
  grid.reject_unknown();

  SectionReader sim(doc, "sim");
  rc.sim.dt = sim.num("dt", rc.sim.dt);
  rc.sim.t_end = sim.num("t_end", rc.sim.t_end);
  rc.sim.output_every = sim.integer("output_every", rc.sim.output_every);
  rc.sim.sponge_enabled = sim.boolean("sponge", rc.sim.sponge_enabled);
  rc.sim.sponge_width = sim.num("sponge_width", rc.sim.sponge_width);
  rc.sim.sponge_strength = sim.num("sponge_strength", rc.sim.sponge_strength);
  rc.sim.growth_limit = sim.num("growth_limit", rc.sim.growth_limit);
  rc.sim.linear = sim.boolean("linear", rc.sim.linear);
  sim.reject_unknown();

  SectionReader ini(doc, "initial");
  {
    const std::string kind = ini.str("kind", "SCALED_GROUND_STATE");
    if (kind == "GAUSSIAN") rc.init.kind = InitialKind::GAUSSIAN;
    else if (kind == "SCALED_GROUND_STATE") rc.init.kind = InitialKind::SCALED_GROUND_STATE;
    else if (kind == "FILE") rc.init.kind = InitialKind::FILE;
    else ini.fail("kind", "expected GAUSSIAN, SCALED_GROUND_STATE or FILE, got '" + kind + "'");
    rc.init.amplitude = ini.num("amplitude", rc.init.amplitude);
    rc.init.width = ini.num("width", rc.init.width);
    rc.init.scale = ini.num("scale", rc.init.scale);
    rc.init.path = resolve(ini.str("path", ""));
    if (!(rc.init.width > 0.0)) ini.fail("width", "must be positive");
    if (rc.init.kind == InitialKind::FILE) {
      if (rc.init.path.empty()) ini.fail("path", "required for kind = FILE");
      if (!std::filesystem::exists(rc.init.path)) ini.fail("path", "file '" + rc.init.path + "' does not exist");
    }
    ini.reject_unknown();
  }

  SectionReader diag(doc, "diagnostics");
  rc.radii = diag.list("radii", rc.radii);
  rc.eps = diag.list("eps", rc.eps);
  rc.snapshot_every = diag.integer("snapshot_every", rc.snapshot_every);
  rc.out_dir = diag.str("out", rc.out_dir);
  for (double R : rc.radii)
    if (!(R > 0.0 && R <= rc.R_max)) diag.fail("radii", "every radius must lie in (0, R_max]");
  for (double e : rc.eps)
    if (!(e > 0.0)) diag.fail("eps", "thresholds must be positive");
  if (rc.snapshot_every < 0) diag.fail("snapshot_every", "must be nonnegative");
  diag.reject_unknown();

  SectionReader gsec(doc, "ground");
  rc.ground_path = resolve(gsec.str("path", ""));
  rc.ground_max_iterations = gsec.integer("max_iterations", rc.ground_max_iterations);
  if (rc.ground_max_iterations < 1) gsec.fail("max_iterations", "must be positive");
  gsec.reject_unknown();

  SectionReader sw(doc, "sweep");
  rc.sweep_scales = sw.list("scales", rc.sweep_scales);
  sw.reject_unknown();

  SectionReader ver(doc, "verify");
  rc.verify.seed = static_cast<std::uint64_t>(ver.integer("seed", static_cast<int>(rc.verify.seed)));
  rc.verify.weinstein_samples = ver.integer("weinstein_samples", rc.verify.weinstein_samples);
  rc.verify.sobolev_samples = ver.integer("sobolev_samples", rc.verify.sobolev_samples);
  rc.verify.ground_R_max = ver.num("ground_R_max", rc.verify.ground_R_max);
  rc.verify.ground_J = ver.integer("ground_J", rc.verify.ground_J);
  rc.verify.morawetz_t_end = ver.num("morawetz_t_end", rc.verify.morawetz_t_end);
  ver.reject_unknown();

  try {
    rc.sim.validate(*make_grid(rc.spec.N, rc.R_max, rc.J));
  } catch (const ConfigError& e) {
    throw ConfigError(doc.source + ": [sim] " + e.what());
  }
  return rc;
}

inline RunConfig load_run_config(const std::string& path) { return build_run_config(read_config_file(path)); }

/// Canonical JSON of every setting that affects results (the output
/// directory does not).
inline nlohmann::json to_json(const RunConfig& rc) {
  nlohmann::json j;
  j["equation"] = rc.spec.to_kv();
  j["grid"] = {{"R_max", rc.R_max}, {"J", rc.J}};
  j["sim"] = {{"dt", rc.sim.dt},
              {"t_end", rc.sim.t_end},
              {"output_every", rc.sim.output_every},
              {"sponge", rc.sim.sponge_enabled},
              {"sponge_width", rc.sim.sponge_width},
              {"sponge_strength", rc.sim.sponge_strength},
              {"growth_limit", rc.sim.growth_limit},
              {"linear", rc.sim.linear}};
  j["initial"] = {{"kind", to_string(rc.init.kind)},
                  {"amplitude", rc.init.amplitude},
                  {"width", rc.init.width},
                  {"scale", rc.init.scale},
                  {"path", rc.init.path}};
  j["diagnostics"] = {{"radii", rc.radii}, {"eps", rc.eps}, {"snapshot_every", rc.snapshot_every}};
  j["ground"] = {{"max_iterations", rc.ground_max_iterations}};
  j["sweep"] = {{"scales", rc.sweep_scales}};
  j["verify"] = {{"seed", rc.verify.seed},
                 {"weinstein_samples", rc.verify.weinstein_samples},
                 {"sobolev_samples", rc.verify.sobolev_samples},
                 {"ground_R_max", rc.verify.ground_R_max},
                 {"ground_J", rc.verify.ground_J},
                 {"morawetz_t_end", rc.verify.morawetz_t_end}};
  return j;
}

inline std::string config_hash(const RunConfig& rc) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : to_json(rc).dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline nlohmann::json provenance(const RunConfig& rc) { return {{"version", kVersion}, {"config_hash", config_hash(rc)}}; }

inline std::string provenance_line(const RunConfig& rc) {
  return std::string(kVersion) + " config_hash=" + config_hash(rc);
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace detail {

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write '" + path.string() + "'");
  os << j.dump(2) << "\n";
}

inline void save_ground(const GroundState& gs, const std::string& stem, const RunConfig& rc) {
  const auto parent = std::filesystem::path(stem).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  write_profile_binary(gs.Q, stem + ".bin", provenance_line(rc));
  auto j = to_json(gs);
  j["provenance"] = provenance(rc);
  write_json(stem + ".json", j);
}

inline bool same_grid(const RadialGrid& a, const RadialGrid& b) {
  return a.N() == b.N() && a.J() == b.J() && std::abs(a.h() - b.h()) <= 1e-12 * b.h();
}

}  // namespace detail

inline GridPtr run_grid(const RunConfig& rc) { return make_grid(rc.spec.N, rc.R_max, rc.J); }

/// The ground state for the run grid: loaded from the configured stem, or
/// computed and saved there when allowed.
inline GroundState obtain_ground(const RunConfig& rc, const GridPtr& grid, bool compute_if_missing, std::ostream& log) {
  const std::string stem = rc.ground_stem();
  if (std::filesystem::exists(stem + ".json")) {
    auto gs = load_ground_state(stem);
    if (gs.spec == rc.spec && detail::same_grid(gs.Q.grid(), *grid)) return gs;
    if (!compute_if_missing)
      throw ConfigError("ground state '" + stem + "' belongs to a different equation or grid; rerun 'nlslab ground'");
  } else if (!compute_if_missing) {
    throw ConfigError("no ground state at '" + stem + ".json'; run 'nlslab ground' with this config first");
  }
  log << "computing ground state on R_max=" << rc.R_max << ", J=" << rc.J << "\n";
  auto gs = solve_ground(rc.spec, grid, {.max_iterations = rc.ground_max_iterations, .cross_check = false});
  detail::save_ground(gs, stem, rc);
  return gs;
}

inline RadialProfile initial_profile(const RunConfig& rc, const GridPtr& grid, const GroundState* gs) {
  switch (rc.init.kind) {
    case InitialKind::GAUSSIAN: {
      const double a = rc.init.amplitude, w = rc.init.width;
      return RadialProfile::from_function(grid, [=](double r) { return a * std::exp(-r * r / (2 * w * w)); });
    }
    case InitialKind::SCALED_GROUND_STATE:
      if (!gs) throw ConfigError("initial kind SCALED_GROUND_STATE needs a ground state");
      return gs->Q.scaled(rc.init.scale);
    case InitialKind::FILE:
      try {
        return read_profile_text(rc.init.path, grid);
      } catch (const Error& e) {
        throw ConfigError(std::string("initial data: ") + e.what());
      }
  }
  throw ConfigError("unknown initial data kind");
}

inline nlohmann::json run_summary(const RunConfig& rc, const EvolutionResult& res, const std::vector<double>& eps_abs) {
  const auto& S = res.series;
  nlohmann::json j;
  j["provenance"] = provenance(rc);
  j["spec"] = rc.spec.to_kv();
  j["linear"] = S.linear;
  j["sponge"] = S.sponge;
  j["t_final"] = res.final_state.t;
  j["steps"] = res.final_state.step;
  j["mass_drift"] = relative_drift(S.mass);
  j["energy_drift"] = relative_drift(S.energy);
  j["boundary_flag_time"] = res.boundary_flag_time < 0.0 ? nlohmann::json(nullptr) : nlohmann::json(res.boundary_flag_time);
  nlohmann::json radii = nlohmann::json::array();
  for (std::size_t k = 0; k < S.radii.size(); ++k) {
    nlohmann::json r;
    r["R"] = S.radii[k];
    r["identity_residual"] = S.size() >= 3 ? json_number(identity_residual(S, k)) : nlohmann::json(nullptr);
    nlohmann::json ev = nlohmann::json::array();
    for (double e : eps_abs) ev.push_back(to_json(detect_evacuation(S, {S.radii[k]}, e).front()));
    r["evacuation"] = ev;
    radii.push_back(r);
  }
  j["radii"] = radii;
  return j;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_criticality(const RunConfig& rc, std::ostream& out) {
  const auto rep = criticality(rc.spec);
  nlohmann::json j;
  j["spec"] = rc.spec.to_kv();
  j["s"] = rep.s.value();
  j["s_exact"] = rep.s.str();
  j["lower_p"] = rep.lower_p.str();
  j["upper_p"] = rep.upper_p.str();
  j["classification"] = to_string(rep.classification);
  j["admissible"] = rep.admissible;
  j["provenance"] = provenance(rc);
  out << j.dump() << "\n";
  return kOk;
}

inline int cmd_ground(const RunConfig& rc, std::ostream& out) {
  require_admissible(rc.spec);
  const auto grid = run_grid(rc);
  const auto gs = solve_ground(rc.spec, grid, {.max_iterations = rc.ground_max_iterations});
  detail::save_ground(gs, rc.ground_stem(), rc);
  out << "ground state: Q(0)=" << std::setprecision(12) << gs.Q[0].real() << " M=" << gs.massQ
      << " E=" << gs.energyQ << "\n"
      << "pohozaev residuals: " << std::setprecision(3) << gs.pohozaev_residuals.first << " "
      << gs.pohozaev_residuals.second << "\n"
      << "stationary residual: " << gs.stationary_residual << ", " << gs.cross_check_method
      << " cross-check: " << gs.cross_check_error << "\n"
      << "wrote " << rc.ground_stem() << ".{bin,json}\n";
  return kOk;
}

inline int cmd_evolve(const RunConfig& rc, std::ostream& out) {
  const auto grid = run_grid(rc);
  std::filesystem::create_directories(rc.out_dir);
  std::optional<GroundState> gs;
  if (rc.init.kind == InitialKind::SCALED_GROUND_STATE) gs = obtain_ground(rc, grid, true, out);
  const auto u0 = initial_profile(rc, grid, gs ? &*gs : nullptr);
  Nonlinearity nl(rc.spec, grid);
  EvolutionOptions eo;
  eo.radii = rc.radii;
  eo.snapshot_every = rc.snapshot_every;
  eo.snapshot_dir = (std::filesystem::path(rc.out_dir) / "snapshots").string();
  eo.snapshot_trailer = provenance_line(rc);
  const auto res = evolve(u0, nl, rc.sim, eo);
  const auto out_dir = std::filesystem::path(rc.out_dir);
  write_series_csv(res.series, (out_dir / "series.csv").string(), provenance_line(rc));
  std::vector<double> eps_abs;
  for (double e : rc.eps) eps_abs.push_back(e * mass(u0));
  auto summary = run_summary(rc, res, eps_abs);
  if (gs && !rc.sim.linear) summary["classification"] = to_json(classify(u0, rc.spec, *gs));
  detail::write_json(out_dir / "summary.json", summary);
  out << "t=" << res.final_state.t << " steps=" << res.final_state.step << std::setprecision(3)
      << " mass_drift=" << summary["mass_drift"].get<double>() << " energy_drift=" << summary["energy_drift"].get<double>()
      << (rc.sim.sponge_enabled ? " (sponge on: mass loss expected)" : "") << "\n"
      << "wrote " << (out_dir / "series.csv").string() << " and summary.json\n";
  return kOk;
}

inline int cmd_classify(const RunConfig& rc, std::ostream& out) {
  const auto grid = run_grid(rc);
  const auto gs = obtain_ground(rc, grid, false, out);
  const auto u0 = initial_profile(rc, grid, &gs);
  auto j = to_json(classify(u0, rc.spec, gs));
  j["provenance"] = provenance(rc);
  std::filesystem::create_directories(rc.out_dir);
  detail::write_json(std::filesystem::path(rc.out_dir) / "classify.json", j);
  out << j.dump() << "\n";
  return kOk;
}

inline std::vector<CheckResult> verify_suite(const RunConfig& rc, std::ostream& log) {
  std::vector<CheckResult> all;
  auto add = [&](std::vector<CheckResult> v) {
    for (auto& c : v) {
      log << (c.informational ? "INFO" : (c.passed ? "PASS" : "FAIL")) << "  " << c.id << "  value=" << c.value
          << " tol=" << shortest(c.tolerance) << "  [" << c.anchor << "]\n";
      all.push_back(std::move(c));
    }
  };
  add(check_criticality_table());
  add(check_threshold_function());
  add(check_cutoff_identity(50, rc.verify.seed));
  add(check_radial_sobolev(static_cast<std::size_t>(rc.verify.sobolev_samples), rc.verify.seed + 1));
  require_admissible(rc.spec);
  const auto gs = solve_ground(rc.spec, make_grid(rc.spec.N, rc.verify.ground_R_max, rc.verify.ground_J),
                               {.max_iterations = rc.ground_max_iterations});
  add(check_ground_state(gs));
  add(check_weinstein(gs, static_cast<std::size_t>(rc.verify.weinstein_samples), rc.verify.seed + 2));
  add(check_weight_invariants(run_grid(rc), rc.radii));
  MorawetzRunSettings m;
  m.R_max = rc.R_max;
  m.J = rc.J;
  m.dt = rc.sim.dt;
  m.output_every = rc.sim.output_every;
  m.t_end = rc.verify.morawetz_t_end;
  m.R = rc.radii.front();
  add(check_morawetz_identity(rc.spec, m));
  return all;
}

inline int cmd_verify(const RunConfig& rc, std::ostream& out) {
  const auto checks = verify_suite(rc, out);
  nlohmann::json j;
  j["provenance"] = provenance(rc);
  j["passed"] = all_passed(checks);
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) j["checks"].push_back(to_json(c));
  std::filesystem::create_directories(rc.out_dir);
  detail::write_json(std::filesystem::path(rc.out_dir) / "verify.json", j);
  std::size_t failed = 0;
  for (const auto& c : checks) failed += (!c.informational && !c.passed);
  out << (failed ? "verify: " + std::to_string(failed) + " check(s) failed" : std::string("verify: all checks passed")) << "\n";
  return failed ? kVerifyFailed : kOk;
}

struct SweepRow {
  double c = 0.0;
  std::string status = "ok";
  ThresholdReport report;
  double evacuation_time = -1.0;  // first radius, first eps; < 0 if none
  double t_final = 0.0;
};

inline std::string scale_tag(double c) {
  std::ostringstream s;
  s << "c_" << c;
  return s.str();
}

inline int cmd_sweep(const RunConfig& rc, std::ostream& out, unsigned threads) {
  std::filesystem::create_directories(rc.out_dir);
  const auto out_dir = std::filesystem::path(rc.out_dir);
  std::vector<SweepRow> rows(rc.sweep_scales.size());
  if (!rows.empty()) {
    const auto grid = run_grid(rc);
    const auto gs = obtain_ground(rc, grid, true, out);
    const Nonlinearity nl(rc.spec, grid);  // shared read-only
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
      for (std::size_t i = next++; i < rows.size(); i = next++) {
        auto& row = rows[i];
        row.c = rc.sweep_scales[i];
        const auto u0 = gs.Q.scaled(row.c);
        row.report = classify(u0, rc.spec, gs);
        const auto dir = out_dir / "sweep" / scale_tag(row.c);
        std::filesystem::create_directories(dir);
        try {
          EvolutionOptions eo;
          eo.radii = rc.radii;
          const auto res = evolve(u0, nl, rc.sim, eo);
          write_series_csv(res.series, (dir / "series.csv").string(), provenance_line(rc));
          std::vector<double> eps_abs;
          for (double e : rc.eps) eps_abs.push_back(e * mass(u0));
          auto summary = run_summary(rc, res, eps_abs);
          summary["scale"] = row.c;
          summary["classification"] = to_json(row.report);
          detail::write_json(dir / "summary.json", summary);
          row.t_final = res.final_state.t;
          if (!rc.radii.empty() && !eps_abs.empty())
            row.evacuation_time = detect_evacuation(res.series, {rc.radii.front()}, eps_abs.front()).front().mass_evacuation_time;
        } catch (const NaNGuardError& e) {
          row.status = "nan_guard";
        }
        std::lock_guard lock(log_mutex);
        out << scale_tag(row.c) << ": " << to_string(row.report.verdict) << ", " << row.status << "\n";
      }
    };
    const unsigned k = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(rows.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < k; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  nlohmann::json j;
  j["provenance"] = provenance(rc);
  j["rows"] = nlohmann::json::array();
  std::ofstream csv(out_dir / "sweep_summary.csv");
  if (!csv) throw Error("cannot write sweep summary");
  csv << "# " << provenance_line(rc) << "\n" << "c,ME_ratio,grad_ratio,verdict,evacuation_time,status\n";
  bool guard = false;
  for (const auto& row : rows) {
    nlohmann::json r = to_json(row.report);
    r["c"] = row.c;
    r["status"] = row.status;
    r["evacuation_time"] = row.evacuation_time < 0.0 ? nlohmann::json(nullptr) : nlohmann::json(row.evacuation_time);
    j["rows"].push_back(r);
    csv << shortest(row.c) << "," << shortest(row.report.ME_ratio) << "," << shortest(row.report.grad_ratio)
        << "," << to_string(row.report.verdict) << "," << (row.evacuation_time < 0.0 ? "" : shortest(row.evacuation_time))
        << "," << row.status << "\n";
    guard = guard || row.status != "ok";
  }
  detail::write_json(out_dir / "sweep_summary.json", j);
  out << "sweep: " << rows.size() << " run(s), summary in " << (out_dir / "sweep_summary.csv").string() << "\n";
  return guard ? kNaNGuard : kOk;
}

// ---------------------------------------------------------------------------
// Entry point

/// Parses argv, runs one subcommand and maps errors to exit codes.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Numerical laboratory for focusing intercritical NLS and generalized Hartree equations", "nlslab"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::string config_path, out_flag;
  bool linear = false;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration (INI or JSON)")->check(CLI::ExistingFile);
    sub->add_option("--out", out_flag, "Output directory (overrides the config and " + std::string(kOutEnv) + ")");
  };
  auto* c_crit = app.add_subcommand("criticality", "Print the criticality report");
  auto* c_ground = app.add_subcommand("ground", "Compute and save the ground state");
  auto* c_evolve = app.add_subcommand("evolve", "Evolve the initial data with diagnostics");
  auto* c_class = app.add_subcommand("classify", "Compare the initial data with the ground-state thresholds");
  auto* c_verify = app.add_subcommand("verify", "Run the property suite");
  auto* c_sweep = app.add_subcommand("sweep", "Evolve c*Q for each configured scale c");
  for (auto* s : {c_crit, c_ground, c_evolve, c_class, c_verify, c_sweep}) common(s);
  c_evolve->add_flag("--linear", linear, "Linear test mode (nonlinearity off)");
  c_sweep->add_option("--threads", threads, "Concurrent runs")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "nlslab: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    RunConfig rc = config_path.empty() ? build_run_config(ConfigDocument{}) : load_run_config(config_path);
    if (const char* env = std::getenv(kOutEnv); env && *env) rc.out_dir = env;
    if (!out_flag.empty()) rc.out_dir = out_flag;
    if (linear) rc.sim.linear = true;
    if (c_crit->parsed()) return cmd_criticality(rc, out);
    if (c_ground->parsed()) return cmd_ground(rc, out);
    if (c_evolve->parsed()) return cmd_evolve(rc, out);
    if (c_class->parsed()) return cmd_classify(rc, out);
    if (c_verify->parsed()) return cmd_verify(rc, out);
    if (c_sweep->parsed()) return cmd_sweep(rc, out, threads);
  } catch (const ConfigError& e) {
    err << "nlslab: " << e.what() << "\n";
    return kConfigError;
  } catch (const InvalidSpec& e) {
    err << "nlslab: " << e.what() << "\n";
    return kConfigError;
  } catch (const ConvergenceError& e) {
    err << "nlslab: " << e.what() << " after " << e.history().size() << " iterations\n";
    return kNonConvergence;
  } catch (const NaNGuardError& e) {
    err << "nlslab: " << e.what() << "\n";
    return kNaNGuard;
  } catch (const std::exception& e) {
    err << "nlslab: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace nlslab::cli
