#pragma once

// Flat `section.key=value` run configuration. Blank lines and `#` comments
// are ignored; unknown or repeated keys are errors. serialize() writes every
// key with round-trip precision, so its output parses back to the same value.

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "beamlqr/beam_sim.hpp"
#include "beamlqr/csv.hpp"
#include "beamlqr/errors.hpp"
#include "beamlqr/kernel_assembly.hpp"
#include "beamlqr/modal_riccati.hpp"

namespace beamlqr {

struct SimSettings {
  SimMode mode = SimMode::decoupled;
  double dt = 1e-3;
  double T = 2.0;
  InputConvention input = InputConvention::paper_beta;
  SignConvention sign = SignConvention::paper;
  double c_mode = 0.25;
  int stride = 10;
  std::string initial_displacement = "parabola";
  std::string initial_velocity = "zero";
  int quadrature_intervals = 4096;
};

struct GridSettings {
  int points = 257;
  int field_snapshots = 5;
};

struct OutputSettings {
  std::string dir = "out";
  TrajectoryFormat format = TrajectoryFormat::wide;
};

struct VerifySettings {
  double residual_tol = 1e-9;
  double oracle_tol = 1e-8;
  double eigen_tol = 1e-10;
  double cost_tol = 1e-2;
  double exponent_tol = 0.3;
  int fit_lo = 8;
  int fit_hi = 64;
  int cost_modes = 3;  ///< cost identity checked on modes 1..cost_modes
  double spillover_T = 1.0;
  double spillover_dt = 1e-3;
};

struct RunConfig {
  BeamParams beam{};
  WeightProfile weights{};
  SimSettings sim{};
  GridSettings grid{};
  OutputSettings output{};
  VerifySettings verify{};

  /// Checks every field; throws ConfigError naming the offending key.
  void validate() const;
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || !std::isfinite(out)) {
    throw ConfigError(key + ": '" + v + "' is not a finite number");
  }
  return out;
}

inline int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) {
    throw ConfigError(key + ": '" + v + "' is not an integer");
  }
  return out;
}

inline std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> parts;
  if (trim(v).empty()) return parts;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(trim(item));
  return parts;
}

template <class E>
E parse_enum(const std::string& key, const std::string& v,
             std::initializer_list<std::pair<const char*, E>> table) {
  for (const auto& [name, e] : table) {
    if (v == name) return e;
  }
  std::string allowed;
  for (const auto& [name, e] : table) {
    allowed += allowed.empty() ? name : std::string("|") + name;
  }
  throw ConfigError(key + ": '" + v + "' is not one of " + allowed);
}

inline const char* name_of(SimMode m) {
  switch (m) {
    case SimMode::open_loop: return "open_loop";
    case SimMode::decoupled: return "decoupled";
    case SimMode::coupled: return "coupled";
  }
  return "decoupled";
}
inline const char* name_of(InputConvention c) {
  return c == InputConvention::physical ? "physical" : "paper_beta";
}
inline const char* name_of(SignConvention c) {
  return c == SignConvention::derivative ? "derivative" : "paper";
}
inline const char* name_of(TrajectoryFormat f) {
  return f == TrajectoryFormat::long_format ? "long" : "wide";
}

inline SimMode parse_mode(const std::string& key, const std::string& v) {
  return parse_enum<SimMode>(key, v,
                             {{"open_loop", SimMode::open_loop},
                              {"decoupled", SimMode::decoupled},
                              {"coupled", SimMode::coupled}});
}
inline TrajectoryFormat parse_format(const std::string& key,
                                     const std::string& v) {
  return parse_enum<TrajectoryFormat>(
      key, v,
      {{"wide", TrajectoryFormat::wide}, {"long", TrajectoryFormat::long_format}});
}

// One entry per key: how to read it into a RunConfig and how to print it.
struct Field {
  const char* key;
  void (*read)(RunConfig&, const std::string& key, const std::string& value);
  std::string (*write)(const RunConfig&);
};

#define BEAMLQR_DOUBLE(KEY, MEMBER)                                          \
  Field {                                                                    \
    KEY,                                                                     \
        [](RunConfig& c, const std::string& k, const std::string& v) {       \
          c.MEMBER = parse_double(k, v);                                     \
        },                                                                   \
        [](const RunConfig& c) { return csv::format_double(c.MEMBER); }      \
  }
#define BEAMLQR_INT(KEY, MEMBER)                                             \
  Field {                                                                    \
    KEY,                                                                     \
        [](RunConfig& c, const std::string& k, const std::string& v) {       \
          c.MEMBER = parse_int(k, v);                                        \
        },                                                                   \
        [](const RunConfig& c) { return std::to_string(c.MEMBER); }          \
  }

inline const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      BEAMLQR_DOUBLE("beam.alpha", beam.alpha),
      BEAMLQR_DOUBLE("beam.beta", beam.beta),
      BEAMLQR_DOUBLE("beam.R", beam.R),
      BEAMLQR_DOUBLE("weights.q", weights.q),
      BEAMLQR_DOUBLE("weights.r", weights.r),
      BEAMLQR_INT("weights.N", weights.N),
      Field{"weights.mask",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.weights.mask.clear();
              for (const std::string& s : split_commas(v)) {
                if (!c.weights.mask.insert(parse_int(k, s)).second) {
                  throw ConfigError(k + ": mode " + s + " listed twice");
                }
              }
            },
            [](const RunConfig& c) {
              std::string out;
              for (int n : c.weights.mask) {
                out += (out.empty() ? "" : ",") + std::to_string(n);
              }
              return out;
            }},
      Field{"weights.base",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              const auto parts = split_commas(v);
              if (parts.size() != 3) {
                throw ConfigError(k + ": expected q11,q12,q22");
              }
              c.weights.base = {parse_double(k, parts[0]),
                                parse_double(k, parts[1]),
                                parse_double(k, parts[2])};
            },
            [](const RunConfig& c) {
              const ModalWeight& b = c.weights.base;
              return csv::format_double(b.q11) + "," +
                     csv::format_double(b.q12) + "," +
                     csv::format_double(b.q22);
            }},
      Field{"sim.mode",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.sim.mode = parse_mode(k, v);
            },
            [](const RunConfig& c) { return std::string(name_of(c.sim.mode)); }},
      BEAMLQR_DOUBLE("sim.dt", sim.dt),
      BEAMLQR_DOUBLE("sim.T", sim.T),
      Field{"sim.input",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.sim.input = parse_enum<InputConvention>(
                  k, v,
                  {{"paper_beta", InputConvention::paper_beta},
                   {"physical", InputConvention::physical}});
            },
            [](const RunConfig& c) {
              return std::string(name_of(c.sim.input));
            }},
      Field{"sim.sign",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.sim.sign = parse_enum<SignConvention>(
                  k, v,
                  {{"paper", SignConvention::paper},
                   {"derivative", SignConvention::derivative}});
            },
            [](const RunConfig& c) { return std::string(name_of(c.sim.sign)); }},
      BEAMLQR_DOUBLE("sim.c_mode", sim.c_mode),
      BEAMLQR_INT("sim.stride", sim.stride),
      Field{"sim.initial_displacement",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              try {
                c.sim.initial_displacement = InitialShape::parse(v).to_string();
              } catch (const InvalidInput& e) {
                throw ConfigError(k + ": " + e.what());
              }
            },
            [](const RunConfig& c) { return c.sim.initial_displacement; }},
      Field{"sim.initial_velocity",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              try {
                c.sim.initial_velocity = InitialShape::parse(v).to_string();
              } catch (const InvalidInput& e) {
                throw ConfigError(k + ": " + e.what());
              }
            },
            [](const RunConfig& c) { return c.sim.initial_velocity; }},
      BEAMLQR_INT("sim.quadrature_intervals", sim.quadrature_intervals),
      BEAMLQR_INT("grid.points", grid.points),
      BEAMLQR_INT("grid.field_snapshots", grid.field_snapshots),
      Field{"output.dir",
            [](RunConfig& c, const std::string&, const std::string& v) {
              c.output.dir = v;
            },
            [](const RunConfig& c) { return c.output.dir; }},
      Field{"output.format",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.output.format = parse_format(k, v);
            },
            [](const RunConfig& c) {
              return std::string(name_of(c.output.format));
            }},
      BEAMLQR_DOUBLE("verify.residual_tol", verify.residual_tol),
      BEAMLQR_DOUBLE("verify.oracle_tol", verify.oracle_tol),
      BEAMLQR_DOUBLE("verify.eigen_tol", verify.eigen_tol),
      BEAMLQR_DOUBLE("verify.cost_tol", verify.cost_tol),
      BEAMLQR_DOUBLE("verify.exponent_tol", verify.exponent_tol),
      BEAMLQR_INT("verify.fit_lo", verify.fit_lo),
      BEAMLQR_INT("verify.fit_hi", verify.fit_hi),
      BEAMLQR_INT("verify.cost_modes", verify.cost_modes),
      BEAMLQR_DOUBLE("verify.spillover_T", verify.spillover_T),
      BEAMLQR_DOUBLE("verify.spillover_dt", verify.spillover_dt),
  };
  return table;
}

#undef BEAMLQR_DOUBLE
#undef BEAMLQR_INT

inline const Field* find_field(std::string_view key) {
  for (const Field& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

}  // namespace config_detail

inline void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  try {
    beam.validate();
    weights.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  require(sim.dt > 0.0, "sim.dt must be > 0");
  require(sim.T > 0.0, "sim.T must be > 0");
  require(sim.c_mode > 0.0, "sim.c_mode must be > 0");
  require(sim.stride >= 1, "sim.stride must be >= 1");
  require(sim.quadrature_intervals >= 4 && sim.quadrature_intervals % 4 == 0,
          "sim.quadrature_intervals must be a positive multiple of 4");
  require(grid.points >= 2, "grid.points must be >= 2");
  require(grid.field_snapshots >= 1, "grid.field_snapshots must be >= 1");
  require(!output.dir.empty(), "output.dir must not be empty");
  require(verify.residual_tol > 0.0 && verify.oracle_tol > 0.0 &&
              verify.eigen_tol > 0.0 && verify.cost_tol > 0.0 &&
              verify.exponent_tol > 0.0,
          "verify tolerances must be > 0");
  require(verify.fit_lo >= 1 && verify.fit_hi > verify.fit_lo,
          "verify.fit_lo/fit_hi must satisfy 1 <= fit_lo < fit_hi");
  require(verify.cost_modes >= 0, "verify.cost_modes must be >= 0");
  require(verify.spillover_T > 0.0 && verify.spillover_dt > 0.0,
          "verify.spillover_T and verify.spillover_dt must be > 0");
}

/// Parses config text on top of the defaults. Keys not present keep their
/// default value. The result is validated.
inline RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = config_detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key=value");
    }
    const std::string key = config_detail::trim(body.substr(0, eq));
    const std::string value = config_detail::trim(body.substr(eq + 1));
    const config_detail::Field* f = config_detail::find_field(key);
    if (f == nullptr) {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" +
                        key + "'");
    }
    if (!seen.insert(key).second) {
      throw ConfigError("line " + std::to_string(lineno) + ": key '" + key +
                        "' repeated");
    }
    f->read(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

/// Every key, one per line, in a fixed order.
inline std::string serialize(const RunConfig& cfg) {
  std::string out;
  for (const config_detail::Field& f : config_detail::fields()) {
    out += f.key;
    out += '=';
    out += f.write(cfg);
    out += '\n';
  }
  return out;
}

}  // namespace beamlqr
