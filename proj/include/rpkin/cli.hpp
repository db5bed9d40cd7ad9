#pragma once

// Scenario configuration and the run / verify / compare front-end commands.
//
// Config documents are JSON:
//
//   {
//     "space":        {"dim": 2, "singlet_indices": [0]},
//     "initial_state": "equal-mixture",        // or "pure-singlet", "pure-triplet",
//                                              // "st-superposition", "random",
//                                              // or {"matrix": [[re, im], ...]} row-major
//     "seed":          0,                      // used by "random"
//     "k_S":           1.0,
//     "models":        ["jones-hore"],
//     "weight_scheme": "corrected",            // or "kominis"
//     "integrator":    {"method": "rk45-adaptive", "dt": 0.001, "rel_tol": 1e-9, "abs_tol": 1e-12},
//     "time":          {"t_end": 10.0, "n_snapshots": 101},
//     "outputs":       {"csv_path": "trajectory.csv", "report_path": "report.json"}
//   }
//
// Unknown keys are rejected. Every error message starts with the key path.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rpkin/errors.hpp"
#include "rpkin/integrator.hpp"
#include "rpkin/kinetics.hpp"
#include "rpkin/models.hpp"
#include "rpkin/spinspace.hpp"
#include "rpkin/verify.hpp"

namespace rpkin::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

enum ExitCode : int { kSuccess = 0, kCheckFailure = 1, kConfigError = 2, kIntegrationError = 3 };

class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"pure-singlet", "pure-triplet", "equal-mixture", "st-superposition"};
  return names;
}

struct InitialStateSpec {
  enum class Kind { Preset, Explicit, Random };
  Kind kind = Kind::Preset;
  std::string preset = "equal-mixture";
  Matrix matrix;  // Explicit only

  friend bool operator==(const InitialStateSpec& a, const InitialStateSpec& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case Kind::Preset: return a.preset == b.preset;
      case Kind::Random: return true;
      case Kind::Explicit:
        return a.matrix.rows() == b.matrix.rows() && a.matrix.cols() == b.matrix.cols() && a.matrix == b.matrix;
    }
    return false;
  }
};

struct ScenarioConfig {
  std::size_t dim = 2;
  std::vector<std::size_t> singlet_indices{0};
  InitialStateSpec initial_state;
  std::uint64_t seed = 0;
  double k_S = 1.0;
  std::vector<ModelKind> models{ModelKind::JonesHoreUnnormalized};
  WeightScheme weight_scheme = WeightScheme::Corrected;
  Method method = Method::Rk45Adaptive;
  std::optional<double> dt;
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double t_end = 10.0;
  std::size_t n_snapshots = 101;
  std::string csv_path = "trajectory.csv";
  std::string report_path = "report.json";

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;

  SpinSpace space() const { return SpinSpace(dim, singlet_indices); }
  IntegratorOptions integrator_options() const {
    IntegratorOptions o;
    o.method = method;
    o.dt = dt;
    o.rel_tol = rel_tol;
    o.abs_tol = abs_tol;
    return o;
  }
  std::vector<double> grid() const { return uniform_grid(t_end, n_snapshots); }
};

inline DensityMatrix initial_state(const ScenarioConfig& c) {
  const auto space = c.space();
  switch (c.initial_state.kind) {
    case InitialStateSpec::Kind::Random: return random_density_matrix(space, c.seed);
    case InitialStateSpec::Kind::Explicit: return DensityMatrix(space, c.initial_state.matrix);
    case InitialStateSpec::Kind::Preset: break;
  }
  const auto& p = c.initial_state.preset;
  if (p == "pure-singlet") return pure_singlet(space);
  if (p == "pure-triplet") return pure_triplet(space);
  if (p == "equal-mixture") return equal_mixture(space);
  if (p == "st-superposition") return st_superposition(space);
  throw ConfigError("initial_state: unknown preset '" + p + "'");
}

namespace detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

inline void reject_unknown(const Json& obj, const std::string& prefix, std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* a : allowed) known = known || it.key() == a;
    if (!known) fail(prefix + it.key(), "unknown key");
  }
}

inline const Json& object_at(const Json& parent, const char* key, const std::string& path) {
  if (!parent.contains(key)) fail(path, "missing section");
  const Json& v = parent.at(key);
  if (!v.is_object()) fail(path, "expected an object");
  return v;
}

inline double number_at(const Json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

inline std::uint64_t count_at(const Json& v, const std::string& path) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    fail(path, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

inline std::string string_at(const Json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

inline Matrix matrix_from_json(const Json& entries, std::size_t dim, const std::string& path) {
  if (!entries.is_array()) fail(path, "expected an array of [re, im] pairs");
  if (entries.size() != dim * dim)
    fail(path, "expected " + std::to_string(dim * dim) + " entries, got " + std::to_string(entries.size()));
  const auto n = static_cast<Eigen::Index>(dim);
  Matrix m(n, n);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& pair = entries[k];
    const std::string at = path + "[" + std::to_string(k) + "]";
    if (!pair.is_array() || pair.size() != 2) fail(at, "expected [re, im]");
    m(static_cast<Eigen::Index>(k / dim), static_cast<Eigen::Index>(k % dim)) =
        Complex(number_at(pair[0], at + "[0]"), number_at(pair[1], at + "[1]"));
  }
  return m;
}

}  // namespace detail

/// Parses and validates a JSON config document; defaults are applied for
/// every optional key.
inline ScenarioConfig parse_config(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("<document>: ") + e.what());
  }
  if (!doc.is_object()) detail::fail("<document>", "expected a JSON object");
  detail::reject_unknown(doc, "", {"space", "initial_state", "seed", "k_S", "models", "weight_scheme", "integrator",
                                   "time", "outputs"});

  ScenarioConfig c;

  const Json& space = detail::object_at(doc, "space", "space");
  detail::reject_unknown(space, "space.", {"dim", "singlet_indices"});
  if (!space.contains("dim")) detail::fail("space.dim", "missing");
  c.dim = detail::count_at(space["dim"], "space.dim");
  if (c.dim == 0) detail::fail("space.dim", "must be positive");
  if (!space.contains("singlet_indices")) detail::fail("space.singlet_indices", "missing");
  if (!space["singlet_indices"].is_array()) detail::fail("space.singlet_indices", "expected an array");
  c.singlet_indices.clear();
  for (std::size_t i = 0; i < space["singlet_indices"].size(); ++i)
    c.singlet_indices.push_back(
        detail::count_at(space["singlet_indices"][i], "space.singlet_indices[" + std::to_string(i) + "]"));
  try {
    c.singlet_indices = c.space().singlet_indices();  // canonical (sorted) order
  } catch (const InvalidArgument& e) {
    detail::fail("space.singlet_indices", e.what());
  }

  if (doc.contains("seed")) c.seed = detail::count_at(doc["seed"], "seed");

  if (!doc.contains("initial_state")) detail::fail("initial_state", "missing");
  const Json& init = doc["initial_state"];
  if (init.is_string()) {
    const auto name = init.get<std::string>();
    if (name == "random") {
      c.initial_state.kind = InitialStateSpec::Kind::Random;
      c.initial_state.preset.clear();
    } else {
      bool known = false;
      for (const auto& p : preset_names()) known = known || p == name;
      if (!known) detail::fail("initial_state", "unknown preset '" + name + "'");
      c.initial_state.kind = InitialStateSpec::Kind::Preset;
      c.initial_state.preset = name;
    }
  } else if (init.is_object()) {
    detail::reject_unknown(init, "initial_state.", {"matrix"});
    if (!init.contains("matrix")) detail::fail("initial_state.matrix", "missing");
    c.initial_state.kind = InitialStateSpec::Kind::Explicit;
    c.initial_state.preset.clear();
    c.initial_state.matrix = detail::matrix_from_json(init["matrix"], c.dim, "initial_state.matrix");
    const auto v = validate(c.initial_state.matrix);
    if (v.verdict != Verdict::Pass) detail::fail("initial_state", "explicit matrix rejected: " + v.message);
  } else {
    detail::fail("initial_state", "expected a preset name or {\"matrix\": [...]}");
  }

  if (!doc.contains("k_S")) detail::fail("k_S", "missing");
  c.k_S = detail::number_at(doc["k_S"], "k_S");
  if (!(c.k_S > 0.0) || !std::isfinite(c.k_S)) detail::fail("k_S", "must be a positive finite number");

  if (doc.contains("models")) {
    const Json& models = doc["models"];
    if (!models.is_array() || models.empty()) detail::fail("models", "expected a non-empty array of model names");
    c.models.clear();
    for (std::size_t i = 0; i < models.size(); ++i) {
      const std::string at = "models[" + std::to_string(i) + "]";
      try {
        c.models.push_back(parse_model_kind(detail::string_at(models[i], at)));
      } catch (const ConfigError&) {
        throw;
      } catch (const InvalidArgument& e) {
        detail::fail(at, e.what());
      }
    }
  }

  if (doc.contains("weight_scheme")) {
    try {
      c.weight_scheme = parse_weight_scheme(detail::string_at(doc["weight_scheme"], "weight_scheme"));
    } catch (const ConfigError&) {
      throw;
    } catch (const InvalidArgument& e) {
      detail::fail("weight_scheme", e.what());
    }
  }

  if (doc.contains("integrator")) {
    const Json& integ = detail::object_at(doc, "integrator", "integrator");
    detail::reject_unknown(integ, "integrator.", {"method", "dt", "rel_tol", "abs_tol"});
    if (integ.contains("method")) {
      try {
        c.method = parse_method(detail::string_at(integ["method"], "integrator.method"));
      } catch (const ConfigError&) {
        throw;
      } catch (const InvalidArgument& e) {
        detail::fail("integrator.method", e.what());
      }
    }
    if (integ.contains("dt")) {
      c.dt = detail::number_at(integ["dt"], "integrator.dt");
      if (!(*c.dt > 0.0)) detail::fail("integrator.dt", "must be positive");
    }
    if (integ.contains("rel_tol")) {
      c.rel_tol = detail::number_at(integ["rel_tol"], "integrator.rel_tol");
      if (!(c.rel_tol > 0.0)) detail::fail("integrator.rel_tol", "must be positive");
    }
    if (integ.contains("abs_tol")) {
      c.abs_tol = detail::number_at(integ["abs_tol"], "integrator.abs_tol");
      if (!(c.abs_tol > 0.0)) detail::fail("integrator.abs_tol", "must be positive");
    }
  }

  const Json& time = detail::object_at(doc, "time", "time");
  detail::reject_unknown(time, "time.", {"t_end", "n_snapshots"});
  if (!time.contains("t_end")) detail::fail("time.t_end", "missing");
  c.t_end = detail::number_at(time["t_end"], "time.t_end");
  if (!(c.t_end > 0.0) || !std::isfinite(c.t_end)) detail::fail("time.t_end", "must be positive");
  if (!time.contains("n_snapshots")) detail::fail("time.n_snapshots", "missing");
  c.n_snapshots = detail::count_at(time["n_snapshots"], "time.n_snapshots");
  if (c.n_snapshots < 2) detail::fail("time.n_snapshots", "must be at least 2");

  if (doc.contains("outputs")) {
    const Json& out = detail::object_at(doc, "outputs", "outputs");
    detail::reject_unknown(out, "outputs.", {"csv_path", "report_path"});
    if (out.contains("csv_path")) c.csv_path = detail::string_at(out["csv_path"], "outputs.csv_path");
    if (out.contains("report_path")) c.report_path = detail::string_at(out["report_path"], "outputs.report_path");
    if (c.csv_path.empty()) detail::fail("outputs.csv_path", "must not be empty");
    if (c.report_path.empty()) detail::fail("outputs.report_path", "must not be empty");
  }
  return c;
}

/// Every key written out, defaults included; parse_config(emit_config(c)) == c.
inline std::string emit_config(const ScenarioConfig& c) {
  OrderedJson doc;
  doc["space"] = {{"dim", c.dim}, {"singlet_indices", c.singlet_indices}};
  switch (c.initial_state.kind) {
    case InitialStateSpec::Kind::Preset: doc["initial_state"] = c.initial_state.preset; break;
    case InitialStateSpec::Kind::Random: doc["initial_state"] = "random"; break;
    case InitialStateSpec::Kind::Explicit: {
      OrderedJson entries = OrderedJson::array();
      const auto& m = c.initial_state.matrix;
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) entries.push_back({m(i, j).real(), m(i, j).imag()});
      doc["initial_state"] = {{"matrix", entries}};
      break;
    }
  }
  doc["seed"] = c.seed;
  doc["k_S"] = c.k_S;
  OrderedJson models = OrderedJson::array();
  for (auto m : c.models) models.push_back(std::string(to_string(m)));
  doc["models"] = models;
  doc["weight_scheme"] = std::string(to_string(c.weight_scheme));
  OrderedJson integ;
  integ["method"] = std::string(to_string(c.method));
  if (c.dt) integ["dt"] = *c.dt;
  integ["rel_tol"] = c.rel_tol;
  integ["abs_tol"] = c.abs_tol;
  doc["integrator"] = integ;
  doc["time"] = {{"t_end", c.t_end}, {"n_snapshots", c.n_snapshots}};
  doc["outputs"] = {{"csv_path", c.csv_path}, {"report_path", c.report_path}};
  return doc.dump(2) + "\n";
}

inline ScenarioConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// Output ---------------------------------------------------------------------

/// %.17g: lossless for doubles.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_header(std::size_t dim) {
  std::string h = "t,trace,p_singlet,p_triplet";
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = i; j < dim; ++j) {
      const auto ij = std::to_string(i) + "_" + std::to_string(j);
      h += ",re_" + ij;
      if (i != j) h += ",im_" + ij;
    }
  return h;
}

inline std::string csv_row(double t, const DensityMatrix& rho) {
  const auto& m = rho.matrix();
  std::string row = format_double(t) + "," + format_double(m.trace().real()) + "," +
                    format_double(singlet_probability(rho)) + "," + format_double(triplet_probability(rho));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i; j < m.cols(); ++j) {
      row += "," + format_double(m(i, j).real());
      if (i != j) row += "," + format_double(m(i, j).imag());
    }
  return row;
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

inline std::string trajectory_csv(const Trajectory& traj) {
  std::string text = csv_header(traj.states.front().dim()) + "\n";
  for (std::size_t i = 0; i < traj.size(); ++i) text += csv_row(traj.times[i], traj.states[i]) + "\n";
  return text;
}

/// "<dir>/<stem>_<suffix><ext>" for a configured output path.
inline fs::path derived_path(const fs::path& out_dir, const std::string& configured, const std::string& suffix) {
  const fs::path base(configured);
  const auto ext = base.has_extension() ? base.extension().string() : std::string(".csv");
  return out_dir / base.parent_path() / (base.stem().string() + "_" + suffix + ext);
}

inline Json check_to_json(const CheckRecord& c) {
  Json j{{"name", c.name},
         {"max_deviation", c.max_deviation},
         {"t_at_max", c.t_at_max},
         {"tolerance", c.tolerance},
         {"passed", c.passed}};
  if (!c.note.empty()) j["note"] = c.note;
  if (!c.metrics.empty()) {
    Json m = Json::object();
    for (const auto& [k, v] : c.metrics) m[k] = v;
    j["metrics"] = m;
  }
  return j;
}

inline std::string divergence_csv(const std::vector<DivergencePoint>& curve) {
  std::string text = "t,p_singlet_corrected,p_singlet_kominis,difference\n";
  for (const auto& p : curve)
    text += format_double(p.t) + "," + format_double(p.p_singlet_corrected) + "," +
            format_double(p.p_singlet_kominis) + "," + format_double(p.difference) + "\n";
  return text;
}

struct RunOptions {
  fs::path out_dir = ".";
  bool quiet = false;
};

namespace detail {

inline std::vector<Trajectory> integrate_models(const ScenarioConfig& c, const DensityMatrix& rho,
                                                const std::vector<double>& grid) {
  const RateParams params{c.k_S, std::nullopt};
  const auto opts = c.integrator_options();
  std::vector<std::future<Trajectory>> jobs;
  for (auto m : c.models)
    jobs.push_back(std::async(std::launch::async, [m, &rho, &params, &grid, &opts] {
      return integrate(m, rho, params, grid, opts);
    }));
  std::vector<Trajectory> out;
  std::optional<std::string> first_error;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    try {
      out.push_back(jobs[i].get());
    } catch (const std::exception& e) {
      if (!first_error) first_error = std::string(to_string(c.models[i])) + ": " + e.what();
    }
  }
  if (first_error) throw IntegrationError(*first_error);
  return out;
}

inline Trajectory mixture_trajectory(const ScenarioConfig& c, const DensityMatrix& rho,
                                     const std::vector<double>& grid) {
  const auto mix = mixture_from_initial(rho);
  Trajectory traj;
  traj.model = ModelKind::NormalizedJonesHore;
  for (double t : grid) {
    traj.times.push_back(t);
    traj.states.push_back(reconstruct(weights_at(c.weight_scheme, t, mix.p_T, c.k_S), mix));
    traj.observables.push_back(observe(traj.states.back()));
  }
  return traj;
}

}  // namespace detail

/// Integrates every configured model and writes one CSV per model, plus
/// the kinetic-mixture reconstruction for the configured weight scheme.
inline int run_command(const ScenarioConfig& c, const RunOptions& ro, std::ostream& log = std::cout) {
  const auto rho = initial_state(c);
  const auto grid = c.grid();
  write_text(ro.out_dir / "config.echo.json", emit_config(c));
  std::vector<Trajectory> trajectories;
  try {
    trajectories = detail::integrate_models(c, rho, grid);
  } catch (const Error& e) {
    log << "error: integration failed: " << e.what() << "\n";
    return kIntegrationError;
  }
  for (const auto& traj : trajectories) {
    const auto path = derived_path(ro.out_dir, c.csv_path, std::string(to_string(traj.model)));
    write_text(path, trajectory_csv(traj));
    if (!ro.quiet) log << "wrote " << path.string() << " (" << traj.size() << " rows)\n";
  }
  if (std::abs(rho.trace() - 1.0) <= kDefaultTolerances.trace_tol) {
    try {
      const auto mixture = detail::mixture_trajectory(c, rho, grid);
      const auto path = derived_path(ro.out_dir, c.csv_path, "mixture-" + std::string(to_string(c.weight_scheme)));
      write_text(path, trajectory_csv(mixture));
      if (!ro.quiet) log << "wrote " << path.string() << " (" << mixture.size() << " rows)\n";
    } catch (const Error& e) {
      log << "error: mixture reconstruction (" << to_string(c.weight_scheme) << ") failed: " << e.what() << "\n";
      return kIntegrationError;
    }
  } else if (!ro.quiet) {
    log << "note: initial state not normalized; mixture reconstruction skipped\n";
  }
  return kSuccess;
}

inline Json report_to_json(const ScenarioConfig& c, const ConsistencyReport& report, const std::string& divergence) {
  Json scenario{{"label", report.scenario.label},
                {"dim", c.dim},
                {"singlet_indices", c.singlet_indices},
                {"k_S", c.k_S},
                {"t_end", c.t_end},
                {"n_snapshots", c.n_snapshots},
                {"method", std::string(to_string(c.method))},
                {"dt", report.scenario.options.step_for(c.k_S)},
                {"config", Json::parse(emit_config(c))}};
  Json checks = Json::array();
  for (const auto& chk : report.checks) checks.push_back(check_to_json(chk));
  return Json{{"scenario", scenario},
              {"checks", checks},
              {"divergence_curve", divergence},
              {"all_passed", report.all_passed()}};
}

/// Runs the consistency checks on the configured scenario; writes the JSON
/// report and the divergence curve CSV.
inline int verify_command(const ScenarioConfig& c, const RunOptions& ro, std::ostream& log = std::cout) {
  write_text(ro.out_dir / "config.echo.json", emit_config(c));
  Scenario sc{c.initial_state.kind == InitialStateSpec::Kind::Preset ? c.initial_state.preset
              : c.initial_state.kind == InitialStateSpec::Kind::Random
                  ? "random seed " + std::to_string(c.seed)
                  : "explicit",
              initial_state(c), c.k_S, c.grid(), c.integrator_options()};
  const auto report = run_scenario(sc);

  const fs::path report_path = ro.out_dir / c.report_path;
  const fs::path curve_rel =
      fs::path(c.report_path).parent_path() / (fs::path(c.report_path).stem().string() + "_divergence.csv");
  write_text(ro.out_dir / curve_rel, divergence_csv(report.divergence));
  write_text(report_path, report_to_json(c, report, curve_rel.generic_string()).dump(2) + "\n");

  if (!ro.quiet) {
    for (const auto& chk : report.checks) {
      char line[256];
      std::snprintf(line, sizeof line, "[%s] %-24s max_deviation=%.6e t=%.4g tolerance=%.1e",
                    chk.passed ? "PASS" : "FAIL", chk.name.c_str(), chk.max_deviation, chk.t_at_max, chk.tolerance);
      log << line;
      if (!chk.note.empty() && !chk.passed) log << "  (" << chk.note << ")";
      log << "\n";
    }
    log << "wrote " << report_path.string() << "\n";
  }
  return report.all_passed() ? kSuccess : kCheckFailure;
}

/// Singlet probability of every configured model on the shared grid.
inline int compare_command(const ScenarioConfig& c, const RunOptions& ro, std::ostream& log = std::cout) {
  const auto rho = initial_state(c);
  const auto grid = c.grid();
  write_text(ro.out_dir / "config.echo.json", emit_config(c));
  std::vector<Trajectory> trajectories;
  try {
    trajectories = detail::integrate_models(c, rho, grid);
  } catch (const Error& e) {
    log << "error: integration failed: " << e.what() << "\n";
    return kIntegrationError;
  }
  std::string text = "t";
  for (const auto& traj : trajectories) text += ",p_singlet_" + std::string(to_string(traj.model));
  text += "\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    text += format_double(grid[i]);
    for (const auto& traj : trajectories) text += "," + format_double(traj.observables[i].p_singlet);
    text += "\n";
  }
  const auto path = derived_path(ro.out_dir, c.csv_path, "compare");
  write_text(path, text);
  if (!ro.quiet) log << "wrote " << path.string() << "\n";
  return kSuccess;
}

}  // namespace rpkin::cli
