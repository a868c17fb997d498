#pragma once

// Experiment configs, output manifests and the per-kind runners behind the
// command line driver. A config is one stage object {kind, seed, out_dir, <kind>: {...}}
// or an array of stages sharing nothing but the order they run in.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "advect.hpp"
#include "besov.hpp"
#include "cascade.hpp"
#include "cutoffs.hpp"
#include "error.hpp"
#include "fieldfile.hpp"
#include "fieldgen.hpp"
#include "scales.hpp"
#include "spst.hpp"
#include "tracers.hpp"

namespace avlab::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---- schema ----

enum class Type { number, integer, boolean, string, numbers, optional_number };

struct Key {
  std::string name;
  Type type;
  json def;
  std::string help;
};

inline const std::vector<std::string>& kinds() {
  static const std::vector<std::string> k{"field", "scalar", "tracers", "cascade", "besov", "spst"};
  return k;
}

inline const std::vector<Key>& schema(const std::string& kind) {
  using T = Type;
  static const std::map<std::string, std::vector<Key>> all{
      {"field",
       {{"out", T::string, "field.avf", "output field file"},
        {"beta", T::number, 1.2, "Hoelder exponent of the base field"},
        {"lambda", T::number, 2.5, "scale ratio"},
        {"M", T::integer, 2, "number of levels"},
        {"mode", T::string, "hypergeometric", "scale law: hypergeometric or geometric"},
        {"n", T::optional_number, nullptr, "grid size (default: recipe)"},
        {"dt", T::optional_number, nullptr, "time step (default: tau_M / 8)"},
        {"tf", T::number, 0.5, "final time"},
        {"ab_order", T::integer, 3, "Adams-Bashforth order of the inverse flow"},
        {"heun_start", T::boolean, false, "Heun first step in the inverse flow"},
        {"keep_levels", T::boolean, false, "keep intermediate level files"}}},
      {"scalar",
       {{"field", T::string, "field.avf", "input field file"},
        {"out", T::string, "diag.csv", "diagnostics CSV"},
        {"kappa", T::numbers, json::array({1e-4, 3e-5, 1e-5}), "diffusivities"},
        {"t_end", T::number, 0.5, "final time"},
        {"refine", T::integer, 1, "scalar substeps per field step"},
        {"datum", T::string, "cos1sin2", "initial datum"},
        {"t1", T::optional_number, nullptr, "start of the report window (default: 10 tau''_M)"},
        {"every", T::integer, 1, "CSV row stride"},
        {"snapshots", T::integer, 0, "number of snapshot intervals (0: none)"},
        {"snap_dir", T::string, "snapshots", "snapshot directory"},
        {"zero_velocity", T::boolean, false, "pure diffusion control"},
        {"rate_threshold", T::number, 0.5, "rate ratio flagged as anomalous"}}},
      {"tracers",
       {{"field", T::string, "field.avf", "input field file"},
        {"out", T::string, "var.csv", "variance CSV"},
        {"xi", T::numbers, json::array({0.0, 0.0}), "endpoint"},
        {"tf", T::number, 0.5, "end time"},
        {"kappa", T::numbers, json::array({1e-4}), "diffusivities"},
        {"n", T::integer, 20000, "tracers per ensemble"},
        {"interp", T::string, "bilinear", "velocity interpolation: bilinear, bicubic or spectral"},
        {"upsample", T::integer, 1, "spectral upsampling factor"},
        {"dealias", T::boolean, false, "2/3 truncation before sampling"},
        {"record_every", T::integer, 1, "variance row stride"},
        {"hist_bins", T::integer, 0, "histogram bins per axis (0: none)"},
        {"fit", T::numbers, json::array(), "Richardson fit window lo,hi in s_hat"},
        {"auto_fit", T::boolean, false, "fit over the inertial window ending at the finest shear duration"},
        {"s_max", T::optional_number, nullptr, "longest backward time"}}},
      {"cascade",
       {{"out", T::string, "scan.csv", "scan CSV"},
        {"beta", T::number, 1.25, "Hoelder exponent"},
        {"lambda", T::number, 128.0, "scale base"},
        {"levels", T::integer, 40, "number of levels M"},
        {"zoom", T::integer, 3, "nested zooms"},
        {"zoom_factor", T::number, 8.0, "window shrink per zoom"},
        {"samples", T::integer, 400, "samples per window"},
        {"bits", T::integer, 256, "working precision"},
        {"first_level", T::integer, -1, "window start level (-1: auto)"},
        {"last_level", T::integer, -1, "window end level (-1: M - 1)"}}},
      {"besov",
       {{"runs", T::string, "snapshots", "snapshot directory of a scalar run"},
        {"out", T::string, "besov.csv", "norm table CSV"},
        {"sigma", T::string, "0.04:0.04:1.2", "sigma grid start:step:stop"},
        {"t_s", T::optional_number, nullptr, "end of the running sup (default: all times)"},
        {"onset_tol", T::number, 0.1, "relative growth marking onset"},
        {"slope_threshold", T::number, 0.05, "kappa slope marking growth"}}},
      {"spst",
       {{"out", T::string, "verdict.json", "verdict JSON"},
        {"example", T::string, "ex1", "ex1, ex1_sde, ex2, ex3 or ex4"},
        {"omega", T::string, "omega1", "ex1 perturbation"},
        {"omega_value", T::number, 1.0, "value of the constant perturbation"},
        {"cst", T::number, 0.0, "phase of omega2_atoms"},
        {"eps0", T::number, 0.1, "coarsest regularization"},
        {"levels", T::integer, 10, "dyadic levels"},
        {"samples", T::integer, 2000, "samples per level"},
        {"tol_nd", T::number, 1e-2, "vanishing-variance tolerance"},
        {"tol_osc", T::number, 1e-2, "oscillation tolerance"},
        {"c", T::number, 0.5, "ex2 start -c^2"},
        {"T", T::number, 1.0, "ex2 waiting time"},
        {"noise", T::boolean, false, "noise regularization (ex2)"},
        {"alpha", T::optional_number, nullptr, "exponent (ex3, ex4)"},
        {"x0", T::numbers, json::array(), "start point (default: example's)"},
        {"t", T::optional_number, nullptr, "observation time (default: example's)"},
        {"subseq_a", T::numbers, json::array(), "declared subsequence"},
        {"subseq_b", T::numbers, json::array(), "second declared subsequence"},
        {"blowup", T::boolean, true, "estimate the blowup time when a singular set exists"}}},
  };
  auto it = all.find(kind);
  if (it == all.end()) throw ConfigError("unknown experiment kind '" + kind + "'");
  return it->second;
}

inline json checked_value(const Key& k, const json& v, const std::string& where) {
  auto bad = [&](const std::string& want) { return ConfigError("field '" + where + "' must be " + want); };
  switch (k.type) {
    case Type::number:
      if (!v.is_number()) throw bad("a number");
      return v;
    case Type::integer:
      if (!v.is_number_integer() && !(v.is_number() && std::floor(v.get<double>()) == v.get<double>()))
        throw bad("an integer");
      return json(v.get<long long>());
    case Type::boolean:
      if (!v.is_boolean()) throw bad("true or false");
      return v;
    case Type::string:
      if (!v.is_string()) throw bad("a string");
      return v;
    case Type::numbers:
      if (!v.is_array()) throw bad("an array of numbers");
      for (auto& x : v)
        if (!x.is_number()) throw bad("an array of numbers");
      return v;
    case Type::optional_number:
      if (!v.is_null() && !v.is_number()) throw bad("a number or null");
      return v;
  }
  return v;
}

// One stage with every default filled in; unknown or mistyped fields are named.
inline json normalize_stage(const json& in) {
  if (!in.is_object()) throw ConfigError("a stage config must be a JSON object");
  if (!in.contains("kind") || !in["kind"].is_string()) throw ConfigError("field 'kind' is required");
  std::string kind = in["kind"];
  const auto& keys = schema(kind);
  for (auto& [k, v] : in.items())
    if (k != "kind" && k != "seed" && k != "out_dir" && k != kind) throw ConfigError("unknown field '" + k + "'");
  json out{{"kind", kind}, {"seed", 1}, {"out_dir", "."}};
  if (in.contains("seed")) {
    if (!in["seed"].is_number_integer() || in["seed"].get<long long>() < 0)
      throw ConfigError("field 'seed' must be a nonnegative integer");
    out["seed"] = in["seed"];
  }
  if (in.contains("out_dir")) {
    if (!in["out_dir"].is_string()) throw ConfigError("field 'out_dir' must be a string");
    out["out_dir"] = in["out_dir"];
  }
  json block = json::object();
  json given = in.value(kind, json::object());
  if (!given.is_object()) throw ConfigError("field '" + kind + "' must be an object");
  for (auto& [k, v] : given.items())
    if (std::none_of(keys.begin(), keys.end(), [&](const Key& x) { return x.name == k; }))
      throw ConfigError("unknown field '" + kind + "." + k + "'");
  for (auto& k : keys) block[k.name] = given.contains(k.name) ? checked_value(k, given[k.name], kind + "." + k.name) : k.def;
  out[kind] = block;
  return out;
}

inline json normalize(const json& in) {
  if (in.is_array()) {
    if (in.empty()) throw ConfigError("empty stage list");
    json out = json::array();
    for (auto& s : in) out.push_back(normalize_stage(s));
    return out;
  }
  return json::array({normalize_stage(in)});
}

inline json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline std::string sha256_of(const std::string& s) {
  fieldfile::Sha256 h;
  h.update(s.data(), s.size());
  return h.hex();
}

// Hash of the canonical serialization (sorted keys, no whitespace).
inline std::string config_hash(const json& stage) { return sha256_of(stage.dump()); }

inline std::string file_sha256(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot open " + p.string());
  fieldfile::Sha256 h;
  std::vector<char> buf(1 << 20);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  return h.hex();
}

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot write " + p.string());
  os << s;
  if (!os) throw IoError("short write to " + p.string());
}

inline std::string csv_with_hash(const std::string& hash, const std::string& body) {
  return "# config_sha256=" + hash + "\n" + body;
}

// ---- scalar snapshots ----
// "AVS1", u32 n, f64 t, f64 kappa, u32 blob length, JSON blob, n*n f64 physical values.

struct ScalarSnapshot {
  int n = 0;
  double t = 0, kappa = 0;
  json meta = json::object();
  std::vector<double> values;
};

inline void write_snapshot(const fs::path& p, const ScalarSnapshot& s) {
  std::string b = "AVS1";
  fieldfile::detail::put(b, static_cast<std::uint32_t>(s.n));
  fieldfile::detail::put(b, s.t);
  fieldfile::detail::put(b, s.kappa);
  std::string blob = s.meta.dump();
  fieldfile::detail::put(b, static_cast<std::uint32_t>(blob.size()));
  b += blob;
  for (double v : s.values) fieldfile::detail::put(b, v);
  write_text(p, b);
}

inline ScalarSnapshot read_snapshot(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot open snapshot " + p.string());
  std::string b((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (b.size() < 28 || b.compare(0, 4, "AVS1") != 0) throw IoError(p.string() + " is not a scalar snapshot");
  auto* q = reinterpret_cast<const unsigned char*>(b.data()) + 4;
  ScalarSnapshot s;
  s.n = static_cast<int>(fieldfile::detail::get<std::uint32_t>(q));
  s.t = fieldfile::detail::get<double>(q);
  s.kappa = fieldfile::detail::get<double>(q);
  auto len = fieldfile::detail::get<std::uint32_t>(q);
  std::size_t off = 4 + 4 + 16 + 4;
  std::size_t need = off + len + static_cast<std::size_t>(s.n) * s.n * sizeof(double);
  if (b.size() != need) throw IoError(p.string() + " is truncated");
  s.meta = json::parse(b.substr(off, len));
  q += len;
  s.values.resize(static_cast<std::size_t>(s.n) * s.n);
  for (auto& v : s.values) v = fieldfile::detail::get<double>(q);
  return s;
}

// ---- runners ----

struct StageResult {
  std::vector<std::string> outputs;  // relative to out_dir
  json summary = json::object();
};

inline fs::path out_dir_of(const json& st) { return fs::path(st["out_dir"].get<std::string>()); }

inline StageResult run_field(const json& st) {
  const json& c = st["field"];
  auto s = scales::build_schedule(scales::derive_exponents_beta(c["beta"]), c["lambda"], c["M"].get<int>(),
                                  scales::mode_from_string(c["mode"]));
  std::optional<int> n;
  std::optional<double> dt;
  if (!c["n"].is_null()) n = static_cast<int>(c["n"].get<double>());
  if (!c["dt"].is_null()) dt = c["dt"].get<double>();
  auto gs = fieldgen::default_grid(s, c["tf"], n, dt);
  fieldgen::BuildOptions o;
  o.scheme.order = c["ab_order"];
  o.scheme.heun_start = c["heun_start"];
  o.keep_levels = c["keep_levels"];
  o.quiet = false;
  o.out_path = (out_dir_of(st) / c["out"].get<std::string>()).string();
  o.extra_meta = {{"config_sha256", config_hash(st)}};
  auto r = fieldgen::build_field(s, gs, o);
  StageResult res;
  res.outputs.push_back(c["out"]);
  if (o.keep_levels)
    for (int m = 1; m < s.M; ++m) res.outputs.push_back(c["out"].get<std::string>() + ".level" + std::to_string(m));
  json lv = json::array();
  for (auto& l : r.levels) lv.push_back({{"m", l.m}, {"max_cfl", l.max_cfl}, {"slabs", l.slabs}});
  res.summary = {{"n", gs.n}, {"nt", gs.nt}, {"dt", gs.dt}, {"levels", lv}, {"body_sha256", r.field.header().meta[fieldfile::kHashKey]}};
  return res;
}

inline std::string stem_of(const std::string& out) {
  fs::path p(out);
  return (p.parent_path() / p.stem()).string();
}

inline StageResult run_scalar(const json& st) {
  const json& c = st["scalar"];
  const fs::path dir = out_dir_of(st);
  const std::string hash = config_hash(st);
  auto field = fieldgen::SpaceTimeField::open(c["field"]);
  const int n = field.n();
  std::vector<advect::ScalarState> states;
  for (double k : c["kappa"]) {
    states.push_back(advect::init_scalar(c["datum"], n));
    states.back().kappa = k;
  }
  if (states.empty()) throw ConfigError("field 'scalar.kappa' is empty");
  StageResult res;
  advect::RunOptions ro;
  ro.t_end = c["t_end"];
  ro.refine = c["refine"];
  ro.zero_velocity = c["zero_velocity"];
  const int snaps = c["snapshots"];
  auto nsteps = static_cast<std::size_t>(std::llround(ro.t_end / (field.dt() / ro.refine)));
  json index = json::array();
  const fs::path sdir = dir / c["snap_dir"].get<std::string>();
  if (snaps > 0) {
    fs::create_directories(sdir);
    auto g = std::make_shared<spectral::Grid>(n);
    std::vector<std::size_t> at;
    for (int i = 0; i <= snaps; ++i) at.push_back(static_cast<std::size_t>(std::llround(double(i) * nsteps / snaps)));
    ro.observe = [&, at, g](std::size_t step, const std::vector<advect::ScalarState>& s) {
      if (!std::binary_search(at.begin(), at.end(), step)) return;
      for (std::size_t j = 0; j < s.size(); ++j) {
        ScalarSnapshot sn;
        sn.n = n;
        sn.t = s[j].t;
        sn.kappa = s[j].kappa;
        sn.meta = {{"config_sha256", hash}};
        sn.values = advect::to_physical(*g, s[j]);
        char name[64];
        std::snprintf(name, sizeof name, "k%zu_s%07zu.avs", j, step);
        write_snapshot(sdir / name, sn);
        index.push_back({{"file", name}, {"t", sn.t}, {"kappa", sn.kappa}});
        res.outputs.push_back((fs::path(c["snap_dir"].get<std::string>()) / name).string());
      }
    };
  }
  auto diag = advect::run_scalar(field, states, ro);
  double t1;
  if (!c["t1"].is_null()) {
    t1 = c["t1"];
  } else {
    const json& sch = field.header().meta.at("schedule");
    t1 = 10.0 * sch.at("tau_pp").at(sch.at("M").get<int>()).get<double>();
  }
  std::string out = c["out"];
  write_text(dir / out, csv_with_hash(hash, advect::to_csv(diag, c["every"].get<std::size_t>())));
  res.outputs.push_back(out);
  auto rep = advect::dissipation_report(diag, t1, c["rate_threshold"]);
  json rj = advect::to_json(rep);
  json resid = json::array();
  for (auto& d : diag) resid.push_back(advect::energy_residual(d));
  rj["energy_residual"] = resid;
  rj["config_sha256"] = hash;
  write_text(dir / (stem_of(out) + ".report.json"), rj.dump(2) + "\n");
  res.outputs.push_back(stem_of(out) + ".report.json");
  if (snaps > 0) {
    write_text(sdir / "index.json", json{{"config_sha256", hash}, {"snapshots", index}}.dump(2) + "\n");
    res.outputs.push_back((fs::path(c["snap_dir"].get<std::string>()) / "index.json").string());
  }
  res.summary = rj;
  return res;
}

inline StageResult run_tracers(const json& st) {
  const json& c = st["tracers"];
  const fs::path dir = out_dir_of(st);
  const std::string hash = config_hash(st);
  auto field = fieldgen::SpaceTimeField::open(c["field"]);
  auto xi = c["xi"].get<std::vector<double>>();
  if (xi.size() != 2) throw ConfigError("field 'tracers.xi' needs two coordinates");
  auto fit = c["fit"].get<std::vector<double>>();
  if (!fit.empty() && fit.size() != 2) throw ConfigError("field 'tracers.fit' needs lo,hi");
  const bool auto_fit = c["auto_fit"];
  if (auto_fit && !fit.empty()) throw ConfigError("fields 'tracers.fit' and 'tracers.auto_fit' exclude each other");
  const json& sch = field.header().meta.at("schedule");
  tracers::BackwardOptions bo;
  bo.seed = st["seed"];
  bo.sampler.interp = tracers::interp_from_string(c["interp"]);
  bo.sampler.upsample = c["upsample"];
  bo.sampler.dealias = c["dealias"];
  std::string csv, hist;
  json fits = json::array();
  const int bins = c["hist_bins"];
  for (double k : c["kappa"]) {
    bo.kappa = k;
    auto e = tracers::run_backward(field, xi[0], xi[1], c["tf"], c["n"].get<std::size_t>(), bo,
                                   c["record_every"].get<std::size_t>(), c["s_max"].is_null() ? -1.0 : c["s_max"].get<double>());
    std::string v = tracers::variance_csv(e);
    csv += csv.empty() ? v : v.substr(v.find('\n') + 1);
    if (bins > 0) {
      std::string h = tracers::histogram_csv(tracers::transition_histogram(e, bins));
      std::string body = h.substr(h.find('\n') + 1), rows;
      std::istringstream is(body);
      std::ostringstream ks;
      ks.precision(12);
      ks << k;
      for (std::string line; std::getline(is, line);) rows += line + "," + ks.str() + "\n";
      if (hist.empty()) hist = "bin_x,bin_y,mass,kappa\n";
      hist += rows;
    }
    if (!fit.empty() || auto_fit) {
      auto w = auto_fit ? tracers::inertial_window(e, sch.at("tau_pp").back().get<double>())
                        : std::pair{fit[0], fit[1]};
      auto f = tracers::richardson_fit(e, w.first, w.second);
      fits.push_back({{"kappa", k}, {"exponent", f.exponent}, {"stderr", f.stderr_}, {"prefactor", f.prefactor},
                      {"points", f.points}, {"window", {w.first, w.second}}});
    }
  }
  StageResult res;
  std::string out = c["out"];
  write_text(dir / out, csv_with_hash(hash, csv));
  res.outputs.push_back(out);
  if (bins > 0) {
    write_text(dir / (stem_of(out) + ".hist.csv"), csv_with_hash(hash, hist));
    res.outputs.push_back(stem_of(out) + ".hist.csv");
  }
  if (!fits.empty()) {
    double alpha = sch.at("alpha"), gamma = sch.at("gamma");
    json j{{"config_sha256", hash}, {"fits", fits},
           {"nu_formula", 1 + (1 + alpha + gamma) / (1 - alpha)}, {"alpha", alpha}, {"gamma", gamma}};
    write_text(dir / (stem_of(out) + ".fit.json"), j.dump(2) + "\n");
    res.outputs.push_back(stem_of(out) + ".fit.json");
    res.summary["fits"] = fits;
  }
  return res;
}

inline StageResult run_cascade(const json& st) {
  const json& c = st["cascade"];
  const fs::path dir = out_dir_of(st);
  const std::string hash = config_hash(st);
  cascade::Precision prec(c["bits"].get<int>());
  auto L = cascade::make_levels(c["beta"], c["lambda"], c["levels"].get<int>(), scales::Mode::hypergeometric);
  cascade::ScanOptions so;
  so.samples = c["samples"];
  so.zooms = c["zoom"];
  so.zoom_factor = c["zoom_factor"];
  so.first_level = c["first_level"];
  so.last_level = c["last_level"];
  auto scan = cascade::scan_kappa0(L, so);
  StageResult res;
  std::string out = c["out"];
  write_text(dir / out, csv_with_hash(hash, cascade::scan_csv(scan)));
  res.outputs.push_back(out);
  json sums = json::array();
  for (auto& s : scan.summaries) sums.push_back(cascade::to_json(s));
  json j{{"config_sha256", hash}, {"windows", sums}};
  write_text(dir / (stem_of(out) + ".json"), j.dump(2) + "\n");
  res.outputs.push_back(stem_of(out) + ".json");
  res.summary = j;
  return res;
}

inline std::vector<besov::Series> load_series(const fs::path& run_dir) {
  json idx = load_json((run_dir / "index.json").string());
  std::map<double, besov::Series> by;
  std::map<int, std::unique_ptr<besov::Analyzer>> an;
  for (auto& e : idx.at("snapshots")) {
    auto sn = read_snapshot(run_dir / e.at("file").get<std::string>());
    auto& a = an[sn.n];
    if (!a) a = std::make_unique<besov::Analyzer>(sn.n);
    auto& s = by[sn.kappa];
    s.kappa = sn.kappa;
    s.snaps.push_back({sn.t, a->amplitudes_physical(sn.values)});
  }
  std::vector<besov::Series> out;
  for (auto it = by.rbegin(); it != by.rend(); ++it) {
    auto s = it->second;
    std::sort(s.snaps.begin(), s.snaps.end(), [](auto& a, auto& b) { return a.t < b.t; });
    out.push_back(std::move(s));
  }
  return out;
}

inline StageResult run_besov(const json& st) {
  const json& c = st["besov"];
  const fs::path dir = out_dir_of(st);
  const std::string hash = config_hash(st);
  auto runs = load_series(c["runs"].get<std::string>());
  besov::ScanOptions so;
  if (!c["t_s"].is_null()) so.t_s = c["t_s"];
  so.onset_tol = c["onset_tol"];
  so.slope_threshold = c["slope_threshold"];
  auto scan = besov::regularity_scan(runs, besov::sigma_grid(c["sigma"]), so);
  StageResult res;
  std::string out = c["out"];
  write_text(dir / out, csv_with_hash(hash, besov::to_csv(scan)));
  res.outputs.push_back(out);
  json j = besov::to_json(scan);
  j["config_sha256"] = hash;
  write_text(dir / (stem_of(out) + ".json"), j.dump(2) + "\n");
  res.outputs.push_back(stem_of(out) + ".json");
  res.summary = j;
  return res;
}

inline StageResult run_spst(const json& st) {
  const json& c = st["spst"];
  const fs::path dir = out_dir_of(st);
  const std::string hash = config_hash(st);
  spst::ExampleParams p;
  p.omega = c["omega"];
  p.omega_value = c["omega_value"];
  p.cst = c["cst"];
  p.c = c["c"];
  p.T = c["T"];
  p.noise = c["noise"];
  if (!c["alpha"].is_null()) p.alpha = c["alpha"];
  if (!c["t"].is_null()) p.t_obs = c["t"];
  p.x0 = c["x0"].get<std::vector<double>>();
  auto ex = spst::example_fields(c["example"], p);
  spst::ClassifyOptions o;
  o.eps0 = c["eps0"];
  o.levels = c["levels"];
  o.samples = c["samples"];
  o.seed = st["seed"];
  o.tol_nd = c["tol_nd"];
  o.tol_osc = c["tol_osc"];
  o.subseq_a = c["subseq_a"].get<std::vector<double>>();
  o.subseq_b = c["subseq_b"].get<std::vector<double>>();
  json j;
  if (ex.family.stochastic()) {
    // noise regularization: per-level ensemble statistics, no Lebesgue pushforward
    json lv = json::array();
    spst::EmpiricalMeasure last;
    for (int k = 0; k < o.levels; ++k) {
      double eps = std::ldexp(o.eps0, -k);
      last = spst::sde_ensemble(ex.family, ex.x0, ex.t, eps, o.samples, o.seed * 1000003ull + k);
      auto s = spst::level_stats(last, -1, 1);
      lv.push_back({{"eps", eps}, {"mean", s.mean}, {"var", s.var}, {"var_se", s.var_se}});
    }
    json at = json::array();
    if (last.dim == 1)
      for (auto& a : spst::two_atoms(last)) at.push_back({{"location", a.location}, {"weight", a.weight}});
    j = {{"classification", nullptr}, {"reason", "stochastic regularization: ensemble statistics only"}, {"levels", lv}, {"atoms", at}};
  } else {
    j = spst::to_json(spst::classify_spst(ex.curve().curve(), o));
  }
  if (c["blowup"].get<bool>() && ex.singular_distance) {
    auto b = spst::blowup_time(ex);
    j["blowup"] = {{"elapsed", b.elapsed}, {"t_star", b.t_star}, {"levels", b.levels}, {"crossings", b.crossings}};
  }
  j["example"] = ex.name;
  j["x0"] = ex.x0;
  j["t"] = ex.t;
  j["config_sha256"] = hash;
  StageResult res;
  std::string out = c["out"];
  write_text(dir / out, j.dump(2) + "\n");
  res.outputs.push_back(out);
  res.summary = {{"classification", j["classification"]}};
  return res;
}

inline StageResult run_stage(const json& st) {
  fs::create_directories(out_dir_of(st));
  const std::string kind = st["kind"];
  if (kind == "field") return run_field(st);
  if (kind == "scalar") return run_scalar(st);
  if (kind == "tracers") return run_tracers(st);
  if (kind == "cascade") return run_cascade(st);
  if (kind == "besov") return run_besov(st);
  if (kind == "spst") return run_spst(st);
  throw ConfigError("unknown experiment kind '" + kind + "'");
}

// ---- cheap self-checks recorded in manifests and rerun by verify ----

inline json self_checks() {
  const auto& fam = cutoffs::default_family();
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    double t = -3 + 6.0 * (i + 0.5) / 10000, s = 0;
    for (int k = -6; k <= 6; ++k) s += fam.zeta(t - k);
    worst = std::max(worst, std::abs(s - 1));
  }
  double l2 = fam.l2_sq();
  const int n = 16;
  spectral::Grid g(n);
  std::vector<advect::ScalarState> st{advect::init_scalar("random:4,3", n)};
  st[0].kappa = 1e-2;
  auto h0 = st[0].hat;
  auto zero = [&](double, spectral::Velocity& v) {
    v.b1.assign(g.real_size(), 0.0);
    v.b2.assign(g.real_size(), 0.0);
  };
  advect::run_scalar(g, zero, st, 0.01, 20, true);
  double heat = 0;
  for (int j2 = 0; j2 < n; ++j2)
    for (int j1 = 0; j1 < g.nh(); ++j1) {
      std::size_t i = static_cast<std::size_t>(j2) * g.nh() + j1;
      auto exact = h0[i] * std::exp(-4 * std::numbers::pi * std::numbers::pi * 1e-2 * g.k_sq(j1, j2) * 0.2);
      heat = std::max(heat, std::abs(st[0].hat[i] - exact));
    }
  auto entry = [](double v, double tol) { return json{{"value", v}, {"tol", tol}, {"pass", v <= tol}}; };
  return {{"cutoff_partition", entry(worst, 1e-12)},
          {"cutoff_l2", entry(std::abs(l2 - cutoffs::kTargetL2), 1e-6)},
          {"heat_kernel", entry(heat, 1e-12)}};
}

// ---- manifests ----

inline json run_config(const json& cfg, const fs::path& manifest_path) {
  json stages = normalize(cfg);
  const fs::path base = manifest_path.parent_path().empty() ? fs::path(".") : manifest_path.parent_path();
  json outputs = json::array(), summaries = json::array();
  for (auto& st : stages) {
    auto r = run_stage(st);
    for (auto& o : r.outputs) {
      fs::path full = out_dir_of(st) / o;
      fs::path rel = fs::relative(full, base);
      outputs.push_back({{"path", rel.generic_string()}, {"sha256", file_sha256(full)}, {"bytes", fs::file_size(full)}});
    }
    summaries.push_back({{"kind", st["kind"]}, {"config_sha256", config_hash(st)}, {"summary", r.summary}});
  }
  std::sort(outputs.begin(), outputs.end(), [](const json& a, const json& b) { return a["path"] < b["path"]; });
  json m{{"manifest_version", 1}, {"configs", stages}, {"config_sha256", config_hash(stages)},
         {"stages", summaries}, {"outputs", outputs}, {"checks", self_checks()}};
  fs::create_directories(base);
  write_text(manifest_path, m.dump(2) + "\n");
  return m;
}

struct VerifyReport {
  bool ok = true;
  std::vector<std::string> problems;
  int exit_code() const {
    if (ok) return 0;
    for (auto& p : problems)
      if (p.rfind("check", 0) != 0) return static_cast<int>(ErrorKind::io);
    return static_cast<int>(ErrorKind::numerical);
  }
};

inline VerifyReport verify(const fs::path& manifest_path) {
  json m = load_json(manifest_path.string());
  const fs::path base = manifest_path.parent_path().empty() ? fs::path(".") : manifest_path.parent_path();
  VerifyReport r;
  if (!m.contains("outputs") || !m["outputs"].is_array()) throw ConfigError("manifest has no outputs list");
  for (auto& o : m["outputs"]) {
    fs::path p = base / o.at("path").get<std::string>();
    if (!fs::exists(p)) {
      r.problems.push_back("missing file: " + o["path"].get<std::string>());
      continue;
    }
    if (file_sha256(p) != o.at("sha256").get<std::string>()) r.problems.push_back("hash mismatch: " + o["path"].get<std::string>());
  }
  if (m.contains("configs") && config_hash(m["configs"]) != m.value("config_sha256", ""))
    r.problems.push_back("config hash mismatch");
  json checks = self_checks();
  for (auto& [k, v] : checks.items())
    if (!v["pass"].get<bool>()) r.problems.push_back("check failed: " + k);
  r.ok = r.problems.empty();
  return r;
}

// ---- presets ----

inline json preset(const std::string& name, const std::string& out_dir) {
  auto in = [&](const std::string& f) { return (fs::path(out_dir) / f).string(); };
  if (name == "desk-anomalous")
    return json::array({
        {{"kind", "field"}, {"out_dir", out_dir}, {"field", {{"M", 2}, {"n", 256}, {"beta", 1.2}, {"lambda", 2.5}}}},
        {{"kind", "scalar"},
         {"out_dir", out_dir},
         {"scalar", {{"field", in("field.avf")}, {"kappa", {1e-4, 3e-5, 1e-5}}, {"every", 8}, {"snapshots", 20}}}},
        {{"kind", "tracers"},
         {"out_dir", out_dir},
         {"seed", 7},
         {"tracers", {{"field", in("field.avf")}, {"kappa", {1e-4}}, {"n", 20000}, {"hist_bins", 64}, {"record_every", 8}, {"auto_fit", true}}}},
    });
  if (name == "cascade-fractal")
    return json{{"kind", "cascade"}, {"out_dir", out_dir}, {"cascade", {{"beta", 1.30}, {"lambda", 128.0}, {"zoom", 3}}}};
  throw ConfigError("unknown preset '" + name + "' (expected desk-anomalous or cascade-fractal)");
}

}  // namespace avlab::cli
