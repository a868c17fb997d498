#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "cutoffs.hpp"
#include "error.hpp"
#include "fieldfile.hpp"
#include "scales.hpp"
#include "spectral.hpp"

namespace avlab::fieldgen {

using json = nlohmann::json;
using fieldfile::Header;
using scales::Schedule;
using spectral::cplx;
using spectral::Grid;
using spectral::Velocity;

// Streamfunction frames phi(t_k, x) on a uniform space-time grid, in memory or on disk.
class SpaceTimeField {
 public:
  static SpaceTimeField in_memory(Header h) {
    SpaceTimeField f;
    f.h_ = std::move(h);
    f.mem_.assign(f.frame_values() * f.h_.nt, 0.0);
    return f;
  }
  static SpaceTimeField on_disk(const std::string& path, Header h) {
    SpaceTimeField f;
    f.file_ = std::make_unique<fieldfile::FieldFile>(fieldfile::FieldFile::create(path, std::move(h)));
    f.h_ = f.file_->header();
    return f;
  }
  static SpaceTimeField open(const std::string& path) {
    SpaceTimeField f;
    f.file_ = std::make_unique<fieldfile::FieldFile>(fieldfile::FieldFile::open(path));
    f.h_ = f.file_->header();
    return f;
  }

  const Header& header() const { return h_; }
  int n() const { return static_cast<int>(h_.n); }
  std::size_t nt() const { return h_.nt; }
  double dt() const { return h_.dt(); }
  double time(std::size_t k) const { return h_.time(k); }
  std::size_t frame_values() const { return static_cast<std::size_t>(h_.n) * h_.n; }
  bool file_backed() const { return static_cast<bool>(file_); }
  std::string path() const { return file_ ? file_->path() : std::string{}; }

  void read_frame(std::size_t k, double* v) const {
    if (file_) return file_->read_frame(k, v);
    check(k);
    std::copy_n(mem_.data() + k * frame_values(), frame_values(), v);
  }
  std::vector<double> read_frame(std::size_t k) const {
    std::vector<double> v(frame_values());
    read_frame(k, v.data());
    return v;
  }
  void write_frame(std::size_t k, const double* v) {
    if (file_) return file_->write_frame(k, v);
    check(k);
    std::copy_n(v, frame_values(), mem_.data() + k * frame_values());
  }

  // Frame index of time t; refuses times outside the stored span.
  std::size_t frame_at(double t) const {
    if (h_.nt == 1) return 0;
    double u = (t - h_.t0) / dt();
    if (u < -1e-9 || u > static_cast<double>(h_.nt - 1) + 1e-9)
      throw ConfigError("time " + std::to_string(t) + " lies outside the stored field span [" +
                        std::to_string(h_.t0) + ", " + std::to_string(h_.tf) + "]");
    return static_cast<std::size_t>(std::llround(std::max(0.0, u)));
  }

  std::string seal() {
    std::string hash;
    if (file_) {
      hash = file_->seal();
      h_ = file_->header();
    } else {
      fieldfile::Sha256 sha;
      sha.update(mem_.data(), mem_.size() * sizeof(double));
      hash = sha.hex();
      h_.meta[fieldfile::kHashKey] = hash;
    }
    return hash;
  }

 private:
  SpaceTimeField() = default;
  void check(std::size_t k) const {
    if (k >= h_.nt) throw ConfigError("frame " + std::to_string(k) + " beyond stored span");
  }
  Header h_;
  std::vector<double> mem_;
  std::unique_ptr<fieldfile::FieldFile> file_;
};

// Space-time grid for a schedule.
struct GridSpec {
  int n = 0;
  double dt = 0.0;
  double tf = 0.0;
  std::size_t nt = 0;
};

// Default grid: four points per finest wavelength rounded up to a power of two, dt = tau_M / 8.
inline GridSpec default_grid(const Schedule& s, double tf, std::optional<int> n_override = {},
                             std::optional<double> dt_override = {}) {
  GridSpec g;
  double inv = static_cast<double>(s.eps_inv[s.M]);
  g.n = n_override ? *n_override : 4 * (1 << static_cast<int>(std::ceil(std::log2(inv))));
  double dt = dt_override ? *dt_override : s.tau[s.M] / 8.0;
  if (!(tf > 0.0) || !(dt > 0.0)) throw ConfigError("t_f and dt must be positive");
  // never coarser than requested
  auto steps = static_cast<std::size_t>(std::ceil(tf / dt - 1e-9));
  if (steps < 1) steps = 1;
  g.nt = steps + 1;
  g.dt = tf / static_cast<double>(steps);
  g.tf = tf;
  return g;
}

// Shear building block of level m; only odd k carry a shear, alternating direction.
inline double psi_mk(const Schedule& s, int m, long k, double x1, double x2) {
  long r = ((k % 4) + 4) % 4;
  if (r != 1 && r != 3) return 0.0;
  double amp = s.a[m] * s.eps[m] * s.eps[m];
  double arg = 2.0 * std::numbers::pi * (r == 1 ? x1 : x2) / s.eps[m];
  return amp * std::sin(arg);
}

namespace detail {

inline const std::array<std::array<double, 4>, 4> kAdamsBashforth = {{
    {1.0, 0.0, 0.0, 0.0},
    {1.5, -0.5, 0.0, 0.0},
    {23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0, 0.0},
    {55.0 / 24.0, -59.0 / 24.0, 37.0 / 24.0, -9.0 / 24.0},
}};

}  // namespace detail

// Order used on the n-th step (1-based): bootstrap 1, 2, 3, then the steady order.
inline int ab_order_for_step(int step, int order) { return std::min(step, order); }

struct FlowStats {
  double max_cfl = 0.0;
  std::size_t steps = 0;
};

// Adams-Bashforth order and start. The plain start takes one Euler step, which caps the
// global order at two; the Heun start uses only frame velocities and keeps order three.
struct FlowScheme {
  int order = 3;
  bool heun_start = false;
};

// Integrates dY/dt = -b.grad Y - b from Y = 0 at frame `anchor` to frame `target` (either
// direction), calling visit(frame, Y1, Y2) at every frame including the anchor.
// velocity(frame, Velocity&) supplies b at stored frames.
template <class VelocityFn, class Visit>
FlowStats integrate_inverse_flow(const Grid& g, VelocityFn&& velocity, std::size_t anchor, std::size_t target,
                                 double dt, FlowScheme scheme, Visit&& visit, long slab_id = 0) {
  const int order = scheme.order;
  if (order < 1 || order > 4) throw ConfigError("Adams-Bashforth order must be in 1..4");
  FlowStats st;
  const std::size_t R = g.real_size(), S = g.spec_size();
  using Pair = std::array<std::vector<cplx>, 2>;
  Pair yhat{g.spec_buffer(), g.spec_buffer()};
  std::array<std::vector<double>, 2> y{g.real_buffer(), g.real_buffer()};
  // history of right-hand sides, newest first
  std::vector<Pair> hist;
  std::vector<cplx> d(S);
  std::vector<double> d1(R), d2(R), rhs(R);
  Velocity b;
  const int dir = target >= anchor ? 1 : -1;
  const double h = dir * dt;
  const std::size_t nsteps = dir > 0 ? target - anchor : anchor - target;

  auto eval = [&](const Pair& yh, std::size_t k) {
    velocity(k, b);
    double bmax = std::max(spectral::max_abs(b.b1), spectral::max_abs(b.b2));
    st.max_cfl = std::max(st.max_cfl, bmax * dt / g.dx());
    Pair f{g.spec_buffer(), g.spec_buffer()};
    for (int c = 0; c < 2; ++c) {
      g.derivative(yh[c].data(), d.data(), 0);
      g.inverse(d.data(), d1.data());
      g.derivative(yh[c].data(), d.data(), 1);
      g.inverse(d.data(), d2.data());
      const auto& bc = c == 0 ? b.b1 : b.b2;
      for (std::size_t i = 0; i < R; ++i) rhs[i] = -b.b1[i] * d1[i] - b.b2[i] * d2[i] - bc[i];
      g.forward(rhs.data(), f[c].data());
      g.dealias(f[c]);
    }
    return f;
  };

  visit(anchor, y[0], y[1]);
  std::size_t frame = anchor;
  for (std::size_t step = 1; step <= nsteps; ++step) {
    std::size_t next = dir > 0 ? frame + 1 : frame - 1;
    hist.insert(hist.begin(), eval(yhat, frame));
    if (hist.size() > 4) hist.pop_back();
    if (step == 1 && scheme.heun_start) {
      Pair pred = yhat;
      for (int c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < S; ++i) pred[c][i] += h * hist[0][c][i];
      Pair f1 = eval(pred, next);
      for (int c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < S; ++i) yhat[c][i] += 0.5 * h * (hist[0][c][i] + f1[c][i]);
    } else {
      int p = ab_order_for_step(static_cast<int>(step), order);
      const auto& coef = detail::kAdamsBashforth[p - 1];
      for (int c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < S; ++i) {
          cplx acc{};
          for (int j = 0; j < p; ++j) acc += coef[j] * hist[j][c][i];
          yhat[c][i] += h * acc;
        }
    }
    frame = next;
    for (int c = 0; c < 2; ++c) {
      g.enforce_hermitian(yhat[c].data());
      g.inverse(yhat[c].data(), y[c].data());
      for (double v : y[c])
        if (!std::isfinite(v))
          throw NumericalError("non-finite inverse flow in slab " + std::to_string(slab_id) + " at frame " +
                               std::to_string(frame));
    }
    visit(frame, y[0], y[1]);
    ++st.steps;
  }
  return st;
}

// Displacement fields of one slab, stored per frame.
struct InverseFlowSlab {
  long l = 0;
  std::size_t first = 0, anchor = 0;
  std::vector<std::vector<double>> y1, y2;
};

// Slab index owning a frame: the nearest anchor l * tau_pp.
inline long slab_of(double t, double tau_pp) { return std::lround(t / tau_pp); }

struct SlabFrames {
  long l = 0;
  std::size_t lo = 0, hi = 0, anchor = 0;
  double snap_error = 0.0;
};

inline std::vector<SlabFrames> slab_partition(double t0, double dt, std::size_t nt, double tau_pp) {
  std::vector<SlabFrames> out;
  for (std::size_t k = 0; k < nt; ++k) {
    long l = slab_of(t0 + k * dt, tau_pp);
    if (out.empty() || out.back().l != l) out.push_back({l, k, k, 0, 0.0});
    out.back().hi = k;
  }
  for (auto& s : out) {
    double ta = s.l * tau_pp;
    long a = std::lround((ta - t0) / dt);
    a = std::clamp<long>(a, static_cast<long>(s.lo), static_cast<long>(s.hi));
    s.anchor = static_cast<std::size_t>(a);
    s.snap_error = std::abs(t0 + a * dt - ta);
  }
  return out;
}

inline void velocity_of_frame(const SpaceTimeField& f, std::size_t k, spectral::VelocityBuilder& vb,
                              std::vector<double>& scratch, Velocity& v) {
  scratch.resize(f.frame_values());
  f.read_frame(k, scratch.data());
  vb.from_stream(scratch.data(), v);
}

inline InverseFlowSlab solve_inverse_flow(const SpaceTimeField& prev, const Schedule& s, int m, long l,
                                          FlowScheme scheme = {}) {
  if (m < 1 || m > s.M) throw ConfigError("level out of range");
  Grid g(prev.n());
  spectral::VelocityBuilder vb(g);
  std::vector<double> scratch;
  auto parts = slab_partition(prev.header().t0, prev.dt(), prev.nt(), s.tau_pp[m]);
  auto it = std::find_if(parts.begin(), parts.end(), [&](auto& p) { return p.l == l; });
  if (it == parts.end()) throw ConfigError("slab " + std::to_string(l) + " lies outside the field span");
  InverseFlowSlab slab;
  slab.l = l;
  slab.first = it->lo;
  slab.anchor = it->anchor;
  std::size_t count = it->hi - it->lo + 1;
  slab.y1.resize(count);
  slab.y2.resize(count);
  auto vel = [&](std::size_t k, Velocity& v) { velocity_of_frame(prev, k, vb, scratch, v); };
  auto store = [&](std::size_t k, const std::vector<double>& a, const std::vector<double>& b) {
    slab.y1[k - it->lo] = a;
    slab.y2[k - it->lo] = b;
  };
  integrate_inverse_flow(g, vel, it->anchor, it->hi, prev.dt(), scheme, store, l);
  integrate_inverse_flow(g, vel, it->anchor, it->lo, prev.dt(), scheme, store, l);
  return slab;
}

struct LevelOptions {
  FlowScheme scheme;
  double cfl_warn = 1.0;
  bool quiet = false;
};

struct LevelStats {
  int m = 0;
  double max_cfl = 0.0;
  double max_snap_error = 0.0;
  std::size_t slabs = 0;
};

// Cutoff weights of the x1 and x2 shears and the slab cutoff at time t.
struct ActiveShear {
  double w1 = 0.0, w2 = 0.0;
};

inline ActiveShear active_shear(const cutoffs::Family& fam, const Schedule& s, int m, double t) {
  ActiveShear a;
  double tau = s.tau[m];
  long base = static_cast<long>(std::floor(t / tau));
  for (long k = base - 1; k <= base + 2; ++k) {
    long r = ((k % 4) + 4) % 4;
    if (r == 1) a.w1 += fam.zeta_mk(tau, static_cast<int>(k), t);
    if (r == 3) a.w2 += fam.zeta_mk(tau, static_cast<int>(k), t);
  }
  return a;
}

inline void check_resolution(const Schedule& s, int m, int n, double dt) {
  double dx = 1.0 / n;
  double rx = dx / s.eps[m], rt = dt / s.tau[m];
  if (rx > 0.25 + 1e-12 || rt > 0.125 + 1e-12) {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "resolution insufficient for level %d: dx/eps_m = %.4g (need <= 0.25), dt/tau_m = %.4g (need <= 0.125)",
                  m, rx, rt);
    throw ConfigError(buf);
  }
}

// Level m from level m-1 (prev == nullptr means phi_0 = 0).
inline LevelStats build_level(const SpaceTimeField* prev, const Schedule& s, int m, const cutoffs::Family& fam,
                              SpaceTimeField& out, const LevelOptions& opt = {}) {
  const int n = out.n();
  const double dt = out.dt();
  check_resolution(s, m, n, dt);
  if (prev && (prev->n() != n || prev->nt() != out.nt())) throw ConfigError("level grids differ");
  LevelStats st;
  st.m = m;
  Grid g(n);
  spectral::VelocityBuilder vb(g);
  const std::size_t R = g.real_size();
  std::vector<double> prev_frame(R, 0.0), frame(R), scratch;
  const double amp = s.a[m] * s.eps[m] * s.eps[m];
  const double w = 2.0 * std::numbers::pi / s.eps[m];
  std::vector<double> coord(n);
  for (int i = 0; i < n; ++i) coord[i] = static_cast<double>(i) / n;

  auto compose = [&](std::size_t k, const std::vector<double>* y1, const std::vector<double>* y2, long l) {
    double t = out.time(k);
    if (prev) prev->read_frame(k, prev_frame.data());
    double hat = fam.zetahat_ml(s.tau_p[m], s.tau_pp[m], l, t);
    auto act = active_shear(fam, s, m, t);
    double c1 = hat * act.w1 * amp, c2 = hat * act.w2 * amp;
    double mean = 0.0;
    for (int i2 = 0; i2 < n; ++i2)
      for (int i1 = 0; i1 < n; ++i1) {
        std::size_t i = static_cast<std::size_t>(i2) * n + i1;
        double v = 0.0;
        if (c1 != 0.0) v += c1 * std::sin(w * (coord[i1] + (y1 ? (*y1)[i] : 0.0)));
        if (c2 != 0.0) v += c2 * std::sin(w * (coord[i2] + (y2 ? (*y2)[i] : 0.0)));
        frame[i] = v;
        mean += v;
      }
    mean /= static_cast<double>(R);
    for (std::size_t i = 0; i < R; ++i) frame[i] = prev_frame[i] + frame[i] - mean;
    out.write_frame(k, frame.data());
  };

  auto parts = slab_partition(out.header().t0, dt, out.nt(), s.tau_pp[m]);
  st.slabs = parts.size();
  for (auto& p : parts) {
    st.max_snap_error = std::max(st.max_snap_error, p.snap_error);
    if (!prev) {
      for (std::size_t k = p.lo; k <= p.hi; ++k) compose(k, nullptr, nullptr, p.l);
      continue;
    }
    auto vel = [&](std::size_t k, Velocity& v) { velocity_of_frame(*prev, k, vb, scratch, v); };
    auto fwd = [&](std::size_t k, const std::vector<double>& a, const std::vector<double>& b) {
      compose(k, &a, &b, p.l);
    };
    auto bwd = [&](std::size_t k, const std::vector<double>& a, const std::vector<double>& b) {
      if (k != p.anchor) compose(k, &a, &b, p.l);
    };
    auto f1 = integrate_inverse_flow(g, vel, p.anchor, p.hi, dt, opt.scheme, fwd, p.l);
    auto f2 = integrate_inverse_flow(g, vel, p.anchor, p.lo, dt, opt.scheme, bwd, p.l);
    double cfl = std::max(f1.max_cfl, f2.max_cfl);
    st.max_cfl = std::max(st.max_cfl, cfl);
    if (cfl > opt.cfl_warn && !opt.quiet)
      std::cerr << "warning: level " << m << " slab " << p.l << " CFL number " << cfl << " exceeds "
                << opt.cfl_warn << "\n";
  }
  return st;
}

struct BuildOptions {
  FlowScheme scheme;
  bool keep_levels = false;
  bool quiet = true;
  // empty: build in memory
  std::string out_path;
  // merged into every level's metadata
  json extra_meta = json::object();
};

inline json level_meta(const Schedule& s, const GridSpec& gs, int level, FlowScheme scheme,
                       const cutoffs::Family& fam) {
  json j;
  j["kind"] = "streamfunction";
  j["level"] = level;
  j["schedule"] = scales::to_json(s);
  j["grid"] = {{"n", gs.n}, {"nt", gs.nt}, {"dt", gs.dt}, {"tf", gs.tf}};
  j["ab_order"] = scheme.order;
  j["heun_start"] = scheme.heun_start;
  j["cutoff"] = {{"alpha_stretch", fam.alpha_stretch}, {"warp_c", fam.warp_c}};
  j["layout"] = "row-major, x1 fastest, little-endian f64";
  return j;
}

struct BuildResult {
  SpaceTimeField field;
  std::vector<LevelStats> levels;
};

// Levels 1..M in order; each level is persisted before the next one is built.
inline BuildResult build_field(const Schedule& s, const GridSpec& gs, const BuildOptions& opt = {}) {
  const auto& fam = cutoffs::default_family();
  for (int m = 1; m <= s.M; ++m) check_resolution(s, m, gs.n, gs.dt);
  if (s.M > 1) {
    // cheap global guard against exhausting the disk
    if (!opt.out_path.empty()) {
      auto dir = std::filesystem::absolute(opt.out_path).parent_path();
      std::error_code ec;
      auto space = std::filesystem::space(dir, ec);
      double need = 2.0 * gs.nt * static_cast<double>(gs.n) * gs.n * sizeof(double);
      if (!ec && static_cast<double>(space.available) < need)
        throw IoError("not enough disk space in " + dir.string() + " for two field levels");
    }
  }
  auto make = [&](int m) {
    Header h;
    h.n = static_cast<std::uint32_t>(gs.n);
    h.nt = static_cast<std::uint32_t>(gs.nt);
    h.t0 = 0.0;
    h.tf = gs.tf;
    h.levels = static_cast<std::uint32_t>(m);
    h.meta = level_meta(s, gs, m, opt.scheme, fam);
    h.meta.update(opt.extra_meta);
    if (opt.out_path.empty()) return SpaceTimeField::in_memory(h);
    std::string path = m == s.M ? opt.out_path : opt.out_path + ".level" + std::to_string(m);
    return SpaceTimeField::on_disk(path, h);
  };
  std::vector<std::string> temps;
  auto cleanup = [&](bool all) {
    std::error_code ec;
    for (auto& p : temps) std::filesystem::remove(p, ec);
    if (all && !opt.out_path.empty()) std::filesystem::remove(opt.out_path, ec);
  };
  BuildResult res{make(1), {}};
  try {
    LevelOptions lo{opt.scheme, 1.0, opt.quiet};
    res.levels.push_back(build_level(nullptr, s, 1, fam, res.field, lo));
    for (int m = 2; m <= s.M; ++m) {
      if (res.field.file_backed() && !opt.keep_levels) temps.push_back(res.field.path());
      SpaceTimeField next = make(m);
      res.levels.push_back(build_level(&res.field, s, m, fam, next, lo));
      if (opt.keep_levels) res.field.seal();
      res.field = std::move(next);
    }
    res.field.seal();
  } catch (...) {
    cleanup(true);
    throw;
  }
  cleanup(false);
  return res;
}

}  // namespace avlab::fieldgen
