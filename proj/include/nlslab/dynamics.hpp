#pragma once

// Time evolution of  i u_t + Δu + N(u) = 0  on the radial grid.
// Strang splitting: half phase rotation u <- exp(i dt/2 V) u with the real
// multiplier V of N, a Crank–Nicolson step for u_t = iΔu - W u (W the
// optional absorbing layer), and a second half rotation. |u| is invariant
// under the rotation, so V computed after the linear step serves both the
// closing half of one step and the opening half of the next.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nlslab/error.hpp"
#include "nlslab/field.hpp"
#include "nlslab/morawetz.hpp"
#include "nlslab/nonlinearity.hpp"
#include "nlslab/profile_io.hpp"
#include "nlslab/tridiag.hpp"

namespace nlslab {

struct SimConfig {
  double dt = 5e-4;
  double t_end = 1.0;
  int output_every = 20;  // steps between diagnostic samples
  bool sponge_enabled = false;
  double sponge_width = 10.0;
  double sponge_strength = 5.0;
  bool linear = false;         // V ≡ 0
  double growth_limit = 1e3;   // abort when sup|u| exceeds this multiple of sup|u0|

  void validate(const RadialGrid& g) const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("sim: dt must be positive");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ConfigError("sim: t_end must be >= 0");
    if (output_every < 1) throw ConfigError("sim: output_every must be >= 1");
    if (sponge_enabled) {
      if (!(sponge_width > 0.0) || sponge_width >= g.R_max()) throw ConfigError("sim: sponge_width must lie in (0, R_max)");
      if (!(sponge_strength >= 0.0)) throw ConfigError("sim: sponge_strength must be >= 0");
    }
    if (!(growth_limit > 1.0)) throw ConfigError("sim: growth_limit must exceed 1");
  }

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_end / dt)); }
};

/// Quadratic ramp strength·((r - r_s)/width)² on r > r_s = R_max - width.
inline double sponge_profile(double r, double R_max, double width, double strength) {
  const double rs = R_max - width;
  if (r <= rs) return 0.0;
  const double x = (r - rs) / width;
  return strength * x * x;
}

struct EvolutionState {
  double t = 0.0;
  std::size_t step = 0;
  RadialProfile u;
};

/// Owns the factorized Crank–Nicolson system and the nonlinearity for one
/// (spec, grid, dt) triple. One stepper per evolution.
class Stepper {
 public:
  Stepper(const Nonlinearity& nl, const SimConfig& cfg) : nl_(nl), cfg_(cfg), g_(nl.grid_ptr()) {
    cfg.validate(*g_);
    const auto& g = *g_;
    const int J = g.J();
    W_nodes_.assign(g.size(), 0.0);
    W_faces_.assign(J, 0.0);
    if (cfg.sponge_enabled) {
      for (std::size_t j = 0; j < g.size(); ++j)
        W_nodes_[j] = sponge_profile(g.r()[j], g.R_max(), cfg.sponge_width, cfg.sponge_strength);
      for (int j = 0; j < J; ++j)
        W_faces_[j] = sponge_profile(g.face_radius(j), g.R_max(), cfg.sponge_width, cfg.sponge_strength);
    }
    const auto L = radial_laplacian(g);
    const cplx half(0.0, 0.5 * cfg.dt);
    Tridiagonal<cplx> lhs(J);
    rhs_ = Tridiagonal<cplx>(J);
    for (int j = 0; j < J; ++j) {
      const cplx a = half * L.diag[j] - 0.5 * cfg.dt * W_nodes_[j];
      lhs.diag[j] = 1.0 - a;
      rhs_.diag[j] = 1.0 + a;
      lhs.lower[j] = -half * L.lower[j];
      lhs.upper[j] = -half * L.upper[j];
      rhs_.lower[j] = half * L.lower[j];
      rhs_.upper[j] = half * L.upper[j];
    }
    solver_ = TridiagonalSolver<cplx>(lhs);
    work_.resize(J);
  }

  const Nonlinearity& nonlinearity() const { return nl_; }
  const SimConfig& config() const { return cfg_; }
  std::span<const double> sponge_nodes() const { return W_nodes_; }
  std::span<const double> sponge_faces() const { return W_faces_; }

  /// Crank–Nicolson step on the J unknowns; u_J stays 0.
  void linear_step(std::vector<cplx>& u) const {
    const int J = g_->J();
    rhs_.apply(std::span<const cplx>(u.data(), J), std::span<cplx>(work_));
    solver_.solve(std::span<cplx>(work_));
    std::copy(work_.begin(), work_.end(), u.begin());
    u[J] = 0.0;
  }

  void rotate(std::vector<cplx>& u, std::span<const double> V, double tau) const {
    for (std::size_t j = 0; j < u.size(); ++j) u[j] *= std::polar(1.0, tau * V[j]);
  }

  std::vector<double> multiplier(std::span<const cplx> u) const {
    if (cfg_.linear) return std::vector<double>(u.size(), 0.0);
    std::vector<double> m(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) m[j] = std::abs(u[j]);
    return nl_.multiplier(m);
  }

  /// One Strang step. V must be the multiplier of the incoming |u|; on return
  /// it holds the multiplier of the outgoing |u|.
  void step(std::vector<cplx>& u, std::vector<double>& V) const {
    const double tau = 0.5 * cfg_.dt;
    rotate(u, V, tau);
    linear_step(u);
    V = multiplier(u);
    rotate(u, V, tau);
  }

  void step(EvolutionState& s) const {
    std::vector<cplx> u(s.u.values().begin(), s.u.values().end());
    auto V = multiplier(u);
    step(u, V);
    s.u = RadialProfile(g_, std::move(u));
    s.t += cfg_.dt;
    ++s.step;
  }

 private:
  const Nonlinearity& nl_;
  SimConfig cfg_;
  GridPtr g_;
  std::vector<double> W_nodes_, W_faces_;
  Tridiagonal<cplx> rhs_;
  TridiagonalSolver<cplx> solver_;
  mutable std::vector<cplx> work_;
};

/// One step on a standalone state (builds the stepper each call).
inline EvolutionState step(const EvolutionState& state, const Nonlinearity& nl, const SimConfig& cfg) {
  Stepper st(nl, cfg);
  EvolutionState out = state;
  st.step(out);
  if (!out.u.all_finite()) throw NaNGuardError("non-finite field at step " + std::to_string(out.step), out.step);
  return out;
}

// ---------------------------------------------------------------------------
// Sampled diagnostics

struct DiagnosticsSeries {
  EquationSpec spec;
  bool linear = false;
  bool sponge = false;
  std::vector<double> radii;
  std::vector<double> t, mass, energy, grad_sq, potential;
  std::vector<double> decay;  // t^{N/2} sup|u|, linear mode only
  // Indexed [radius][sample].
  std::vector<std::vector<double>> morawetz, rhs, rhs_scale, locmass, locpot;

  std::size_t size() const { return t.size(); }

  std::size_t radius_index(double R) const {
    for (std::size_t k = 0; k < radii.size(); ++k)
      if (std::abs(radii[k] - R) <= 1e-12 * std::max(1.0, R)) return k;
    throw std::invalid_argument("radius " + std::to_string(R) + " was not sampled");
  }
};

/// Localized potential: ∫_{|x|<=R}|u|^{p+1} (NLS), or
/// (∫_{|x|<=R}|u|^{2Np/(N+γ)})^{(N+γ)/(Np)} (gH).
inline double local_potential(const RadialProfile& u, const EquationSpec& spec, double R) {
  const double p = spec.pd();
  if (spec.is_nls()) return ball_lp_integral(u, p + 1.0, R);
  const double N = spec.N, gamma = spec.gd();
  return std::pow(ball_lp_integral(u, 2.0 * N * p / (N + gamma), R), (N + gamma) / (N * p));
}

struct EvolutionOptions {
  std::vector<double> radii;      // Morawetz weights and localized quantities
  int snapshot_every = 0;         // in samples; 0 disables
  std::string snapshot_dir;
  std::string snapshot_trailer;   // metadata appended to each snapshot
  std::function<void(const EvolutionState&)> on_sample;
};

struct EvolutionResult {
  DiagnosticsSeries series;
  EvolutionState final_state;
  std::vector<std::string> snapshots;
  double boundary_flag_time = -1.0;  // first sample with outer-shell mass > 1e-3 of total (sponge off)
};

namespace detail {

/// Mass in the outer 10% of shells.
inline double boundary_mass(const RadialProfile& u) {
  const auto& g = u.grid();
  const int j0 = static_cast<int>(std::floor(0.9 * g.J()));
  double s = 0.0;
  for (std::size_t j = j0; j < u.size(); ++j) s += g.w()[j] * std::norm(u[j]);
  return s;
}

}  // namespace detail

/// Evolves u0 to cfg.t_end, sampling every cfg.output_every steps and at the end.
inline EvolutionResult evolve(const RadialProfile& u0, const Nonlinearity& nl, const SimConfig& cfg,
                              const EvolutionOptions& opts = {}) {
  const auto& spec = nl.spec();
  if (!cfg.linear) require_admissible(spec);
  if (u0.grid() != *nl.grid_ptr()) throw std::invalid_argument("evolve: u0 lives on a different grid");
  if (!u0.all_finite()) throw NaNGuardError("non-finite initial data", 0);
  Stepper st(nl, cfg);
  const auto& gp = nl.grid_ptr();
  const auto& g = *gp;

  std::vector<MorawetzWeight> weights;
  for (double R : opts.radii) weights.emplace_back(gp, R);

  EvolutionResult res;
  auto& S = res.series;
  S.spec = spec;
  S.linear = cfg.linear;
  S.sponge = cfg.sponge_enabled;
  S.radii = opts.radii;
  S.morawetz.resize(weights.size()), S.rhs.resize(weights.size()), S.rhs_scale.resize(weights.size());
  S.locmass.resize(weights.size()), S.locpot.resize(weights.size());
  if (opts.snapshot_every > 0) std::filesystem::create_directories(opts.snapshot_dir);

  double sup0 = 0.0;
  for (const auto& z : u0.values()) sup0 = std::max(sup0, std::abs(z));
  const double cap = cfg.growth_limit * std::max(sup0, 1e-300);

  auto sample = [&](const RadialProfile& u, double t, std::size_t step) {
    const double m = mass(u), k = grad_norm_sq(u);
    const double pot = cfg.linear ? 0.0 : nl.potential_term(u);
    S.t.push_back(t);
    S.mass.push_back(m);
    S.grad_sq.push_back(k);
    S.potential.push_back(pot);
    S.energy.push_back(0.5 * k - (cfg.linear ? 0.0 : nl.energy_coefficient() * pot));
    if (cfg.linear) {
      double sup = 0.0;
      for (const auto& z : u.values()) sup = std::max(sup, std::abs(z));
      S.decay.push_back(std::pow(t, 0.5 * g.N()) * sup);
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const auto& w = weights[i];
      S.morawetz[i].push_back(morawetz_functional(u, w));
      MorawetzTerms terms;
      if (cfg.linear)
        terms = morawetz_terms_linear(u, w);
      else if (spec.is_nls())
        terms = morawetz_terms_nls(u, w, spec);
      else
        terms = morawetz_terms_gh(u, w, spec, *nl.riesz());
      if (cfg.sponge_enabled) terms.truncation += morawetz_sponge_term(u, w, st.sponge_faces());
      terms.truncation += morawetz_wall_term(u, w);
      S.rhs[i].push_back(terms.total());
      S.rhs_scale[i].push_back(terms.scale());
      S.locmass[i].push_back(localized_mass(u, w.R()).sharp);
      S.locpot[i].push_back(local_potential(u, spec, w.R()));
    }
    if (!cfg.sponge_enabled && res.boundary_flag_time < 0.0 && detail::boundary_mass(u) > 1e-3 * m)
      res.boundary_flag_time = t;
    const std::size_t idx = S.t.size() - 1;
    if (opts.snapshot_every > 0 && idx % opts.snapshot_every == 0) {
      std::ostringstream name;
      name << "snap_" << std::setw(8) << std::setfill('0') << step << ".bin";
      const auto path = (std::filesystem::path(opts.snapshot_dir) / name.str()).string();
      write_profile_binary(u, path, opts.snapshot_trailer);
      res.snapshots.push_back(path);
    }
    if (opts.on_sample) opts.on_sample(EvolutionState{t, step, u});
  };

  std::vector<cplx> u(u0.values().begin(), u0.values().end());
  u.back() = 0.0;
  auto V = st.multiplier(u);
  const std::size_t n = cfg.steps();
  sample(RadialProfile(gp, u), 0.0, 0);
  for (std::size_t s = 1; s <= n; ++s) {
    st.step(u, V);
    double sup = 0.0;
    bool finite = true;
    for (const auto& z : u) {
      const double a = std::abs(z);
      finite = finite && std::isfinite(a);
      sup = std::max(sup, a);
    }
    if (!finite) throw NaNGuardError("non-finite field at step " + std::to_string(s), s);
    if (sup > cap) throw NaNGuardError("growth guard tripped at step " + std::to_string(s), s);
    if (s % cfg.output_every == 0 || s == n) sample(RadialProfile(gp, u), s * cfg.dt, s);
  }
  res.final_state = EvolutionState{n * cfg.dt, n, RadialProfile(gp, std::move(u))};
  return res;
}

/// Evolution with V ≡ 0; the series carries the decay column t^{N/2} sup|u|.
inline EvolutionResult linear_test_mode(const RadialProfile& u0, const Nonlinearity& nl, SimConfig cfg,
                                        const EvolutionOptions& opts = {}) {
  cfg.linear = true;
  return evolve(u0, nl, cfg, opts);
}

// ---------------------------------------------------------------------------
// CSV: t, mass, energy, grad_sq, potential, M_R*, rhs_R*, rhs_scale_R*, locmass_R*, locpot_R*, [decay]

inline void write_series_csv(const DiagnosticsSeries& S, std::ostream& os, const std::string& header_comment = "") {
  if (!header_comment.empty()) os << "# " << header_comment << "\n";
  auto tag = [](double R) {
    std::ostringstream s;
    s << R;
    return s.str();
  };
  os << "t,mass,energy,grad_sq,potential";
  for (const char* name : {"M_R", "rhs_R", "rhs_scale_R", "locmass_R", "locpot_R"})
    for (double R : S.radii) os << "," << name << tag(R);
  if (S.linear) os << ",decay";
  os << "\n" << std::setprecision(17);
  for (std::size_t i = 0; i < S.size(); ++i) {
    os << S.t[i] << "," << S.mass[i] << "," << S.energy[i] << "," << S.grad_sq[i] << "," << S.potential[i];
    for (const auto* col : {&S.morawetz, &S.rhs, &S.rhs_scale, &S.locmass, &S.locpot})
      for (const auto& series : *col) os << "," << series[i];
    if (S.linear) os << "," << S.decay[i];
    os << "\n";
  }
}

inline void write_series_csv(const DiagnosticsSeries& S, const std::string& path, const std::string& header_comment = "") {
  std::ofstream os(path);
  if (!os) throw Error("cannot write '" + path + "'");
  write_series_csv(S, os, header_comment);
}

/// Relative drift max_t |q(t)/q(0) - 1|; absolute when q(0) = 0.
inline double relative_drift(std::span<const double> q) {
  if (q.empty()) return 0.0;
  double d = 0.0;
  for (double x : q) d = std::max(d, q[0] != 0.0 ? std::abs(x / q[0] - 1.0) : std::abs(x));
  return d;
}

}  // namespace nlslab
