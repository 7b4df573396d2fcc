#pragma once

// Ground states of  ΔQ - Q + N(Q) = 0  (radial, positive, decaying), the
// Pohozaev checks and the sharp Gagliardo-Nirenberg constants.
//
// The stored Q is the fixed point of the discrete equation on the given grid
// (Petviashvili iteration), so its discrete residual is at roundoff level.
// Independent cross-checks: RK4 shooting on the radial ODE (NLS) and
// Nehari-normalized imaginary-time descent (gH).

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nlslab/eqspec.hpp"
#include "nlslab/error.hpp"
#include "nlslab/field.hpp"
#include "nlslab/nonlinearity.hpp"
#include "nlslab/profile_io.hpp"
#include "nlslab/tridiag.hpp"

namespace nlslab {

struct GroundStateOptions {
  int max_iterations = 5000;
  double tolerance = 1e-14;  // relative sup change between iterates
  double residual_tolerance = 1e-8;
  bool cross_check = true;
  double cross_check_radius = 10.0;
  double imaginary_time_step = 1.0;
  int imaginary_time_max_steps = 20000;
};

struct GroundState {
  EquationSpec spec;
  RadialProfile Q;
  double massQ = 0.0;
  double gradQ_sq = 0.0;
  double potentialQ = 0.0;  // ∫Q^{p+1} (NLS) or P(Q) (gH)
  double energyQ = 0.0;
  std::pair<double, double> pohozaev_residuals{0.0, 0.0};
  double sharp_constant = 0.0;
  double threshold_ME = 0.0;
  double threshold_grad = 0.0;
  double stationary_residual = 0.0;
  int iterations = 0;
  double cross_check_error = -1.0;  // sup-relative difference on r <= radius; -1 if not run
  std::string cross_check_method;
  std::vector<double> history;  // relative change per iteration
};

// ---------------------------------------------------------------------------
// Discrete stationary operator

namespace detail {

/// (LQ)_j on the J interior unknowns (Q_J = 0).
inline std::vector<double> apply_laplacian(const Tridiagonal<double>& L, std::span<const double> q) {
  const std::size_t J = L.size();
  std::vector<double> out(J);
  L.apply<double>(q.first(J), out);
  return out;
}

inline double weighted_dot(const RadialGrid& g, std::span<const double> a, std::span<const double> b, std::size_t n) {
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += g.w()[j] * a[j] * b[j];
  return s;
}

/// N(q) on the full grid for a real nonnegative profile.
inline std::vector<double> nonlinear_term(const Nonlinearity& nl, std::span<const double> q) {
  std::vector<double> m(q.size());
  for (std::size_t j = 0; j < q.size(); ++j) m[j] = std::abs(q[j]);
  const auto V = nl.multiplier(m);
  std::vector<double> out(q.size());
  for (std::size_t j = 0; j < q.size(); ++j) out[j] = V[j] * q[j];
  return out;
}

}  // namespace detail

/// Discrete L² norm (weights w) of ΔQ - Q + N(Q) over the interior nodes.
inline double stationary_residual(const RadialProfile& Q, const Nonlinearity& nl) {
  const auto& g = Q.grid();
  const auto q = Q.real();
  const auto L = radial_laplacian(g);
  const auto Lq = detail::apply_laplacian(L, q);
  const auto Nq = detail::nonlinear_term(nl, q);
  double s = 0.0;
  for (int j = 0; j < g.J(); ++j) {
    const double r = Lq[j] - q[j] + Nq[j];
    s += g.w()[j] * r * r;
  }
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Closed forms

/// Sharp constant of the Gagliardo-Nirenberg inequality (NLS) or its
/// convolution analogue (gH), from M[Q].
inline double sharp_constant_from_mass(const EquationSpec& spec, double massQ) {
  const double N = spec.N, p = spec.pd();
  if (spec.is_nls()) {
    return 2.0 * (p + 1.0) / (2.0 * N - (N - 2.0) * (p + 1.0)) *
           std::pow(N * (p - 1.0) / (2.0 * (p + 1.0) - N * (p - 1.0)), -N * (p - 1.0) / 4.0) *
           std::pow(massQ, -(p - 1.0) / 2.0);
  }
  const double g = spec.gd();
  const double a = N * (p - 1.0) - g;
  return 2.0 * p / a * std::pow((N + g - (N - 2.0) * p) / a, a / 2.0 - 1.0) * std::pow(massQ, -(p - 1.0));
}

inline double sharp_constant(const GroundState& gs) { return sharp_constant_from_mass(gs.spec, gs.massQ); }

/// Relative errors of the two Pohozaev consequences (scale-invariant
/// gradient product against the sharp constant; mass-energy product against
/// the gradient product).
inline std::pair<double, double> pohozaev_residuals(const EquationSpec& spec, double massQ, double gradQ_sq,
                                                    double energyQ) {
  const double s = critical_index(spec);
  const double N = spec.N, p = spec.pd();
  const double C = sharp_constant_from_mass(spec, massQ);
  const double lhs = std::pow(massQ, (1.0 - s) / 2.0) * std::pow(gradQ_sq, s / 2.0);
  double rhs1, factor2;
  if (spec.is_nls()) {
    rhs1 = std::pow(2.0 * (p + 1.0) / (N * (p - 1.0) * C), 1.0 / (p - 1.0));
    factor2 = std::pow(s / N, s);
  } else {
    const double sp = s * (p - 1.0);
    rhs1 = std::pow(p / (C * (sp + 1.0)), 1.0 / (2.0 * (p - 1.0)));
    factor2 = std::pow(sp / (2.0 * sp + 2.0), s);
  }
  const double me = std::pow(massQ, 1.0 - s) * std::pow(energyQ, s);
  return {lhs / rhs1 - 1.0, me / (factor2 * lhs * lhs) - 1.0};
}

inline std::pair<double, double> pohozaev_residuals(const GroundState& gs) {
  return pohozaev_residuals(gs.spec, gs.massQ, gs.gradQ_sq, gs.energyQ);
}

/// Fills every derived scalar of gs from gs.Q.
inline void populate_ground_state(GroundState& gs, const Nonlinearity& nl) {
  const double s = critical_index(gs.spec);
  gs.massQ = mass(gs.Q);
  gs.gradQ_sq = grad_norm_sq(gs.Q);
  gs.potentialQ = nl.potential_term(gs.Q);
  gs.energyQ = 0.5 * gs.gradQ_sq - nl.energy_coefficient() * gs.potentialQ;
  gs.sharp_constant = sharp_constant_from_mass(gs.spec, gs.massQ);
  gs.pohozaev_residuals = pohozaev_residuals(gs.spec, gs.massQ, gs.gradQ_sq, gs.energyQ);
  gs.threshold_ME = std::pow(gs.massQ, 1.0 - s) * std::pow(gs.energyQ, s);
  gs.threshold_grad = std::pow(gs.massQ, (1.0 - s) / 2.0) * std::pow(gs.gradQ_sq, s / 2.0);
  gs.stationary_residual = stationary_residual(gs.Q, nl);
}

// ---------------------------------------------------------------------------
// Petviashvili iteration

/// Solves (1 - L) Q_new = M^α N(Q) with the stabilizing factor
/// M = <Q,(1-L)Q> / <Q,N(Q)> and α = d/(d-1), d the degree of N. At the
/// fixed point M = 1, and the factor cancels the unstable direction along Q.
inline std::pair<std::vector<double>, std::vector<double>> petviashvili(const Nonlinearity& nl,
                                                                       std::vector<double> q,
                                                                       const GroundStateOptions& opt) {
  const auto& g = *nl.grid_ptr();
  const std::size_t J = g.J();
  const auto L = radial_laplacian(g);
  Tridiagonal<double> A(J);
  for (std::size_t j = 0; j < J; ++j) {
    A.lower[j] = -L.lower[j];
    A.diag[j] = 1.0 - L.diag[j];
    A.upper[j] = -L.upper[j];
  }
  const TridiagonalSolver<double> solver(A);
  const double d = nl.degree();
  const double alpha = d / (d - 1.0);
  std::vector<double> history;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const auto Nq = detail::nonlinear_term(nl, q);
    std::vector<double> Aq(J);
    A.apply<double>(std::span<const double>(q).first(J), Aq);
    const double num = detail::weighted_dot(g, q, Aq, J);
    const double den = detail::weighted_dot(g, q, Nq, J);
    if (!(den > 0.0) || !(num > 0.0)) throw ConvergenceError("fixed-point iteration: degenerate iterate", history);
    const double factor = std::pow(num / den, alpha);
    std::vector<double> next(q.size(), 0.0);
    for (std::size_t j = 0; j < J; ++j) next[j] = factor * Nq[j];
    solver.solve<double>(std::span<double>(next).first(J));
    double diff = 0.0, top = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      diff = std::max(diff, std::abs(next[j] - q[j]));
      top = std::max(top, std::abs(next[j]));
    }
    if (!std::isfinite(diff) || top == 0.0) throw ConvergenceError("fixed-point iteration diverged", history);
    q = std::move(next);
    const double rel = diff / top;
    history.push_back(rel);
    if (rel < opt.tolerance) break;
    if (rel < best * 0.999) {
      best = rel;
      since_best = 0;
    } else if (++since_best > 100) {
      break;  // stagnated at roundoff
    }
  }
  return {std::move(q), std::move(history)};
}

// ---------------------------------------------------------------------------
// Shooting (NLS)

struct ShootingResult {
  double Q0 = 0.0;
  std::vector<double> profile;  // on the grid; zero beyond the reliable range
  double reliable_radius = 0.0;
  int bisections = 0;
};

namespace detail {

enum class ShotOutcome { Overshoot, Undershoot };

/// RK4 for Q'' = -(N-1)/r Q' + Q - Q^p from r = h (series start), with step
/// h. Stops at a sign change of Q (overshoot) or of Q' (undershoot).
inline ShotOutcome shoot(int N, double p, double a, double h, int steps, std::vector<double>* out, double* stop_r) {
  auto f = [p](double q) { return q - std::pow(std::abs(q), p - 1.0) * q; };
  auto fp = [p](double q) { return 1.0 - p * std::pow(std::abs(q), p - 1.0); };
  const double c2 = f(a) / (2.0 * N);
  const double c4 = fp(a) * c2 / (4.0 * N + 8.0);
  double r = h;
  double q = a + c2 * h * h + c4 * h * h * h * h;
  double v = 2.0 * c2 * h + 4.0 * c4 * h * h * h;
  if (out) {
    out->assign(steps + 1, 0.0);
    (*out)[0] = a;
    (*out)[1] = q;
  }
  auto rhs = [&](double rr, double qq, double vv) { return -(N - 1.0) / rr * vv + f(qq); };
  for (int k = 1; k < steps; ++k) {
    const double k1q = v, k1v = rhs(r, q, v);
    const double k2q = v + 0.5 * h * k1v, k2v = rhs(r + 0.5 * h, q + 0.5 * h * k1q, v + 0.5 * h * k1v);
    const double k3q = v + 0.5 * h * k2v, k3v = rhs(r + 0.5 * h, q + 0.5 * h * k2q, v + 0.5 * h * k2v);
    const double k4q = v + h * k3v, k4v = rhs(r + h, q + h * k3q, v + h * k3v);
    q += h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q);
    v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
    r += h;
    if (q < 0.0) {
      if (stop_r) *stop_r = r;
      return ShotOutcome::Overshoot;
    }
    if (v > 0.0) {
      if (stop_r) *stop_r = r;
      return ShotOutcome::Undershoot;
    }
    if (out) (*out)[k + 1] = q;
  }
  if (stop_r) *stop_r = r;
  return ShotOutcome::Undershoot;
}

}  // namespace detail

/// Bisection on Q(0) for the NLS ground state. The profile is filled on the
/// grid up to the radius where the final shot leaves the separatrix.
inline ShootingResult shoot_nls_ground(const EquationSpec& spec, const RadialGrid& g, double bisection_tol = 1e-13) {
  require_admissible(spec);
  if (!spec.is_nls()) throw InvalidSpec("shooting is implemented for NLS");
  const int N = spec.N;
  const double p = spec.pd();
  const double h = g.h();
  const int steps = g.J();
  std::vector<double> hist;
  double lo = 1.0, hi = 2.0;
  while (detail::shoot(N, p, hi, h, steps, nullptr, nullptr) == detail::ShotOutcome::Undershoot) {
    hist.push_back(hi);
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) throw ConvergenceError("shooting: no overshooting Q(0) found", hist);
  }
  ShootingResult res;
  while (hi - lo > bisection_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (detail::shoot(N, p, mid, h, steps, nullptr, nullptr) == detail::ShotOutcome::Overshoot) hi = mid;
    else lo = mid;
    ++res.bisections;
  }
  res.Q0 = 0.5 * (lo + hi);
  // The lower end undershoots: its trajectory stays positive until it turns
  // up, which marks where it has left the ground state.
  double stop_r = 0.0;
  detail::shoot(N, p, lo, h, steps, &res.profile, &stop_r);
  res.reliable_radius = stop_r;
  const int jstop = std::min(steps, static_cast<int>(stop_r / h));
  for (int j = jstop; j <= steps; ++j) res.profile[j] = 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// Imaginary-time descent with Nehari normalization

/// Semi-implicit step (1 + τ(1-L)) u* = u + τ N(u), then u* is rescaled onto
/// the Nehari manifold <u,(1-L)u> = <u,N(u)>. Its fixed points solve the
/// stationary equation; the action decreases along the iteration.
inline std::pair<std::vector<double>, std::vector<double>> imaginary_time_ground(const Nonlinearity& nl,
                                                                                std::vector<double> q,
                                                                                const GroundStateOptions& opt) {
  const auto& g = *nl.grid_ptr();
  const std::size_t J = g.J();
  const double tau = opt.imaginary_time_step;
  const auto L = radial_laplacian(g);
  Tridiagonal<double> A(J), B(J);
  for (std::size_t j = 0; j < J; ++j) {
    A.lower[j] = -L.lower[j];
    A.diag[j] = 1.0 - L.diag[j];
    A.upper[j] = -L.upper[j];
    B.lower[j] = tau * A.lower[j];
    B.diag[j] = 1.0 + tau * A.diag[j];
    B.upper[j] = tau * A.upper[j];
  }
  const TridiagonalSolver<double> solver(B);
  const double d = nl.degree();
  std::vector<double> history;
  for (int it = 0; it < opt.imaginary_time_max_steps; ++it) {
    const auto Nq = detail::nonlinear_term(nl, q);
    std::vector<double> next(q.size(), 0.0);
    for (std::size_t j = 0; j < J; ++j) next[j] = q[j] + tau * Nq[j];
    solver.solve<double>(std::span<double>(next).first(J));
    std::vector<double> An(J);
    A.apply<double>(std::span<const double>(next).first(J), An);
    const double H = detail::weighted_dot(g, next, An, J);
    const double P = detail::weighted_dot(g, next, detail::nonlinear_term(nl, next), J);
    if (!(H > 0.0) || !(P > 0.0)) throw ConvergenceError("imaginary-time descent: degenerate iterate", history);
    const double lambda = std::pow(H / P, 1.0 / (d - 1.0));
    double diff = 0.0, top = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      next[j] *= lambda;
      diff = std::max(diff, std::abs(next[j] - q[j]));
      top = std::max(top, std::abs(next[j]));
    }
    q = std::move(next);
    history.push_back(diff / top);
    if (diff / top < opt.tolerance * 10.0) break;
  }
  return {std::move(q), std::move(history)};
}

// ---------------------------------------------------------------------------
// Drivers

namespace detail {

inline std::vector<double> initial_guess(const RadialGrid& g) {
  std::vector<double> q(g.size(), 0.0);
  for (int j = 0; j < g.J(); ++j) q[j] = 2.0 * std::exp(-0.5 * g.r()[j] * g.r()[j]);
  return q;
}

inline double sup_relative_difference(const RadialGrid& g, std::span<const double> a, std::span<const double> b,
                                      double radius) {
  const int jmax = g.index_at_or_below(radius);
  double diff = 0.0, top = 0.0;
  for (int j = 0; j <= jmax; ++j) {
    diff = std::max(diff, std::abs(a[j] - b[j]));
    top = std::max(top, std::abs(b[j]));
  }
  return diff / top;
}

inline GroundState finish_ground_state(const EquationSpec& spec, const Nonlinearity& nl, std::vector<double> q,
                                       std::vector<double> history, const GroundStateOptions& opt) {
  GroundState gs;
  gs.spec = spec;
  gs.iterations = static_cast<int>(history.size());
  gs.history = std::move(history);
  gs.Q = RadialProfile::from_real(nl.grid_ptr(), q);
  populate_ground_state(gs, nl);
  if (!(gs.stationary_residual < opt.residual_tolerance))
    throw ConvergenceError("ground state residual " + std::to_string(gs.stationary_residual) + " above tolerance",
                           gs.history);
  return gs;
}

}  // namespace detail

inline GroundState solve_nls_ground(const EquationSpec& spec, const GridPtr& grid, const GroundStateOptions& opt = {}) {
  require_admissible(spec);
  if (!spec.is_nls()) throw InvalidSpec("solve_nls_ground needs an NLS spec");
  Nonlinearity nl(spec, grid);
  auto [q, hist] = petviashvili(nl, detail::initial_guess(*grid), opt);
  auto gs = detail::finish_ground_state(spec, nl, std::move(q), std::move(hist), opt);
  if (opt.cross_check) {
    const auto shot = shoot_nls_ground(spec, *grid);
    const double radius = std::min(opt.cross_check_radius, shot.reliable_radius - 1.0);
    gs.cross_check_error = detail::sup_relative_difference(*grid, shot.profile, gs.Q.real(), radius);
    gs.cross_check_method = "shooting";
  }
  return gs;
}

inline GroundState solve_gh_ground(const EquationSpec& spec, const GridPtr& grid, const GroundStateOptions& opt = {},
                                   RieszOperator::Options kernel_opts = {}) {
  require_admissible(spec);
  if (spec.is_nls()) throw InvalidSpec("solve_gh_ground needs a GHARTREE spec");
  Nonlinearity nl(spec, grid, std::move(kernel_opts));
  auto [q, hist] = petviashvili(nl, detail::initial_guess(*grid), opt);
  auto gs = detail::finish_ground_state(spec, nl, std::move(q), std::move(hist), opt);
  if (opt.cross_check) {
    auto [q2, hist2] = imaginary_time_ground(nl, detail::initial_guess(*grid), opt);
    gs.cross_check_error = detail::sup_relative_difference(*grid, q2, gs.Q.real(), opt.cross_check_radius);
    gs.cross_check_method = "imaginary-time";
  }
  return gs;
}

inline GroundState solve_ground(const EquationSpec& spec, const GridPtr& grid, const GroundStateOptions& opt = {}) {
  return spec.is_nls() ? solve_nls_ground(spec, grid, opt) : solve_gh_ground(spec, grid, opt);
}

// ---------------------------------------------------------------------------
// Functionals against the ground state

/// Gagliardo-Nirenberg quotient; equals the sharp constant at Q.
inline double weinstein_ratio(const RadialProfile& u, const Nonlinearity& nl) {
  const auto& spec = nl.spec();
  const double M = mass(u);
  const double K = grad_norm_sq(u);
  if (M == 0.0) throw std::invalid_argument("weinstein_ratio: zero profile");
  const double N = spec.N, p = spec.pd();
  const double num = nl.potential_term(u);
  if (spec.is_nls())
    return num / (std::pow(K, N * (p - 1.0) / 4.0) * std::pow(M, (2.0 - (N - 2.0) * (p - 1.0) / 2.0) / 2.0));
  const double g = spec.gd();
  return num / (std::pow(K, (N * p - (N + g)) / 2.0) * std::pow(M, (N + g - (N - 2.0) * p) / 2.0));
}

inline double weinstein_ratio(const RadialProfile& u, const EquationSpec& spec) {
  return weinstein_ratio(u, Nonlinearity(spec, u.grid_ptr()));
}

/// Localized virial margin ‖∇(χ_R u)‖² - c ∫(potential term of χ_R u), with
/// c = N(p-1)/(2(p+1)) (NLS) or (s(p-1)+1)/p (gH).
inline double coercivity_margin(const RadialProfile& u, double R, const Nonlinearity& nl) {
  const auto& spec = nl.spec();
  const auto chi = cutoff_chi(u.grid_ptr(), R).real();
  const auto cu = multiply(u, chi);
  const double p = spec.pd();
  const double c = spec.is_nls() ? spec.N * (p - 1.0) / (2.0 * (p + 1.0))
                                 : (critical_index(spec) * (p - 1.0) + 1.0) / p;
  return grad_norm_sq(cu) - c * nl.potential_term(cu);
}

// ---------------------------------------------------------------------------
// Persistence: binary profile + JSON sidecar of the scalars

inline nlohmann::json to_json(const GroundState& gs) {
  nlohmann::json j;
  j["spec"] = gs.spec.to_kv();
  j["grid"] = {{"N", gs.Q.grid().N()}, {"J", gs.Q.grid().J()}, {"h", gs.Q.grid().h()}, {"R_max", gs.Q.grid().R_max()}};
  j["Q0"] = gs.Q[0].real();
  j["massQ"] = gs.massQ;
  j["gradQ_sq"] = gs.gradQ_sq;
  j["potentialQ"] = gs.potentialQ;
  j["energyQ"] = gs.energyQ;
  j["pohozaev_residuals"] = {gs.pohozaev_residuals.first, gs.pohozaev_residuals.second};
  j["sharp_constant"] = gs.sharp_constant;
  j["threshold_ME"] = gs.threshold_ME;
  j["threshold_grad"] = gs.threshold_grad;
  j["stationary_residual"] = gs.stationary_residual;
  j["iterations"] = gs.iterations;
  j["cross_check_method"] = gs.cross_check_method;
  j["cross_check_error"] = gs.cross_check_error;
  return j;
}

inline void save_ground_state(const GroundState& gs, const std::string& stem) {
  write_profile_binary(gs.Q, stem + ".bin");
  std::ofstream os(stem + ".json");
  if (!os) throw Error("cannot write '" + stem + ".json'");
  os << to_json(gs).dump(2) << "\n";
}

/// Loads a saved ground state; scalars are recomputed from the profile and
/// must agree with the sidecar.
inline GroundState load_ground_state(const std::string& stem) {
  std::ifstream is(stem + ".json");
  if (!is) throw Error("cannot read '" + stem + ".json'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(stem + ".json: " + e.what());
  }
  GroundState gs;
  gs.spec = EquationSpec::from_kv(j.at("spec").get<std::map<std::string, std::string>>());
  gs.Q = read_profile_binary(stem + ".bin");
  gs.iterations = j.value("iterations", 0);
  gs.cross_check_method = j.value("cross_check_method", "");
  gs.cross_check_error = j.value("cross_check_error", -1.0);
  Nonlinearity nl(gs.spec, gs.Q.grid_ptr());
  populate_ground_state(gs, nl);
  const double stored = j.at("massQ").get<double>();
  if (std::abs(stored - gs.massQ) > 1e-12 * stored) throw Error(stem + ": sidecar does not match the profile");
  return gs;
}

}  // namespace nlslab
