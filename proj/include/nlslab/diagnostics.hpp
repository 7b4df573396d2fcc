#pragma once

// Post-processing of a sampled evolution: Morawetz identity residuals,
// time-averaged localized potential, evacuation detectors and the threshold
// classifier.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlslab/dynamics.hpp"
#include "nlslab/groundstate.hpp"

namespace nlslab {

// ---------------------------------------------------------------------------
// Morawetz identity

/// Per-sample discrepancy dM/dt - RHS at interior samples, with dM/dt the
/// centered difference (nonuniform spacing allowed). Entry i refers to sample i+1.
inline std::vector<double> identity_discrepancy(const DiagnosticsSeries& S, std::size_t k) {
  if (S.size() < 3) throw std::invalid_argument("identity residual needs at least 3 samples");
  const auto& M = S.morawetz.at(k);
  const auto& F = S.rhs.at(k);
  std::vector<double> d(S.size() - 2);
  for (std::size_t i = 1; i + 1 < S.size(); ++i) {
    const double h0 = S.t[i] - S.t[i - 1], h1 = S.t[i + 1] - S.t[i];
    // Second-order centered derivative on a nonuniform stencil.
    const double dM = (h0 * h0 * (M[i + 1] - M[i]) + h1 * h1 * (M[i] - M[i - 1])) / (h0 * h1 * (h0 + h1));
    d[i - 1] = dM - F[i];
  }
  return d;
}

enum class ResidualScale {
  TERMS,  // Σ|individual RHS terms|: well defined near stationary states
  NET,    // |RHS| itself
};

/// Relative L¹-in-time residual ∫|dM/dt - RHS| / ∫ scale over interior samples.
inline double identity_residual(const DiagnosticsSeries& S, std::size_t k, ResidualScale scale = ResidualScale::TERMS) {
  const auto d = identity_discrepancy(S, k);
  const auto& ref = scale == ResidualScale::TERMS ? S.rhs_scale.at(k) : S.rhs.at(k);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 1; i + 1 < S.size(); ++i) {
    const double dt = 0.5 * (S.t[i + 1] - S.t[i - 1]);
    num += std::abs(d[i - 1]) * dt;
    den += std::abs(ref[i]) * dt;
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

inline double identity_residual_at(const DiagnosticsSeries& S, double R) { return identity_residual(S, S.radius_index(R)); }

// ---------------------------------------------------------------------------
// Time averages and evacuation

/// (1/T) ∫_0^T (localized potential at radius R) dt, trapezoid in time.
inline double time_avg_local_potential(const DiagnosticsSeries& S, double R, double T) {
  if (S.size() == 0) throw std::invalid_argument("empty series");
  if (!(T > 0.0) || T > S.t.back() * (1.0 + 1e-12)) throw std::invalid_argument("time_avg_local_potential: T outside the series");
  const auto& q = S.locpot[S.radius_index(R)];
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < S.size() && S.t[i] < T; ++i) {
    const double t1 = std::min(S.t[i + 1], T);
    // Linear interpolation of the last partial interval.
    const double frac = (t1 - S.t[i]) / (S.t[i + 1] - S.t[i]);
    const double q1 = q[i] + frac * (q[i + 1] - q[i]);
    s += 0.5 * (q[i] + q1) * (t1 - S.t[i]);
  }
  return s / T;
}

struct EvacuationEvents {
  double R = 0.0;
  double eps = 0.0;
  /// First sample time after which the localized mass stays below eps; < 0 if none.
  double mass_evacuation_time = -1.0;
  /// Times at which the localized potential reaches a new running minimum,
  /// at least a factor (1 - min_drop) below the previous one.
  std::vector<double> decreasing_times;
  std::vector<double> decreasing_values;
};

inline std::vector<EvacuationEvents> detect_evacuation(const DiagnosticsSeries& S, const std::vector<double>& R_list,
                                                       double eps, double min_drop = 1e-2) {
  if (S.size() == 0) throw std::invalid_argument("empty series");
  std::vector<EvacuationEvents> out;
  for (double R : R_list) {
    const std::size_t k = S.radius_index(R);
    EvacuationEvents ev;
    ev.R = R;
    ev.eps = eps;
    const auto& m = S.locmass[k];
    // Walk backwards to the start of the final run below eps.
    std::size_t first = S.size();
    for (std::size_t i = S.size(); i-- > 0;) {
      if (!(m[i] < eps)) break;
      first = i;
    }
    if (first < S.size()) ev.mass_evacuation_time = S.t[first];
    const auto& q = S.locpot[k];
    double best = q[0];
    ev.decreasing_times.push_back(S.t[0]);
    ev.decreasing_values.push_back(q[0]);
    for (std::size_t i = 1; i < S.size(); ++i) {
      if (q[i] < best * (1.0 - min_drop)) {
        best = q[i];
        ev.decreasing_times.push_back(S.t[i]);
        ev.decreasing_values.push_back(q[i]);
      }
    }
    out.push_back(std::move(ev));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Threshold classifier

enum class Verdict { SCATTER_PREDICTED, OUTSIDE_THEOREM };

inline const char* to_string(Verdict v) { return v == Verdict::SCATTER_PREDICTED ? "SCATTER_PREDICTED" : "OUTSIDE_THEOREM"; }

struct ThresholdReport {
  double ME_product = 0.0;  // M^{1-s} E^s; NaN when E < 0
  double ME_ratio = 0.0;
  double grad_product = 0.0;  // ‖u‖^{1-s} ‖∇u‖^s
  double grad_ratio = 0.0;
  double energy = 0.0;
  bool energy_negative = false;  // ENERGY_NEGATIVE_NOTE
  Verdict verdict = Verdict::OUTSIDE_THEOREM;
};

/// Ratios equal to 1 within this tolerance count as the threshold itself.
inline constexpr double kThresholdTolerance = 1e-9;

inline ThresholdReport classify(const RadialProfile& u0, const EquationSpec& spec, const GroundState& gs) {
  if (!(spec == gs.spec)) throw InvalidSpec("classify: ground state belongs to a different equation");
  require_admissible(spec);
  const double s = criticality(spec).s.value();
  Nonlinearity nl(spec, u0.grid_ptr());
  ThresholdReport r;
  const double M = mass(u0), K = grad_norm_sq(u0);
  r.energy = nl.energy(u0);
  r.grad_product = std::pow(M, (1.0 - s) / 2.0) * std::pow(K, s / 2.0);
  r.grad_ratio = r.grad_product / gs.threshold_grad;
  if (r.energy < 0.0) {
    r.energy_negative = true;
    r.ME_product = r.ME_ratio = std::numeric_limits<double>::quiet_NaN();
    r.verdict = Verdict::OUTSIDE_THEOREM;
    return r;
  }
  r.ME_product = std::pow(M, 1.0 - s) * std::pow(r.energy, s);
  r.ME_ratio = r.ME_product / gs.threshold_ME;
  const double bar = 1.0 - kThresholdTolerance;
  r.verdict = (r.ME_ratio < bar && r.grad_ratio < bar) ? Verdict::SCATTER_PREDICTED : Verdict::OUTSIDE_THEOREM;
  return r;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json json_number(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

inline nlohmann::json to_json(const ThresholdReport& r) {
  nlohmann::json j;
  j["ME_product"] = json_number(r.ME_product);
  j["ME_ratio"] = json_number(r.ME_ratio);
  j["grad_product"] = r.grad_product;
  j["grad_ratio"] = r.grad_ratio;
  j["energy"] = r.energy;
  j["verdict"] = to_string(r.verdict);
  j["notes"] = nlohmann::json::array();
  if (r.energy_negative) j["notes"].push_back("ENERGY_NEGATIVE_NOTE");
  return j;
}

inline nlohmann::json to_json(const EvacuationEvents& e) {
  nlohmann::json j;
  j["R"] = e.R;
  j["eps"] = e.eps;
  j["mass_evacuation_time"] = e.mass_evacuation_time < 0.0 ? nlohmann::json(nullptr) : nlohmann::json(e.mass_evacuation_time);
  j["decreasing_times"] = e.decreasing_times;
  j["decreasing_values"] = e.decreasing_values;
  return j;
}

}  // namespace nlslab
