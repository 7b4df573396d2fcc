#pragma once

// Radial Morawetz weight a(r) and the quantities of the Morawetz identity:
//   M(t) = 2 Im ∫ ū ∇u·∇a,
//   dM/dt = ∫ -c_p V_loc Δa - |u|² Δ²a + 4 a''|∂_r u|²  (+ nonlocal term for gH).

#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "nlslab/eqspec.hpp"
#include "nlslab/field.hpp"
#include "nlslab/hartree.hpp"

namespace nlslab {

/// a = r² on r <= R/2, a = R r on r >= R, and between them the degree-7
/// polynomial matching a, a', a'', a''' at both junctions. Since a'(R/2) =
/// a'(R) = R while a''(R/2) = 2, no C² transition keeps a'' >= 0 throughout;
/// the minimum of a'' is reported instead.
class MorawetzWeight {
 public:
  MorawetzWeight(GridPtr grid, double R) : grid_(std::move(grid)), R_(R), r0_(R / 2), L_(R / 2) {
    if (!(R > 0.0) || R > grid_->R_max()) throw std::invalid_argument("MorawetzWeight: R must lie in (0, R_max]");
    // t = (r - R/2)/L; derivatives in t carry powers of L.
    const double L = L_;
    c_[0] = R * R / 4;
    c_[1] = L * R;
    c_[2] = L * L * 2.0 / 2.0;
    c_[3] = 0.0;
    // Remaining coefficients from the right-end conditions, written for
    // q(t) = Σ_{k>=4} c_k t^k: q^{(m)}(1) = target_m - (left polynomial)^{(m)}(1).
    const double target[4] = {R * R, L * R, 0.0, 0.0};
    double rhs[4];
    for (int m = 0; m < 4; ++m) {
      double left = 0.0;
      for (int k = m; k < 4; ++k) left += c_[k] * falling(k, m);
      rhs[m] = target[m] - left;
    }
    double A[4][5];
    for (int m = 0; m < 4; ++m) {
      for (int k = 4; k < 8; ++k) A[m][k - 4] = falling(k, m);
      A[m][4] = rhs[m];
    }
    for (int col = 0; col < 4; ++col) {
      int piv = col;
      for (int row = col + 1; row < 4; ++row)
        if (std::abs(A[row][col]) > std::abs(A[piv][col])) piv = row;
      for (int k = 0; k < 5; ++k) std::swap(A[col][k], A[piv][k]);
      for (int row = 0; row < 4; ++row) {
        if (row == col) continue;
        const double f = A[row][col] / A[col][col];
        for (int k = col; k < 5; ++k) A[row][k] -= f * A[col][k];
      }
    }
    for (int k = 0; k < 4; ++k) c_[4 + k] = A[k][4] / A[k][k];
    tabulate();
    verify();
  }

  const RadialGrid& grid() const { return *grid_; }
  double R() const { return R_; }

  /// Derivatives a^{(m)}(r), m = 0..4.
  double derivative(double r, int m) const {
    if (r <= r0_) {
      const double inner[3] = {r * r, 2 * r, 2.0};
      return m < 3 ? inner[m] : 0.0;
    }
    if (r >= R_) {
      if (m == 0) return R_ * r;
      if (m == 1) return R_;
      return 0.0;
    }
    const double t = (r - r0_) / L_;
    double s = 0.0;
    for (int k = 7; k >= m; --k) s = s * t + c_[k] * falling(k, m);
    return s / std::pow(L_, m);
  }

  double a(double r) const { return derivative(r, 0); }
  double da(double r) const { return derivative(r, 1); }
  double d2a(double r) const { return derivative(r, 2); }

  /// Δa = a'' + (N-1) a'/r.
  double laplacian(double r) const {
    const int N = grid_->N();
    if (r <= r0_) return 2.0 * N;
    return d2a(r) + (N - 1) * da(r) / r;
  }

  /// (Δa)' = a''' + (N-1)(a''/r - a'/r²); continuous since a is C³.
  double laplacian_derivative(double r) const {
    const int N = grid_->N();
    if (r <= r0_) return 0.0;
    return derivative(r, 3) + (N - 1) * (derivative(r, 2) / r - derivative(r, 1) / (r * r));
  }

  /// Δ²a = b'' + (N-1) b'/r with b = Δa, from the analytic derivatives.
  /// Jumps at r = R/2 and r = R, where a'''' does.
  double bilaplacian(double r) const {
    const int N = grid_->N();
    if (r <= r0_) return 0.0;
    const double a1 = derivative(r, 1), a2 = derivative(r, 2), a3 = derivative(r, 3), a4 = derivative(r, 4);
    const double b1 = a3 + (N - 1) * (a2 / r - a1 / (r * r));
    const double b2 = a4 + (N - 1) * (a3 / r - 2 * a2 / (r * r) + 2 * a1 / (r * r * r));
    return b2 + (N - 1) * b1 / r;
  }

  // Node arrays.
  std::span<const double> a_nodes() const { return a_; }
  std::span<const double> da_nodes() const { return da_; }
  std::span<const double> d2a_nodes() const { return d2a_; }
  std::span<const double> lap_nodes() const { return lap_; }
  std::span<const double> bilap_nodes() const { return bilap_; }
  // Face arrays, at r_{j+1/2}.
  std::span<const double> da_faces() const { return da_face_; }
  std::span<const double> d2a_faces() const { return d2a_face_; }
  std::span<const double> dlap_faces() const { return dlap_face_; }

  /// a'/r at the nodes (2 at the origin).
  double da_over_r(std::size_t j) const { return j == 0 ? 2.0 : da_[j] / grid_->r()[j]; }

  double min_d2a_transition() const { return min_d2a_; }
  double max_da() const { return max_da_; }
  /// Largest jump of a, a', a'' across r = R/2 and r = R.
  double junction_mismatch() const { return junction_; }

 private:
  static double falling(int k, int m) {
    double f = 1.0;
    for (int i = 0; i < m; ++i) f *= (k - i);
    return f;
  }

  double poly(double t, int m) const {
    double s = 0.0;
    for (int k = 7; k >= m; --k) s = s * t + c_[k] * falling(k, m);
    return s / std::pow(L_, m);
  }

  void tabulate() {
    const auto& g = *grid_;
    const std::size_t n = g.size();
    a_.resize(n), da_.resize(n), d2a_.resize(n), lap_.resize(n), bilap_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double r = g.r()[j];
      a_[j] = a(r), da_[j] = da(r), d2a_[j] = d2a(r), lap_[j] = laplacian(r), bilap_[j] = bilaplacian(r);
    }
    da_face_.resize(g.J()), d2a_face_.resize(g.J()), dlap_face_.resize(g.J());
    for (int j = 0; j < g.J(); ++j) {
      const double r = g.face_radius(j);
      da_face_[j] = da(r), d2a_face_[j] = d2a(r), dlap_face_[j] = laplacian_derivative(r);
    }
  }

  void verify() {
    const double R = R_;
    const double inner[3] = {r0_ * r0_, 2 * r0_, 2.0};
    const double outer[3] = {R * R, R, 0.0};
    junction_ = 0.0;
    for (int m = 0; m < 3; ++m) {
      const double scale = std::pow(R, 2 - m);
      junction_ = std::max(junction_, std::abs(poly(0.0, m) - inner[m]) / scale);
      junction_ = std::max(junction_, std::abs(poly(1.0, m) - outer[m]) / scale);
    }
    if (junction_ > 1e-10) throw std::logic_error("MorawetzWeight: junction mismatch");
    min_d2a_ = 2.0;
    double min_da = R;
    max_da_ = R;
    const int samples = 2000;
    for (int k = 0; k <= samples; ++k) {
      const double t = static_cast<double>(k) / samples;
      min_d2a_ = std::min(min_d2a_, poly(t, 2));
      min_da = std::min(min_da, poly(t, 1));
      max_da_ = std::max(max_da_, poly(t, 1));
    }
    if (!(min_da > 0.0)) throw std::logic_error("MorawetzWeight: a' not positive on the transition");
  }

  GridPtr grid_;
  double R_, r0_, L_;
  std::array<double, 8> c_{};
  std::vector<double> a_, da_, d2a_, lap_, bilap_, da_face_, d2a_face_, dlap_face_;
  double min_d2a_ = 0.0, max_da_ = 0.0, junction_ = 0.0;
};

inline MorawetzWeight build_weight(const GridPtr& grid, double R) { return MorawetzWeight(grid, R); }

namespace detail {

/// Σ_faces area·h · f_face · conj(ū_face) (u_{j+1} - u_j)/h with ū_face the face average.
inline cplx face_momentum(const RadialProfile& u, std::span<const double> f_face) {
  const auto& g = u.grid();
  cplx s = 0.0;
  for (int j = 0; j < g.J(); ++j) {
    const cplx mid = 0.5 * (u[j] + u[j + 1]);
    s += g.face_area()[j] * f_face[j] * std::conj(mid) * (u[j + 1] - u[j]);
  }
  return s;
}

}  // namespace detail

/// M = 2 Im ∫ ū ∂_r u a'(r).
inline double morawetz_functional(const RadialProfile& u, const MorawetzWeight& w) {
  return 2.0 * detail::face_momentum(u, w.da_faces()).imag();
}

/// Cauchy–Schwarz bound 2 max(a') ‖u‖ ‖∇u‖ on |M|.
inline double morawetz_bound(const RadialProfile& u, const MorawetzWeight& w) {
  return 2.0 * w.max_da() * std::sqrt(mass(u) * grad_norm_sq(u));
}

/// Contributions to dM/dt, kept apart so that residuals can be judged against
/// the size of the terms that cancel (at a stationary state the total is ~0).
struct MorawetzTerms {
  double kinetic = 0.0;     // 4 ∫ a'' |∂_r u|²
  double curvature = 0.0;   // -∫ |u|² Δ²a
  double potential = 0.0;   // local nonlinear term
  double nonlocal = 0.0;    // gH double integral
  double truncation = 0.0;  // absorbing layer and wall

  double total() const { return kinetic + curvature + potential + nonlocal + truncation; }
  double scale() const {
    return std::abs(kinetic) + std::abs(curvature) + std::abs(potential) + std::abs(nonlocal) + std::abs(truncation);
  }
};

/// Linear part of dM/dt: ∫ -|u|² Δ²a + 4 a'' |∂_r u|². The first term is
/// evaluated as ∫ ∂_r|u|² (Δa)' on the faces: Δ²a jumps at both junctions,
/// and node sampling of a jump costs O(h) with a large constant.
inline MorawetzTerms morawetz_terms_linear(const RadialProfile& u, const MorawetzWeight& w) {
  const auto& g = u.grid();
  MorawetzTerms t;
  for (int j = 0; j < g.J(); ++j) {
    const double fa = g.face_area()[j];
    t.curvature += fa * (std::norm(u[j + 1]) - std::norm(u[j])) * w.dlap_faces()[j];
    t.kinetic += 4.0 * fa * w.d2a_faces()[j] * std::norm(u[j + 1] - u[j]) / g.h();
  }
  return t;
}

inline double morawetz_rhs_linear(const RadialProfile& u, const MorawetzWeight& w) {
  return morawetz_terms_linear(u, w).total();
}

/// NLS: local term -(2(p-1)/(p+1)) ∫ |u|^{p+1} Δa.
inline MorawetzTerms morawetz_terms_nls(const RadialProfile& u, const MorawetzWeight& w, const EquationSpec& spec) {
  if (!spec.is_nls()) throw InvalidSpec("morawetz_rhs_nls needs an NLS spec");
  const double p = spec.pd();
  const auto& g = u.grid();
  auto t = morawetz_terms_linear(u, w);
  double pot = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) pot += g.w()[j] * std::pow(std::abs(u[j]), p + 1) * w.lap_nodes()[j];
  t.potential = -2.0 * (p - 1) / (p + 1) * pot;
  return t;
}

inline double morawetz_rhs_nls(const RadialProfile& u, const MorawetzWeight& w, const EquationSpec& spec) {
  return morawetz_terms_nls(u, w, spec).total();
}

/// gH: local term -4(1/2 - 1/p) ∫ (I_γ*|v|^p)|v|^p Δa, and
/// -(4(N-γ)/p) ∫ (a'/r) |v|^p ψ with ψ(x) = ∫ x·(x-y)|x-y|^{-(N-γ+2)}|v(y)|^p dy.
inline MorawetzTerms morawetz_terms_gh(const RadialProfile& v, const MorawetzWeight& w, const EquationSpec& spec,
                                       const RieszOperator& op) {
  if (spec.is_nls()) throw InvalidSpec("morawetz_rhs_gh needs a GHARTREE spec");
  const double p = spec.pd(), gamma = spec.gd();
  const int N = spec.N;
  const auto& g = v.grid();
  const auto rho = power_density(v, p);
  const auto phi = op.potential(rho);
  const auto psi = op.virial_field(rho);
  double local = 0.0, dbl = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    local += g.w()[j] * phi[j] * rho[j] * w.lap_nodes()[j];
    dbl += g.w()[j] * w.da_over_r(j) * rho[j] * psi[j];
  }
  auto t = morawetz_terms_linear(v, w);
  t.potential = -4.0 * (0.5 - 1.0 / p) * local;
  t.nonlocal = -4.0 * (N - gamma) / p * dbl;
  return t;
}

inline double morawetz_rhs_gh(const RadialProfile& v, const MorawetzWeight& w, const EquationSpec& spec,
                              const RieszOperator& op) {
  return morawetz_terms_gh(v, w, spec, op).total();
}

/// Contribution of an absorbing term -W u in the equation: -4 Im ∫ W a' ū ∂_r u.
inline double morawetz_sponge_term(const RadialProfile& u, const MorawetzWeight& w, std::span<const double> W_faces) {
  std::vector<double> f(W_faces.size());
  for (std::size_t j = 0; j < f.size(); ++j) f[j] = W_faces[j] * w.da_faces()[j];
  return -4.0 * detail::face_momentum(u, f).imag();
}

/// Wall term of the Dirichlet truncation at R_max: -2 a'(R_max) |∂_r u|² |S_{R_max}|.
inline double morawetz_wall_term(const RadialProfile& u, const MorawetzWeight& w) {
  const auto& g = u.grid();
  const int J = g.J();
  const double ur = std::abs(u[J] - u[J - 1]) / g.h();
  return -2.0 * w.da(g.R_max()) * g.sphere_area() * std::pow(g.R_max(), g.N() - 1) * ur * ur;
}

}  // namespace nlslab
