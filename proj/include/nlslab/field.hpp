#pragma once

// Radial grids, complex radial profiles, norms and the localization
// functionals built from the smooth cutoff χ_R.

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlslab/error.hpp"
#include "nlslab/tridiag.hpp"

namespace nlslab {

using cplx = std::complex<double>;

/// Surface area of the unit sphere in R^N, 2π^{N/2}/Γ(N/2), with Γ(N/2)
/// evaluated in closed form for integer N.
inline double unit_sphere_area(int N) {
  if (N < 1) throw std::invalid_argument("unit_sphere_area: N must be positive");
  const double pi = std::numbers::pi;
  double gamma_half = 1.0;
  if (N % 2 == 0) {
    for (int k = 2; k < N / 2; ++k) gamma_half *= k;  // (N/2 - 1)!
  } else {
    gamma_half = std::sqrt(pi);  // Γ(1/2)
    for (int k = 1; k < N; k += 2) gamma_half *= k / 2.0;
  }
  return 2.0 * std::pow(pi, N / 2.0) / gamma_half;
}

/// Uniform radial grid r_j = j h, j = 0..J, on [0, R_max].
///
/// Quadrature weights are the exact volumes of the control shells
/// [r_j - h/2, r_j + h/2] (the ball of radius h/2 for j = 0, a half shell for
/// j = J). The discrete Laplacian below is self-adjoint for this inner
/// product and reduces to N u''(0) on the axis.
class RadialGrid {
 public:
  RadialGrid(int N, double R_max, int J) : RadialGrid(N, J, Spacing{R_max / J}) {}

  struct Spacing {
    double h;
  };

  RadialGrid(int N, int J, Spacing spacing) : N_(N), J_(J), h_(spacing.h), r_(J + 1), w_(J + 1), face_(J) {
    if (N < 1) throw std::invalid_argument("RadialGrid: N must be positive");
    if (J < 2) throw std::invalid_argument("RadialGrid: need at least 2 intervals");
    if (!(h_ > 0.0) || !std::isfinite(h_)) throw std::invalid_argument("RadialGrid: R_max must be positive");
    omega_ = unit_sphere_area(N);
    for (int j = 0; j <= J; ++j) r_[j] = j * h_;
    auto ball = [&](double rad) { return omega_ * std::pow(rad, N) / N; };
    w_[0] = ball(0.5 * h_);
    for (int j = 1; j < J; ++j) w_[j] = ball(r_[j] + 0.5 * h_) - ball(r_[j] - 0.5 * h_);
    w_[J] = ball(r_[J]) - ball(r_[J] - 0.5 * h_);
    for (int j = 0; j < J; ++j) face_[j] = omega_ * std::pow(r_[j] + 0.5 * h_, N - 1);
  }

  int N() const { return N_; }
  int J() const { return J_; }
  double h() const { return h_; }
  double R_max() const { return r_[J_]; }
  std::size_t size() const { return r_.size(); }
  double sphere_area() const { return omega_; }

  std::span<const double> r() const { return r_; }
  std::span<const double> w() const { return w_; }
  /// Area ω_N r_{j+1/2}^{N-1} of the face between nodes j and j+1.
  std::span<const double> face_area() const { return face_; }
  double face_radius(int j) const { return r_[j] + 0.5 * h_; }

  /// Index of the last node with r_j <= R.
  int index_at_or_below(double R) const {
    int j = static_cast<int>(std::floor(R / h_ * (1.0 + 1e-14)));
    return std::clamp(j, 0, J_);
  }

  friend bool operator==(const RadialGrid& a, const RadialGrid& b) {
    return a.N_ == b.N_ && a.J_ == b.J_ && a.h_ == b.h_;
  }

 private:
  int N_;
  int J_;
  double h_;
  double omega_ = 0.0;
  std::vector<double> r_, w_, face_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

inline GridPtr make_grid(int N, double R_max, int J) { return std::make_shared<const RadialGrid>(N, R_max, J); }

inline GridPtr make_grid_with_spacing(int N, double h, int J) {
  return std::make_shared<const RadialGrid>(N, J, RadialGrid::Spacing{h});
}

/// Complex samples of a radial function on a grid.
class RadialProfile {
 public:
  RadialProfile() = default;
  explicit RadialProfile(GridPtr grid) : grid_(std::move(grid)), u_(grid_->size(), cplx{}) {}
  RadialProfile(GridPtr grid, std::vector<cplx> values) : grid_(std::move(grid)), u_(std::move(values)) {
    if (u_.size() != grid_->size()) throw std::invalid_argument("RadialProfile: length does not match grid");
    for (const auto& z : u_)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw std::invalid_argument("RadialProfile: non-finite sample");
  }

  /// Samples f(r_j).
  template <class F>
  static RadialProfile from_function(GridPtr grid, F&& f) {
    std::vector<cplx> v(grid->size());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = cplx(f(grid->r()[j]));
    return RadialProfile(std::move(grid), std::move(v));
  }

  static RadialProfile from_real(GridPtr grid, std::span<const double> values) {
    std::vector<cplx> v(values.begin(), values.end());
    return RadialProfile(std::move(grid), std::move(v));
  }

  const RadialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::span<const cplx> values() const { return u_; }
  std::span<cplx> values() { return u_; }
  std::size_t size() const { return u_.size(); }
  cplx operator[](std::size_t j) const { return u_[j]; }
  cplx& operator[](std::size_t j) { return u_[j]; }

  bool all_finite() const {
    return std::all_of(u_.begin(), u_.end(),
                       [](const cplx& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
  }

  RadialProfile scaled(cplx c) const {
    RadialProfile out(*this);
    for (auto& z : out.u_) z *= c;
    return out;
  }

  std::vector<double> abs() const {
    std::vector<double> a(u_.size());
    for (std::size_t j = 0; j < a.size(); ++j) a[j] = std::abs(u_[j]);
    return a;
  }

  std::vector<double> real() const {
    std::vector<double> a(u_.size());
    for (std::size_t j = 0; j < a.size(); ++j) a[j] = u_[j].real();
    return a;
  }

 private:
  GridPtr grid_;
  std::vector<cplx> u_;
};

// ---------------------------------------------------------------------------
// Quadratures

/// Σ_j w_j g_j, the discrete ∫_{R^N} g dx.
inline double integrate(const RadialGrid& g, std::span<const double> values) {
  double s = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) s += g.w()[j] * values[j];
  return s;
}

inline double mass(const RadialProfile& u) {
  double s = 0.0;
  const auto w = u.grid().w();
  for (std::size_t j = 0; j < u.size(); ++j) s += w[j] * std::norm(u[j]);
  return s;
}

/// ∫|∂_r u|² with differences centered on the cell faces r_{j+1/2}. This is
/// exactly the quadratic form of the discrete Laplacian (summation by parts).
inline double grad_norm_sq(const RadialProfile& u) {
  const auto& g = u.grid();
  const double h = g.h();
  double s = 0.0;
  for (int j = 0; j < g.J(); ++j) s += g.face_area()[j] * std::norm(u[j + 1] - u[j]) / h;
  return s;
}

/// (Σ w_j |u_j|^q)^{1/q}.
inline double lp_norm(const RadialProfile& u, double q) {
  if (!(q >= 1.0)) throw std::invalid_argument("lp_norm: q must be >= 1");
  double s = 0.0;
  const auto w = u.grid().w();
  for (std::size_t j = 0; j < u.size(); ++j) s += w[j] * std::pow(std::abs(u[j]), q);
  return std::pow(s, 1.0 / q);
}

/// Σ w_j |u_j|^q, i.e. lp_norm^q without the root.
inline double lp_integral(const RadialProfile& u, double q) {
  double s = 0.0;
  const auto w = u.grid().w();
  for (std::size_t j = 0; j < u.size(); ++j) s += w[j] * std::pow(std::abs(u[j]), q);
  return s;
}

/// Ball-restricted Σ_{r_j <= R} w_j |u_j|^q.
inline double ball_lp_integral(const RadialProfile& u, double q, double R) {
  const int jmax = u.grid().index_at_or_below(R);
  double s = 0.0;
  const auto w = u.grid().w();
  for (int j = 0; j <= jmax; ++j) s += w[j] * std::pow(std::abs(u[j]), q);
  return s;
}

// ---------------------------------------------------------------------------
// Discrete radial Laplacian with u_J = 0 (Dirichlet) and the symmetry
// condition at r = 0. Acts on the J unknowns u_0 .. u_{J-1}.

inline Tridiagonal<double> radial_laplacian(const RadialGrid& g) {
  const int J = g.J();
  const double h = g.h();
  Tridiagonal<double> L(J);
  for (int j = 0; j < J; ++j) {
    const double c = 1.0 / (h * g.w()[j]);
    const double ap = g.face_area()[j];
    const double am = j > 0 ? g.face_area()[j - 1] : 0.0;
    L.diag[j] = -(ap + am) * c;
    L.upper[j] = j + 1 < J ? ap * c : 0.0;
    L.lower[j] = am * c;
  }
  return L;
}

// ---------------------------------------------------------------------------
// Smooth cutoff χ_R: 1 on r <= R/2, 0 on r >= R, quintic smoothstep between.

struct CutoffValues {
  double chi, dchi, d2chi;
};

inline CutoffValues cutoff_at(double r, double R) {
  if (r <= 0.5 * R) return {1.0, 0.0, 0.0};
  if (r >= R) return {0.0, 0.0, 0.0};
  const double x = (r - 0.5 * R) / (0.5 * R);
  const double k = 2.0 / R;
  const double S = x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
  const double dS = 30.0 * x * x * (1.0 - x) * (1.0 - x);
  const double d2S = 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
  return {1.0 - S, -dS * k, -d2S * k * k};
}

/// Sup of |S'| for the quintic smoothstep; ‖∇χ_R‖_∞ = (15/8)(2/R).
inline constexpr double kCutoffGradientConstant = 15.0 / 4.0;

inline RadialProfile cutoff_chi(const GridPtr& grid, double R) {
  if (!(R > 0.0)) throw std::invalid_argument("cutoff_chi: R must be positive");
  if (R > grid->R_max()) throw std::invalid_argument("cutoff_chi: R exceeds the grid extent");
  return RadialProfile::from_function(grid, [R](double r) { return cutoff_at(r, R).chi; });
}

/// Δχ_R at each node (radial formula, N χ''(0) on the axis).
inline std::vector<double> cutoff_laplacian(const RadialGrid& g, double R) {
  std::vector<double> out(g.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double r = g.r()[j];
    const auto c = cutoff_at(r, R);
    out[j] = r > 0.0 ? c.d2chi + (g.N() - 1) * c.dchi / r : g.N() * c.d2chi;
  }
  return out;
}

/// Measured sup_j |χ_R(r_{j+1}) - χ_R(r_j)| / h.
inline double cutoff_gradient_sup(const RadialGrid& g, double R) {
  double m = 0.0;
  for (int j = 0; j < g.J(); ++j) {
    const double d = (cutoff_at(g.r()[j + 1], R).chi - cutoff_at(g.r()[j], R).chi) / g.h();
    m = std::max(m, std::abs(d));
  }
  return m;
}

inline RadialProfile multiply(const RadialProfile& u, std::span<const double> f) {
  RadialProfile out(u);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] *= f[j];
  return out;
}

struct LocalizedMass {
  double smooth;  // ∫ χ_R |u|²
  double sharp;   // ∫_{|x| <= R} |u|²
};

inline LocalizedMass localized_mass(const RadialProfile& u, double R) {
  if (!(R > 0.0)) throw std::invalid_argument("localized_mass: R must be positive");
  LocalizedMass m{0.0, 0.0};
  const auto& g = u.grid();
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double r = g.r()[j];
    const double d = g.w()[j] * std::norm(u[j]);
    m.smooth += cutoff_at(r, R).chi * d;
    if (r <= R * (1.0 + 1e-14)) m.sharp += d;
  }
  return m;
}

struct SobolevMargin {
  double lhs;  // max_{r_j >= R} |u_j|
  double rhs;  // R^{-(N-1)/2} ‖u‖^{1/2} ‖∇u‖^{1/2}
};

/// Both sides of the radial Sobolev (Strauss) inequality. The sup is the
/// grid maximum, a lower bound of the true sup.
inline SobolevMargin radial_sobolev_margin(const RadialProfile& u, double R) {
  if (!(R > 0.0)) throw std::invalid_argument("radial_sobolev_margin: R must be positive");
  const auto& g = u.grid();
  double lhs = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j)
    if (g.r()[j] >= R * (1.0 - 1e-14)) lhs = std::max(lhs, std::abs(u[j]));
  const double rhs = std::pow(R, -(g.N() - 1) / 2.0) * std::pow(mass(u), 0.25) * std::pow(grad_norm_sq(u), 0.25);
  return {lhs, rhs};
}

/// |∫χ²|∇u|² − ∫|∇(χu)|² − ∫χΔχ|u|²| for the cutoff χ = χ_R.
inline double coercivity_identity_check(const RadialProfile& u, double R) {
  if (!(R > 0.0)) throw std::invalid_argument("coercivity_identity_check: R must be positive");
  const auto& g = u.grid();
  const double h = g.h();
  std::vector<double> chi(g.size());
  for (std::size_t j = 0; j < chi.size(); ++j) chi[j] = cutoff_at(g.r()[j], R).chi;
  const auto lap = cutoff_laplacian(g, R);
  double lhs = 0.0, grad_chiu = 0.0, pot = 0.0;
  for (int j = 0; j < g.J(); ++j) {
    const double chif = cutoff_at(g.face_radius(j), R).chi;
    lhs += g.face_area()[j] * chif * chif * std::norm(u[j + 1] - u[j]) / h;
    grad_chiu += g.face_area()[j] * std::norm(chi[j + 1] * u[j + 1] - chi[j] * u[j]) / h;
  }
  for (std::size_t j = 0; j < g.size(); ++j) pot += g.w()[j] * chi[j] * lap[j] * std::norm(u[j]);
  return std::abs(lhs - grad_chiu - pot);
}

}  // namespace nlslab
