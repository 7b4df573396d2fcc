#pragma once

// Radial Riesz convolution |x|^{-(N-γ)} * f, the potential functional P(v)
// and the radial reduction of the Morawetz double integral.
//
// Two routes are provided. For γ = 2 the Newton (shell theorem) formulas give
// O(J) cumulative integrals. For 1 < γ < N a dense kernel matrix is built by
// angular quadrature: with x = r e₁ and y = s ω,
//
//   k(r, s) = ∫_{S^{N-1}} |x - y|^{-(N-γ)} dω
//   c(r, s) = ∫_{S^{N-1}} x·(x - y) |x - y|^{-(N-γ+2)} dω
//
// so that (|x|^{-(N-γ)} * f)(r) = ∫ k(r,s) f(s) s^{N-1} ds and
// ∫∫ ∇a(x)·(x-y)|x-y|^{-(N-γ+2)} g(x) g(y) = ∫ g(x) (a'(r)/r) ψ(r) dx with
// ψ(r) = ∫ c(r,s) g(s) s^{N-1} ds.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/zeta.hpp>

#include "nlslab/eqspec.hpp"
#include "nlslab/error.hpp"
#include "nlslab/field.hpp"

namespace nlslab {

namespace detail {

/// Gauss-Legendre rule on [0, 1].
struct UnitRule {
  std::vector<double> x, w;
};

inline const UnitRule& unit_gauss_rule() {
  static const UnitRule rule = [] {
    using G = boost::math::quadrature::gauss<double, 15>;
    UnitRule r;
    const auto& a = G::abscissa();
    const auto& wt = G::weights();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == 0.0) {
        r.x.push_back(0.5);
        r.w.push_back(0.5 * wt[i]);
        continue;
      }
      r.x.push_back(0.5 * (1.0 - a[i]));
      r.w.push_back(0.5 * wt[i]);
      r.x.push_back(0.5 * (1.0 + a[i]));
      r.w.push_back(0.5 * wt[i]);
    }
    return r;
  }();
  return rule;
}

inline constexpr int kAngularRuleOrder = 15;

/// ∫_0^π F(θ) sin^{N-2}θ dθ where F may be sharply peaked (or integrably
/// singular) at θ = 0 on the angular scale theta0. The interval is split
/// dyadically away from 0; the innermost piece [0, θ₁] uses θ = θ₁ τ^m so
/// that a θ^{γ-2} endpoint singularity becomes polynomial in τ.
/// F receives (θ, 1 - cos θ) so callers can avoid cancellation.
template <class F>
double angular_integral(int N, double theta0, double m, F&& f) {
  const double pi = std::numbers::pi;
  const auto& rule = unit_gauss_rule();
  const double t1 = std::clamp(theta0, 1e-9, pi);
  auto weight = [N](double th) { return N == 2 ? 1.0 : std::pow(std::sin(th), N - 2); };
  auto one_minus_cos = [](double th) {
    const double s = std::sin(0.5 * th);
    return 2.0 * s * s;
  };
  double total = 0.0;
  for (std::size_t q = 0; q < rule.x.size(); ++q) {
    const double tau = rule.x[q];
    const double th = t1 * std::pow(tau, m);
    const double jac = t1 * m * std::pow(tau, m - 1.0);
    total += rule.w[q] * jac * f(th, one_minus_cos(th)) * weight(th);
  }
  double a = t1;
  while (a < pi) {
    const double b = std::min(2.0 * a, pi);
    double part = 0.0;
    for (std::size_t q = 0; q < rule.x.size(); ++q) {
      const double th = a + (b - a) * rule.x[q];
      part += rule.w[q] * f(th, one_minus_cos(th)) * weight(th);
    }
    total += (b - a) * part;
    a = b;
  }
  return total;
}

/// Exponent of the innermost substitution, chosen so that θ^{γ-2}dθ maps to
/// a nonnegative integer power of τ.
inline double substitution_exponent(double gamma) {
  const double g1 = gamma - 1.0;
  const double k = std::max(0.0, std::ceil(g1) - 1.0);
  return std::max(1.0, (k + 1.0) / g1);
}

inline double peak_scale(double r, double s) { return std::abs(r - s) / std::sqrt(r * s); }

}  // namespace detail

/// Unweighted angular Riesz kernel k(r, s) (see file comment).
inline double riesz_angular_kernel(int N, double gamma, double r, double s) {
  const double beta = N - gamma;
  const double omega = unit_sphere_area(N);
  if (r == 0.0 && s == 0.0) return std::numeric_limits<double>::infinity();
  if (r == 0.0 || s == 0.0) return omega * std::pow(std::max(r, s), -beta);
  const double d2 = (r - s) * (r - s);
  const double rs2 = 2.0 * r * s;
  const double area = unit_sphere_area(N - 1);
  const double m = detail::substitution_exponent(gamma);
  return area * detail::angular_integral(N, detail::peak_scale(r, s), m, [&](double, double omc) {
           return std::pow(d2 + rs2 * omc, -0.5 * beta);
         });
}

/// Unweighted angular virial kernel c(r, s) (see file comment). On r = s it
/// equals k(r, r)/2, the mean of the one-sided limits.
inline double virial_angular_kernel(int N, double gamma, double r, double s) {
  const double beta = N - gamma;
  if (r == 0.0) return 0.0;
  if (s == 0.0) return unit_sphere_area(N) * std::pow(r, -beta);
  const double d2 = (r - s) * (r - s);
  const double rs2 = 2.0 * r * s;
  const double area = unit_sphere_area(N - 1);
  const double m = detail::substitution_exponent(gamma);
  const double rr = r * (r - s);
  const double rs = r * s;
  return area * detail::angular_integral(N, detail::peak_scale(r, s), m, [&](double, double omc) {
           const double dist2 = d2 + rs2 * omc;
           return (rr + rs * omc) * std::pow(dist2, -0.5 * beta - 1.0);
         });
}

/// Dense (J+1)x(J+1) row-major matrix.
struct DenseMatrix {
  std::size_t n = 0;
  std::vector<double> a;

  explicit DenseMatrix(std::size_t size = 0) : n(size), a(size * size, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = a.data() + i * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
      y[i] = acc;
    }
    return y;
  }
};

namespace detail {

/// Fills rows in parallel; each entry depends only on (i, j), so the result
/// is independent of the thread count.
inline void parallel_rows(std::size_t n, const std::function<void(std::size_t)>& row) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned nt = static_cast<unsigned>(std::min<std::size_t>(hw, n));
  if (nt <= 1) {
    for (std::size_t i = 0; i < n; ++i) row(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < nt; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += nt) row(i);
    });
  for (auto& th : pool) th.join();
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

struct KernelCacheHeader {
  std::int32_t N;
  double gamma;
  std::int32_t J;
  double h;
  std::int32_t order;
};

inline std::filesystem::path cache_path(const std::string& dir, const std::string& tag, const RadialGrid& g,
                                        double gamma) {
  std::ostringstream key;
  key.precision(17);
  key << tag << ' ' << g.N() << ' ' << gamma << ' ' << g.J() << ' ' << g.h() << ' ' << kAngularRuleOrder;
  std::ostringstream name;
  name << tag << '_' << std::hex << fnv1a(key.str()) << ".bin";
  return std::filesystem::path(dir) / name.str();
}

inline bool load_cached(const std::filesystem::path& path, const RadialGrid& g, double gamma, DenseMatrix& out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return false;
  KernelCacheHeader hd{};
  is.read(reinterpret_cast<char*>(&hd.N), sizeof hd.N);
  is.read(reinterpret_cast<char*>(&hd.gamma), sizeof hd.gamma);
  is.read(reinterpret_cast<char*>(&hd.J), sizeof hd.J);
  is.read(reinterpret_cast<char*>(&hd.h), sizeof hd.h);
  is.read(reinterpret_cast<char*>(&hd.order), sizeof hd.order);
  if (!is || hd.N != g.N() || hd.gamma != gamma || hd.J != g.J() || hd.h != g.h() || hd.order != kAngularRuleOrder)
    return false;
  DenseMatrix m(g.size());
  is.read(reinterpret_cast<char*>(m.a.data()), static_cast<std::streamsize>(m.a.size() * sizeof(double)));
  if (!is) return false;
  out = std::move(m);
  return true;
}

inline void store_cached(const std::filesystem::path& path, const RadialGrid& g, double gamma, const DenseMatrix& m) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) return;
    const std::int32_t N = g.N(), J = g.J(), order = kAngularRuleOrder;
    const double h = g.h();
    os.write(reinterpret_cast<const char*>(&N), sizeof N);
    os.write(reinterpret_cast<const char*>(&gamma), sizeof gamma);
    os.write(reinterpret_cast<const char*>(&J), sizeof J);
    os.write(reinterpret_cast<const char*>(&h), sizeof h);
    os.write(reinterpret_cast<const char*>(&order), sizeof order);
    os.write(reinterpret_cast<const char*>(m.a.data()), static_cast<std::streamsize>(m.a.size() * sizeof(double)));
  }
  std::filesystem::rename(tmp, path);
}

inline void require_kernel_gamma(const EquationSpec& spec) {
  if (spec.is_nls()) throw InvalidSpec("Riesz kernels need a GHARTREE spec");
  if (!(spec.gamma > Rational(1)))
    throw InvalidSpec("kernel-matrix path requires gamma > 1 (got " + spec.gamma.str() + ")");
}

}  // namespace detail

/// Trapezoid weights ω_N s_j^{N-1} h (halved at s = R_max) for the radial
/// integration variable of a convolution. The integrands k(r,s) f(s) s^{N-1}
/// have a kink at s = r, where the trapezoid rule keeps O(h²) accuracy.
inline std::vector<double> trapezoid_weights(const RadialGrid& g) {
  std::vector<double> t(g.size());
  for (std::size_t j = 0; j < t.size(); ++j) t[j] = g.sphere_area() * std::pow(g.r()[j], g.N() - 1) * g.h();
  t.back() *= 0.5;
  return t;
}

/// Near s = r the angular kernel behaves like regular + C(r,s)|r - s|^{γ-1}
/// with C(r, r) r^{N-1} = ½ B((N-1)/2, (1-γ)/2) ω_{N-1}. The trapezoid rule
/// misses this cusp by 2ζ(1-γ) h^γ C r^{N-1} f(r) (generalized
/// Euler-Maclaurin); returns the diagonal weight that removes that error,
/// or 0 when γ is an odd integer (the cusp is then |r-s|^{γ-1} log|r-s|,
/// already O(h^γ) with γ >= 3).
inline double cusp_diagonal_correction(int N, double gamma, double h) {
  if (std::abs(gamma - std::round(gamma)) < 1e-12 && static_cast<long>(std::round(gamma)) % 2 == 1) return 0.0;
  using boost::math::tgamma;
  const double coef = 0.5 * tgamma(0.5 * (N - 1)) * tgamma(0.5 * (1.0 - gamma)) / tgamma(0.5 * (N - gamma)) *
                      unit_sphere_area(N - 1);
  return -2.0 * boost::math::zeta(1.0 - gamma) * std::pow(h, gamma) * coef;
}

/// Dense Riesz convolution kernel, premultiplied by quadrature weights:
/// K(i, j) = k(r_i, r_j) t_j / ω_N with t the trapezoid weights, so that
/// (K f)_i ≈ (|x|^{-(N-γ)} * f)(r_i).
struct RieszKernel {
  GridPtr grid;
  double gamma = 0.0;
  DenseMatrix K;

  /// k(r_i, r_j) recovered from the stored entry (0 < j, j != i).
  double unweighted(std::size_t i, std::size_t j) const {
    return K(i, j) * grid->sphere_area() / trapezoid_weights(*grid)[j];
  }
  std::vector<double> apply(std::span<const double> f) const { return K.apply(f); }
};

/// Builds the Riesz kernel matrix. When cache_dir is non-empty the matrix is
/// read from / written to a file keyed by a hash of (N, γ, J, h, rule order).
inline RieszKernel build_kernel(const GridPtr& grid, const EquationSpec& spec, const std::string& cache_dir = "") {
  detail::require_kernel_gamma(spec);
  if (grid->N() != spec.N) throw InvalidSpec("build_kernel: grid and spec dimensions differ");
  const double gamma = spec.gd();
  RieszKernel out{grid, gamma, DenseMatrix(grid->size())};
  std::filesystem::path path;
  if (!cache_dir.empty()) {
    path = detail::cache_path(cache_dir, "riesz", *grid, gamma);
    if (detail::load_cached(path, *grid, gamma, out.K)) return out;
  }
  const auto& g = *grid;
  const std::size_t n = g.size();
  const auto t = trapezoid_weights(g);
  // Symmetric unweighted kernel: fill the upper triangle, mirror afterwards.
  // The s = 0 column has zero weight, so k(0, 0) = ∞ never enters.
  detail::parallel_rows(n, [&](std::size_t i) {
    for (std::size_t j = std::max<std::size_t>(i, 1); j < n; ++j)
      out.K(i, j) = riesz_angular_kernel(g.N(), gamma, g.r()[i], g.r()[j]);
  });
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 1; j < i; ++j) out.K(i, j) = out.K(j, i);
  const double omega = g.sphere_area();
  for (std::size_t i = 0; i < n; ++i) {
    out.K(i, 0) = 0.0;
    for (std::size_t j = 1; j < n; ++j) out.K(i, j) *= t[j] / omega;
  }
  // Cusp corrections. On the axis the integrand is ω_N s^{γ-1} f(s), a
  // one-sided cusp that takes half the interior correction with C = ω_N.
  const double cusp = cusp_diagonal_correction(g.N(), gamma, g.h());
  for (std::size_t i = 1; i + 1 < n; ++i) out.K(i, i) += cusp;
  out.K(n - 1, n - 1) += 0.5 * cusp;
  if (cusp != 0.0) out.K(0, 0) = -boost::math::zeta(1.0 - gamma) * std::pow(g.h(), gamma) * omega;
  if (!path.empty()) detail::store_cached(path, g, gamma, out.K);
  return out;
}

/// Radial reduction of the Morawetz double-integral kernel, premultiplied by
/// quadrature weights: V(i, j) = c(r_i, r_j) t_j / ω_N. The separate angular
/// integrals of |x-y|^{-(N-γ+2)} and (x·y)|x-y|^{-(N-γ+2)} both diverge on
/// r = s for γ <= 3; only their combination r²A - B = c is tabulated.
struct MorawetzKernels {
  GridPtr grid;
  double gamma = 0.0;
  DenseMatrix virial;

  /// ψ_i = Σ_j V(i, j) g_j.
  std::vector<double> apply(std::span<const double> g) const { return virial.apply(g); }
};

inline MorawetzKernels morawetz_kernels(const GridPtr& grid, const EquationSpec& spec,
                                        const std::string& cache_dir = "") {
  detail::require_kernel_gamma(spec);
  if (grid->N() != spec.N) throw InvalidSpec("morawetz_kernels: grid and spec dimensions differ");
  const double gamma = spec.gd();
  MorawetzKernels out{grid, gamma, DenseMatrix(grid->size())};
  std::filesystem::path path;
  if (!cache_dir.empty()) {
    path = detail::cache_path(cache_dir, "virial", *grid, gamma);
    if (detail::load_cached(path, *grid, gamma, out.virial)) return out;
  }
  const auto& g = *grid;
  const std::size_t n = g.size();
  const double omega = g.sphere_area();
  const auto t = trapezoid_weights(g);
  detail::parallel_rows(n, [&](std::size_t i) {
    for (std::size_t j = 1; j < n; ++j) {
      const double c = (i == 0) ? 0.0 : virial_angular_kernel(g.N(), gamma, g.r()[i], g.r()[j]);
      out.virial(i, j) = c * t[j] / omega;
    }
  });
  // c = k/2 + (r² - s²)A/2 with A the angular integral of |x-y|^{-(N-γ+2)}.
  // The even half carries half the Riesz cusp; the odd half behaves like
  // sgn(r-s)|r-s|^{γ-2} φ(s), whose trapezoid error 2ζ(1-γ)h^γ φ'(r) needs a
  // centered difference of f.
  const double cusp = 0.5 * cusp_diagonal_correction(g.N(), gamma, g.h());
  if (cusp != 0.0) {
    using boost::math::tgamma;
    const int N = g.N();
    const double h = g.h();
    const double coefA = 0.5 * tgamma(0.5 * (N - 1)) * tgamma(0.5 * (3.0 - gamma)) / tgamma(0.5 * (N + 2.0 - gamma)) *
                         unit_sphere_area(N - 1);
    const double z = boost::math::zeta(1.0 - gamma) * std::pow(h, gamma) * coefA;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      out.virial(i, i) += cusp + z * N;
      out.virial(i, i + 1) += z * g.r()[i] / h;
      out.virial(i, i - 1) -= z * g.r()[i] / h;
    }
  }
  if (!path.empty()) detail::store_cached(path, g, gamma, out.virial);
  return out;
}

namespace detail {

/// Second-order finite-difference derivative of samples with spacing h.
inline std::vector<double> fd_derivative(std::span<const double> g, double h) {
  const std::size_t n = g.size();
  std::vector<double> d(n);
  d[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h);
  for (std::size_t j = 1; j + 1 < n; ++j) d[j] = (g[j + 1] - g[j - 1]) / (2.0 * h);
  d[n - 1] = (3.0 * g[n - 1] - 4.0 * g[n - 2] + g[n - 3]) / (2.0 * h);
  return d;
}

/// Cumulative ∫_0^{r_j} g by trapezoid plus the Euler-Maclaurin end
/// correction -h²/12 (g'(r_j) - g'(0)).
inline std::vector<double> cumulative_from_origin(std::span<const double> g, double h) {
  const auto d = fd_derivative(g, h);
  std::vector<double> out(g.size(), 0.0);
  double acc = 0.0;
  for (std::size_t j = 1; j < g.size(); ++j) {
    acc += 0.5 * h * (g[j - 1] + g[j]);
    out[j] = acc - h * h / 12.0 * (d[j] - d[0]);
  }
  return out;
}

/// Cumulative ∫_{r_j}^{R_max} g, same correction.
inline std::vector<double> cumulative_to_end(std::span<const double> g, double h) {
  const auto d = fd_derivative(g, h);
  const std::size_t n = g.size();
  std::vector<double> out(n, 0.0);
  double acc = 0.0;
  for (std::size_t j = n - 1; j-- > 0;) {
    acc += 0.5 * h * (g[j] + g[j + 1]);
    out[j] = acc - h * h / 12.0 * (d[n - 1] - d[j]);
  }
  return out;
}

}  // namespace detail

/// Newton potential (γ = 2) of a radial density by the shell theorem:
///   ω_N [ r^{-(N-2)} ∫_0^r f s^{N-1} ds + ∫_r^∞ f s ds ],
/// both integrals by cumulative trapezoid passes with end corrections.
inline std::vector<double> newton_potential(std::span<const double> f, const RadialGrid& g) {
  if (g.N() < 3) throw InvalidSpec("newton_potential requires N >= 3");
  if (f.size() != g.size()) throw std::invalid_argument("newton_potential: size mismatch");
  const auto r = g.r();
  std::vector<double> gin(g.size()), gout(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    gin[j] = f[j] * std::pow(r[j], g.N() - 1);
    gout[j] = f[j] * r[j];
  }
  const auto inner = detail::cumulative_from_origin(gin, g.h());
  const auto outer = detail::cumulative_to_end(gout, g.h());
  const double omega = g.sphere_area();
  std::vector<double> phi(g.size());
  phi[0] = omega * outer[0];
  for (std::size_t j = 1; j < g.size(); ++j) phi[j] = omega * (inner[j] * std::pow(r[j], 2 - g.N()) + outer[j]);
  return phi;
}

/// Newton potential as a symmetric shell sum,
///   φ_i = Σ_j w_j f_j max(r_i, r_j)^{-(N-2)},
/// with the diagonal replaced by the exact average of the kernel over the
/// control shell. The weighted matrix is symmetric, so φ is the exact
/// gradient of the discrete form Σ w f φ. Second order; used by the flow.
inline std::vector<double> newton_potential_shells(std::span<const double> f, const RadialGrid& g) {
  if (g.N() < 3) throw InvalidSpec("newton_potential requires N >= 3");
  if (f.size() != g.size()) throw std::invalid_argument("newton_potential: size mismatch");
  const int N = g.N();
  const auto r = g.r();
  const auto w = g.w();
  const std::size_t n = g.size();
  std::vector<double> outer(n, 0.0);  // Σ_{j>i} w_j f_j r_j^{2-N}
  for (std::size_t i = n - 1; i-- > 0;) outer[i] = outer[i + 1] + w[i + 1] * f[i + 1] * std::pow(r[i + 1], 2 - N);
  std::vector<double> phi(n);
  double inner = 0.0;  // Σ_{j<i} w_j f_j
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::max(0.0, r[i] - 0.5 * g.h());
    const double b = std::min(r[i] + 0.5 * g.h(), r[n - 1]);
    // ∫_a^b s^{N-1} max(r_i, s)^{2-N} ds
    double cell = 0.5 * (b * b - r[i] * r[i]);
    if (i > 0) cell += std::pow(r[i], 2 - N) * (std::pow(r[i], N) - std::pow(a, N)) / N;
    const double diag = g.sphere_area() * cell;
    phi[i] = (i > 0 ? inner * std::pow(r[i], 2 - N) : 0.0) + outer[i] + diag * f[i];
    inner += w[i] * f[i];
  }
  return phi;
}

inline RadialProfile newton_potential(const RadialProfile& f, const GridPtr& grid) {
  auto phi = newton_potential(std::span<const double>(f.real()), *grid);
  return RadialProfile::from_real(grid, phi);
}

/// ψ(r) = r^{-(N-2)} ∫_{|y|<r} f for γ = 2, the Newton counterpart of the
/// virial kernel (enclosed-mass field).
inline std::vector<double> newton_virial_field(std::span<const double> f, const RadialGrid& g) {
  const auto r = g.r();
  std::vector<double> gin(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) gin[j] = f[j] * std::pow(r[j], g.N() - 1);
  const auto inner = detail::cumulative_from_origin(gin, g.h());
  std::vector<double> psi(g.size(), 0.0);
  for (std::size_t j = 1; j < g.size(); ++j) psi[j] = g.sphere_area() * inner[j] * std::pow(r[j], 2 - g.N());
  return psi;
}

/// Convolution operator |x|^{-(N-γ)} * (·) for a GHARTREE spec, choosing the
/// exact O(J) Newton route at γ = 2 and the dense kernels otherwise. Dense
/// kernels are built on first use and shared by copies of the operator.
class RieszOperator {
 public:
  struct Options {
    bool force_dense = false;
    std::string cache_dir;
  };

  RieszOperator(GridPtr grid, const EquationSpec& spec) : RieszOperator(std::move(grid), spec, Options{}) {}
  RieszOperator(GridPtr grid, const EquationSpec& spec, Options opts)
      : grid_(std::move(grid)), spec_(spec), opts_(std::move(opts)), state_(std::make_shared<Lazy>()) {
    if (spec.is_nls()) throw InvalidSpec("RieszOperator needs a GHARTREE spec");
    if (grid_->N() != spec.N) throw InvalidSpec("RieszOperator: grid and spec dimensions differ");
    newton_ = spec.gamma == Rational(2) && !opts_.force_dense;
    if (!newton_) detail::require_kernel_gamma(spec);
  }

  bool uses_newton() const { return newton_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const EquationSpec& spec() const { return spec_; }

  std::vector<double> potential(std::span<const double> density) const {
    if (newton_) return newton_potential_shells(density, *grid_);
    return kernel().apply(density);
  }

  std::vector<double> virial_field(std::span<const double> density) const {
    if (newton_) return newton_virial_field(density, *grid_);
    return virial_kernels().apply(density);
  }

  const RieszKernel& kernel() const {
    std::call_once(state_->k_once, [&] { state_->k = std::make_unique<RieszKernel>(build_kernel(grid_, spec_, opts_.cache_dir)); });
    return *state_->k;
  }

  const MorawetzKernels& virial_kernels() const {
    std::call_once(state_->v_once,
                   [&] { state_->v = std::make_unique<MorawetzKernels>(morawetz_kernels(grid_, spec_, opts_.cache_dir)); });
    return *state_->v;
  }

 private:
  struct Lazy {
    std::once_flag k_once, v_once;
    std::unique_ptr<RieszKernel> k;
    std::unique_ptr<MorawetzKernels> v;
  };

  GridPtr grid_;
  EquationSpec spec_;
  Options opts_;
  bool newton_ = false;
  std::shared_ptr<Lazy> state_;
};

/// |v_j|^p.
inline std::vector<double> power_density(const RadialProfile& v, double p) {
  std::vector<double> d(v.size());
  for (std::size_t j = 0; j < d.size(); ++j) d[j] = std::pow(std::abs(v[j]), p);
  return d;
}

/// P(v) = ∫ (|x|^{-(N-γ)} * |v|^p) |v|^p dx.
inline double potential_functional_P(const RadialProfile& v, const EquationSpec& spec, const RieszOperator& op) {
  require_admissible(spec);
  const auto dens = power_density(v, spec.pd());
  const auto phi = op.potential(dens);
  double s = 0.0;
  for (std::size_t j = 0; j < dens.size(); ++j) s += v.grid().w()[j] * phi[j] * dens[j];
  return s;
}

}  // namespace nlslab
