#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace nlslab {

/// Tridiagonal matrix in band storage: row j is
///   lower[j] x_{j-1} + diag[j] x_j + upper[j] x_{j+1},
/// with lower[0] and upper[n-1] ignored.
template <class T>
struct Tridiagonal {
  std::vector<T> lower, diag, upper;

  explicit Tridiagonal(std::size_t n = 0) : lower(n), diag(n), upper(n) {}
  std::size_t size() const { return diag.size(); }

  template <class V>
  void apply(std::span<const V> x, std::span<V> y) const {
    const std::size_t n = size();
    for (std::size_t j = 0; j < n; ++j) {
      V acc = diag[j] * x[j];
      if (j > 0) acc += lower[j] * x[j - 1];
      if (j + 1 < n) acc += upper[j] * x[j + 1];
      y[j] = acc;
    }
  }
};

/// Thomas-algorithm factorization, reusable across right-hand sides.
/// No pivoting: intended for diagonally dominant systems.
template <class T>
class TridiagonalSolver {
 public:
  TridiagonalSolver() = default;
  explicit TridiagonalSolver(const Tridiagonal<T>& m) : lower_(m.lower), cprime_(m.size()), denom_(m.size()) {
    const std::size_t n = m.size();
    if (n == 0) return;
    denom_[0] = m.diag[0];
    if (denom_[0] == T{}) throw std::runtime_error("tridiagonal solve: zero pivot");
    cprime_[0] = n > 1 ? m.upper[0] / denom_[0] : T{};
    for (std::size_t j = 1; j < n; ++j) {
      denom_[j] = m.diag[j] - m.lower[j] * cprime_[j - 1];
      if (denom_[j] == T{}) throw std::runtime_error("tridiagonal solve: zero pivot");
      cprime_[j] = j + 1 < n ? m.upper[j] / denom_[j] : T{};
    }
  }

  /// Solves in place: on entry x holds the right-hand side.
  template <class V>
  void solve(std::span<V> x) const {
    const std::size_t n = denom_.size();
    if (x.size() != n) throw std::invalid_argument("tridiagonal solve: size mismatch");
    if (n == 0) return;
    x[0] = x[0] / denom_[0];
    for (std::size_t j = 1; j < n; ++j) x[j] = (x[j] - lower_[j] * x[j - 1]) / denom_[j];
    for (std::size_t j = n - 1; j-- > 0;) x[j] -= cprime_[j] * x[j + 1];
  }

 private:
  std::vector<T> lower_, cprime_, denom_;
};

}  // namespace nlslab
