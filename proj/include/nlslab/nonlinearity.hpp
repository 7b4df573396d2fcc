#pragma once

// The focusing nonlinearity of either equation in multiplier form,
// N(u) = V[u] u, together with its potential term and the energy.
//   NLS: V = |u|^{p-1},               potential term ∫|u|^{p+1}, E = K/2 - ∫|u|^{p+1}/(p+1)
//   gH:  V = (I_γ * |u|^p)|u|^{p-2},  potential term P(u),       E = K/2 - P(u)/(2p)

#include <cmath>
#include <optional>
#include <vector>

#include "nlslab/eqspec.hpp"
#include "nlslab/field.hpp"
#include "nlslab/hartree.hpp"

namespace nlslab {

class Nonlinearity {
 public:
  Nonlinearity(const EquationSpec& spec, const GridPtr& grid, RieszOperator::Options opts = {})
      : spec_(spec), grid_(grid) {
    spec.validate();
    if (!spec.is_nls()) op_.emplace(grid, spec, std::move(opts));
  }

  const EquationSpec& spec() const { return spec_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const RieszOperator* riesz() const { return op_ ? &*op_ : nullptr; }

  /// Homogeneity degree d of N: N(λu) = λ^d N(u).
  double degree() const { return spec_.is_nls() ? spec_.pd() : 2.0 * spec_.pd() - 1.0; }

  /// Multiplier V with N(u) = V u, from the moduli |u_j|.
  std::vector<double> multiplier(std::span<const double> modulus) const {
    const double p = spec_.pd();
    std::vector<double> V(modulus.size());
    if (spec_.is_nls()) {
      for (std::size_t j = 0; j < V.size(); ++j) V[j] = std::pow(modulus[j], p - 1.0);
      return V;
    }
    const auto phi = convolved_density(modulus);
    for (std::size_t j = 0; j < V.size(); ++j)
      V[j] = modulus[j] > 0.0 ? phi[j] * std::pow(modulus[j], p - 2.0) : (p == 2.0 ? phi[j] : 0.0);
    return V;
  }

  std::vector<double> multiplier(const RadialProfile& u) const { return multiplier(u.abs()); }

  /// I_γ * |u|^p (gH only).
  std::vector<double> convolved_density(std::span<const double> modulus) const {
    std::vector<double> dens(modulus.size());
    for (std::size_t j = 0; j < dens.size(); ++j) dens[j] = std::pow(modulus[j], spec_.pd());
    return op_->potential(dens);
  }

  /// ∫|u|^{p+1} for NLS, P(u) for gH.
  double potential_term(const RadialProfile& u) const {
    if (spec_.is_nls()) return lp_integral(u, spec_.pd() + 1.0);
    const auto m = u.abs();
    const auto phi = convolved_density(m);
    double s = 0.0;
    for (std::size_t j = 0; j < m.size(); ++j) s += grid_->w()[j] * phi[j] * std::pow(m[j], spec_.pd());
    return s;
  }

  /// Coefficient c in E = K/2 - c·potential_term.
  double energy_coefficient() const { return spec_.is_nls() ? 1.0 / (spec_.pd() + 1.0) : 1.0 / (2.0 * spec_.pd()); }

  double energy(const RadialProfile& u) const {
    return 0.5 * grad_norm_sq(u) - energy_coefficient() * potential_term(u);
  }

 private:
  EquationSpec spec_;
  GridPtr grid_;
  std::optional<RieszOperator> op_;
};

}  // namespace nlslab
