#pragma once

// Equation parameters, criticality classification and the scalar threshold
// function of the below-threshold dichotomy.

#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "nlslab/error.hpp"

namespace nlslab {

/// Exact rational number with 64-bit numerator and denominator, kept in
/// lowest terms with a positive denominator.
class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t n) : num_(n), den_(1) {}  // NOLINT
  Rational(std::int64_t n, std::int64_t d) : num_(n), den_(d) {
    if (d == 0) throw std::invalid_argument("Rational: zero denominator");
    normalize();
  }

  /// Accepts "3", "-2", "2.5", "7/3".
  static Rational parse(const std::string& text) {
    std::size_t used = 0;
    auto slash = text.find('/');
    try {
      if (slash != std::string::npos) {
        std::int64_t n = std::stoll(text.substr(0, slash), &used);
        std::int64_t d = std::stoll(text.substr(slash + 1));
        return Rational(n, d);
      }
      auto dot = text.find('.');
      if (dot == std::string::npos) {
        std::int64_t n = std::stoll(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return Rational(n);
      }
      std::string whole = text.substr(0, dot);
      std::string frac = text.substr(dot + 1);
      if (frac.size() > 15) throw std::invalid_argument(text);
      std::int64_t scale = 1;
      for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
      bool neg = !whole.empty() && whole[0] == '-';
      std::int64_t w = whole.empty() || whole == "-" || whole == "+" ? 0 : std::stoll(whole);
      std::int64_t f = frac.empty() ? 0 : std::stoll(frac, &used);
      if (!frac.empty() && used != frac.size()) throw std::invalid_argument(text);
      std::int64_t n = std::llabs(w) * scale + f;
      return Rational(neg ? -n : n, scale);
    } catch (const std::logic_error&) {
      throw std::invalid_argument("not a rational number: '" + text + "'");
    }
  }

  constexpr std::int64_t num() const { return num_; }
  constexpr std::int64_t den() const { return den_; }
  double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  std::string str() const {
    return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
  }

  friend Rational operator+(Rational a, Rational b) {
    std::int64_t g = std::gcd(a.den_, b.den_);
    return Rational(a.num_ * (b.den_ / g) + b.num_ * (a.den_ / g), a.den_ / g * b.den_);
  }
  friend Rational operator-(Rational a) { return Rational(-a.num_, a.den_); }
  friend Rational operator-(Rational a, Rational b) { return a + (-b); }
  friend Rational operator*(Rational a, Rational b) {
    std::int64_t g1 = std::gcd(a.num_, b.den_);
    std::int64_t g2 = std::gcd(b.num_, a.den_);
    if (g1 == 0) g1 = 1;
    if (g2 == 0) g2 = 1;
    return Rational((a.num_ / g1) * (b.num_ / g2), (a.den_ / g2) * (b.den_ / g1));
  }
  friend Rational operator/(Rational a, Rational b) {
    if (b.num_ == 0) throw std::domain_error("Rational: division by zero");
    return a * Rational(b.den_, b.num_);
  }
  friend bool operator==(Rational a, Rational b) { return a.num_ == b.num_ && a.den_ == b.den_; }
  friend auto operator<=>(Rational a, Rational b) {
    // Cross-multiplication in 128 bits so comparisons never overflow.
    __int128 l = static_cast<__int128>(a.num_) * b.den_;
    __int128 r = static_cast<__int128>(b.num_) * a.den_;
    return l <=> r;
  }

 private:
  void normalize() {
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    std::int64_t g = std::gcd(num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

enum class EquationKind { NLS, GHARTREE };

inline std::string to_string(EquationKind k) { return k == EquationKind::NLS ? "NLS" : "GHARTREE"; }

inline EquationKind parse_equation_kind(const std::string& s) {
  if (s == "NLS" || s == "nls") return EquationKind::NLS;
  if (s == "GHARTREE" || s == "ghartree" || s == "gH" || s == "gh") return EquationKind::GHARTREE;
  throw ConfigError("unknown equation kind '" + s + "' (expected NLS or GHARTREE)");
}

/// Focusing NLS  i u_t + Δu + |u|^{p-1} u = 0  or generalized Hartree
/// i v_t + Δv + (|x|^{-(N-γ)} * |v|^p)|v|^{p-2} v = 0  on R^N.
struct EquationSpec {
  EquationKind kind = EquationKind::NLS;
  int N = 3;
  Rational p{3};
  Rational gamma{0};  // only meaningful for GHARTREE

  static EquationSpec nls(int N, Rational p) { return {EquationKind::NLS, N, p, Rational(0)}; }
  static EquationSpec ghartree(int N, Rational p, Rational gamma) {
    return {EquationKind::GHARTREE, N, p, gamma};
  }

  bool is_nls() const { return kind == EquationKind::NLS; }
  double pd() const { return p.value(); }
  double gd() const { return gamma.value(); }

  /// Throws InvalidSpec when the structural invariants fail.
  void validate() const {
    if (N < 3) throw InvalidSpec("dimension N must be at least 3 (got " + std::to_string(N) + ")");
    if (is_nls()) {
      if (p <= Rational(1)) throw InvalidSpec("NLS requires p > 1 (got " + p.str() + ")");
    } else {
      if (gamma <= Rational(0) || gamma >= Rational(N))
        throw InvalidSpec("GHARTREE requires 0 < gamma < N (got " + gamma.str() + ")");
      if (p <= Rational(1)) throw InvalidSpec("GHARTREE requires p > 1 (got " + p.str() + ")");
    }
  }

  friend bool operator==(const EquationSpec&, const EquationSpec&) = default;

  /// Flat key-value form: kind, N, p, gamma.
  std::map<std::string, std::string> to_kv() const {
    std::map<std::string, std::string> kv{{"kind", to_string(kind)}, {"N", std::to_string(N)}, {"p", p.str()}};
    if (!is_nls()) kv["gamma"] = gamma.str();
    return kv;
  }

  static EquationSpec from_kv(const std::map<std::string, std::string>& kv) {
    auto get = [&](const std::string& k) -> const std::string& {
      auto it = kv.find(k);
      if (it == kv.end()) throw ConfigError("equation section is missing key '" + k + "'");
      return it->second;
    };
    EquationSpec s;
    s.kind = parse_equation_kind(get("kind"));
    try {
      s.N = std::stoi(get("N"));
      s.p = Rational::parse(get("p"));
      if (!s.is_nls()) s.gamma = Rational::parse(get("gamma"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("equation section: ") + e.what());
    }
    return s;
  }
};

enum class Criticality { MASS_SUBCRITICAL, MASS_CRITICAL, INTERCRITICAL, ENERGY_CRITICAL, ENERGY_SUPERCRITICAL };

inline std::string to_string(Criticality c) {
  switch (c) {
    case Criticality::MASS_SUBCRITICAL: return "MASS_SUBCRITICAL";
    case Criticality::MASS_CRITICAL: return "MASS_CRITICAL";
    case Criticality::INTERCRITICAL: return "INTERCRITICAL";
    case Criticality::ENERGY_CRITICAL: return "ENERGY_CRITICAL";
    case Criticality::ENERGY_SUPERCRITICAL: return "ENERGY_SUPERCRITICAL";
  }
  return "?";
}

struct CriticalityReport {
  Rational s;
  Rational lower_p;  // mass-critical power
  Rational upper_p;  // energy-critical power
  Criticality classification = Criticality::INTERCRITICAL;
  bool admissible = false;
};

/// Scaling-critical Sobolev index s and the intercritical window in p.
/// Boundaries are classified exactly: s = 0 or s = 1 is never admissible.
inline CriticalityReport criticality(const EquationSpec& spec) {
  spec.validate();
  const Rational N(spec.N);
  const Rational one(1), two(2);
  CriticalityReport rep;
  if (spec.is_nls()) {
    rep.s = N / two - two / (spec.p - one);
    rep.lower_p = one + Rational(4) / N;
    rep.upper_p = one + Rational(4) / (N - two);
  } else {
    const Rational g2 = spec.gamma + two;
    rep.s = N / two - g2 / (two * (spec.p - one));
    rep.lower_p = one + g2 / N;
    rep.upper_p = one + g2 / (N - two);
  }
  const Rational zero(0);
  if (rep.s < zero) rep.classification = Criticality::MASS_SUBCRITICAL;
  else if (rep.s == zero) rep.classification = Criticality::MASS_CRITICAL;
  else if (rep.s < one) rep.classification = Criticality::INTERCRITICAL;
  else if (rep.s == one) rep.classification = Criticality::ENERGY_CRITICAL;
  else rep.classification = Criticality::ENERGY_SUPERCRITICAL;

  rep.admissible = rep.classification == Criticality::INTERCRITICAL;
  if (!spec.is_nls() && spec.p < two) rep.admissible = false;
  return rep;
}

/// Criticality index as a double, for use in numerical formulas.
inline double critical_index(const EquationSpec& spec) { return criticality(spec).s.value(); }

inline void require_admissible(const EquationSpec& spec) {
  auto rep = criticality(spec);
  if (!rep.admissible)
    throw InvalidSpec(to_string(spec.kind) + " N=" + std::to_string(spec.N) + " p=" + spec.p.str() +
                      (spec.is_nls() ? "" : " gamma=" + spec.gamma.str()) + " is not admissible (s=" + rep.s.str() +
                      ", " + to_string(rep.classification) + ")");
}

/// Threshold function f. With x the ratio of the scale-invariant gradient
/// quantity to its ground-state value, the energy condition reads f(x) < 1;
/// f has its unique positive critical point at x = 1 with f(1) = 1.
inline double threshold_function_f(const EquationSpec& spec, double x) {
  require_admissible(spec);
  if (!(x >= 0.0)) throw std::invalid_argument("threshold_function_f: x must be nonnegative");
  const double s = critical_index(spec);
  const double p = spec.pd();
  const double sp = s * (p - 1.0);
  if (spec.is_nls()) return spec.N / (2.0 * s) * x * x - 2.0 / sp * std::pow(x, sp + 2.0);
  return (sp + 1.0) / sp * x * x - 1.0 / sp * std::pow(x, 2.0 * sp + 2.0);
}

/// Closed-form derivative of threshold_function_f.
inline double threshold_function_df(const EquationSpec& spec, double x) {
  require_admissible(spec);
  const double s = critical_index(spec);
  const double sp = s * (spec.pd() - 1.0);
  if (spec.is_nls()) return spec.N / s * (1.0 - std::pow(x, sp)) * x;
  return (2.0 * sp + 2.0) / sp * (1.0 - std::pow(x, 2.0 * sp)) * x;
}

/// Coercivity constant δ₁ = N(p-1)/(2(p+1)) · δ/(1-δ) for the localized
/// virial lower bound (NLS). Only the NLS structure is required.
inline double coercivity_delta1(const EquationSpec& spec, double delta) {
  spec.validate();
  if (!spec.is_nls()) throw InvalidSpec("coercivity_delta1 is defined for NLS only");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("coercivity_delta1: delta must lie in (0,1)");
  const double p = spec.pd();
  return spec.N * (p - 1.0) / (2.0 * (p + 1.0)) * delta / (1.0 - delta);
}

}  // namespace nlslab
