#pragma once

// Hamiltonians of the three-optical-mode / one-mechanical-mode chain at every
// level of approximation: lab-frame, supermode interaction picture (RWA and
// counter-rotating), effective two-phonon with Kerr terms, and the pure
// two-phonon exchange.
//
// User-facing frequencies are ordinary frequencies in Hz. Operator entries,
// term amplitudes and eigenvalues are angular (rad/s); the conversion happens
// only through to_angular().

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "catres/errors.hpp"
#include "catres/hilbert.hpp"

namespace catres::model {

using hilbert::ModeLayout;
using hilbert::OperatorMatrix;

inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline double to_angular(double hz) { return two_pi * hz; }

namespace labels {
inline const std::string a1 = "a1";
inline const std::string a2 = "a2";
inline const std::string a3 = "a3";
inline const std::string plus = "a+";
inline const std::string zero = "a0";
inline const std::string minus = "a-";
inline const std::string mech = "b";
}  // namespace labels

inline ModeLayout full_layout(int optical_dim, int mech_dim) {
  using hilbert::Role;
  return ModeLayout({{labels::a1, optical_dim, Role::optical},
                     {labels::a2, optical_dim, Role::optical},
                     {labels::a3, optical_dim, Role::optical},
                     {labels::mech, mech_dim, Role::mechanical}});
}

inline ModeLayout supermode_layout(int optical_dim, int mech_dim) {
  using hilbert::Role;
  return ModeLayout({{labels::plus, optical_dim, Role::optical},
                     {labels::zero, optical_dim, Role::optical},
                     {labels::minus, optical_dim, Role::optical},
                     {labels::mech, mech_dim, Role::mechanical}});
}

inline ModeLayout effective_layout(int optical_dim, int mech_dim) {
  using hilbert::Role;
  return ModeLayout({{labels::plus, optical_dim, Role::optical},
                     {labels::minus, optical_dim, Role::optical},
                     {labels::mech, mech_dim, Role::mechanical}});
}

/// Physical inputs. Frequencies and rates in Hz.
struct SystemParams {
  double omega1 = 193.4e12;
  double omega2 = 193.4e12 - 1.0e7;
  double omega3 = 193.4e12;
  double mu = 0.0;
  double g0 = 1.0e6;
  double omega_m = 5.0e9;
  double kappa = 0.0;
  double gamma = 0.0;
  std::optional<double> n_th;
  std::optional<double> temperature;
  Complex alpha{3.0, 0.0};
  int n_photons = 1;
  bool allow_omega3_mismatch = false;

  /// (omega1 - omega2) / 2
  double delta() const { return 0.5 * (omega1 - omega2); }

  void validate() const {
    if (omega3 != omega1 && !allow_omega3_mismatch) {
      throw ConfigError("omega3 must equal omega1 (set allow_omega3_mismatch to override)");
    }
    if (!(mu >= 0.0)) throw ConfigError("mu must be non-negative");
    if (!(g0 >= 0.0)) throw ConfigError("g0 must be non-negative");
    if (!(omega_m > 0.0)) throw ConfigError("omega_m must be positive");
    if (!(kappa >= 0.0)) throw ConfigError("kappa must be non-negative");
    if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
    if (n_th && !(*n_th >= 0.0)) throw ConfigError("n_th must be non-negative");
    if (temperature && !(*temperature > 0.0)) throw ConfigError("temperature must be positive");
    if (n_photons < 0) throw ConfigError("n_photons must be non-negative");
  }

  /// Violated inequalities of g0 << |delta| << omega_m, as readable strings.
  std::vector<std::string> regime_violations(double min_delta_over_g0 = 5.0,
                                             double min_omega_m_over_delta = 100.0) const {
    std::vector<std::string> out;
    const double d = std::abs(delta());
    if (d < min_delta_over_g0 * g0) {
      out.push_back("|delta| >= " + std::to_string(min_delta_over_g0) + "*g0 violated (|delta| = " +
                    std::to_string(d) + " Hz, g0 = " + std::to_string(g0) + " Hz)");
    }
    if (omega_m < min_omega_m_over_delta * d) {
      out.push_back("omega_m >= " + std::to_string(min_omega_m_over_delta) +
                    "*|delta| violated (omega_m = " + std::to_string(omega_m) +
                    " Hz, |delta| = " + std::to_string(d) + " Hz)");
    }
    return out;
  }

  /// Places the supermodes so that omega+ - omega- - 2 omega_m equals
  /// two_phonon_detuning, with (omega1 - omega2)/2 = delta.
  static SystemParams two_phonon_design(double g0, double delta, double omega_m,
                                        double two_phonon_detuning, double omega1 = 193.4e12) {
    SystemParams p;
    p.g0 = g0;
    p.omega_m = omega_m;
    p.omega1 = omega1;
    p.omega3 = omega1;
    p.omega2 = omega1 - 2.0 * delta;
    const double splitting = 2.0 * omega_m + two_phonon_detuning;
    const double d = p.omega1 - p.omega2;
    if (!(splitting > std::abs(d))) {
      throw ConfigError("two-phonon design needs omega+ - omega- > |omega1 - omega2|");
    }
    p.mu = std::sqrt((splitting - d) * (splitting + d) / 8.0);
    return p;
  }
};

/// Everything the supermode transformation defines. Frequencies in Hz.
struct SupermodeData {
  Eigen::Matrix3d M = Eigen::Matrix3d::Identity();
  double omega_plus = 0.0;
  double omega_zero = 0.0;
  double omega_minus = 0.0;
  double Delta = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double g1 = 0.0;
  double g2 = 0.0;
  double delta = 0.0;
  // carried along so the interaction picture can be rebuilt from this alone
  double g0 = 0.0;
  double omega_m = 0.0;

  /// omega+ - omega- - 2 omega_m
  double two_phonon_detuning() const { return delta1 + delta2; }

  /// Supermode frequency differences computed without cancellation.
  double plus_minus_zero() const { return delta1 + omega_m; }
  double zero_minus_minus() const { return delta2 + omega_m; }
};

inline SupermodeData supermode_transform(const SystemParams& p) {
  p.validate();
  if (p.mu == 0.0) throw ConfigError("mu = 0 makes the supermode transformation degenerate");

  SupermodeData s;
  const double d = p.omega1 - p.omega2;
  const double mu2 = p.mu * p.mu;
  s.Delta = std::sqrt(8.0 * mu2 + d * d);
  // Delta -/+ d, each from whichever form avoids cancellation.
  const double delta_minus_d = d > 0.0 ? 8.0 * mu2 / (s.Delta + d) : s.Delta - d;
  const double delta_plus_d = d < 0.0 ? 8.0 * mu2 / (s.Delta - d) : s.Delta + d;

  const double r = 1.0 / std::sqrt(2.0);
  const double outer_plus = std::sqrt(2.0) * p.mu / std::sqrt(s.Delta * delta_minus_d);
  const double outer_minus = std::sqrt(2.0) * p.mu / std::sqrt(s.Delta * delta_plus_d);
  s.M << outer_plus, r * std::sqrt(delta_minus_d / s.Delta), outer_plus,  //
      -r, 0.0, r,                                                         //
      outer_minus, -r * std::sqrt(delta_plus_d / s.Delta), outer_minus;

  s.omega_plus = 0.5 * (p.omega1 + p.omega2 + s.Delta);
  s.omega_minus = 0.5 * (p.omega1 + p.omega2 - s.Delta);
  s.omega_zero = p.omega1;
  s.delta = p.delta();
  s.delta1 = 0.5 * delta_minus_d - p.omega_m;
  s.delta2 = 0.5 * delta_plus_d - p.omega_m;
  // a1 = sum_j M(j,0) a_j, so -g0 a1^dag a1 couples a_j^dag a_k with -g0 M(j,0) M(k,0).
  s.g1 = -p.g0 * s.M(1, 0) * s.M(0, 0);
  s.g2 = -p.g0 * s.M(2, 0) * s.M(1, 0);
  s.g0 = p.g0;
  s.omega_m = p.omega_m;
  return s;
}

/// Problems with the g1 ~ g2 ~ g0/(2 sqrt 2) and delta2 ~ -delta1 ~ delta approximations.
inline std::vector<std::string> supermode_approximation_issues(const SupermodeData& s,
                                                               double coupling_tol = 0.05,
                                                               double detuning_tol = 0.10) {
  std::vector<std::string> out;
  const double nominal = s.g0 / (2.0 * std::sqrt(2.0));
  for (auto [name, g] : {std::pair{"g1", s.g1}, std::pair{"g2", s.g2}}) {
    if (std::abs(g - nominal) > coupling_tol * nominal) {
      out.push_back(std::string(name) + " = " + std::to_string(g) + " Hz is not within " +
                    std::to_string(coupling_tol * 100) + "% of g0/(2 sqrt 2)");
    }
  }
  const double d = std::abs(s.delta);
  if (std::abs(s.delta2 - s.delta) > detuning_tol * d) out.push_back("delta2 differs from delta");
  if (std::abs(-s.delta1 - s.delta) > detuning_tol * d) out.push_back("-delta1 differs from delta");
  return out;
}

/// Two-phonon coupling g0^2 / (8 delta), in Hz. Sign follows delta.
inline double effective_coupling(double g0, double delta) {
  if (delta == 0.0) throw ConfigError("effective coupling is undefined for delta = 0");
  return g0 * g0 / (8.0 * delta);
}

struct EffectiveModel {
  double g = 0.0;                    // Hz
  double two_phonon_detuning = 0.0;  // omega+ - omega- - 2 omega_m, Hz
  bool include_kerr = true;

  static EffectiveModel from_params(const SystemParams& p, bool include_kerr = true) {
    const auto s = supermode_transform(p);
    return {effective_coupling(p.g0, p.delta()), s.two_phonon_detuning(), include_kerr};
  }
};

/// One oscillating term: amplitude * exp(i 2 pi f t) * op, plus its adjoint.
struct HamiltonianTerm {
  OperatorMatrix op;
  Complex amplitude;  // rad/s
  double frequency;   // Hz
};

/// H(t) = static + sum_k (amp_k e^{i 2 pi f_k t} op_k + h.c.)
class TimeDependentHamiltonian {
 public:
  explicit TimeDependentHamiltonian(ModeLayout layout)
      : layout_(layout), static_(hilbert::zero(layout)) {}

  void add_term(OperatorMatrix op, Complex amplitude, double frequency) {
    hilbert::require_same_layout(layout_, op.layout(), "time-dependent Hamiltonian term");
    terms_.push_back({std::move(op), amplitude, frequency});
  }

  void add_static(const OperatorMatrix& h) {
    if (!h.is_hermitian()) throw ContractError("static Hamiltonian part must be Hermitian");
    static_ = static_ + h;
  }

  const ModeLayout& layout() const { return layout_; }
  const std::vector<HamiltonianTerm>& terms() const { return terms_; }
  const OperatorMatrix& static_part() const { return static_; }

  OperatorMatrix evaluate(double t) const {
    SparseMatrix h = static_.sparse();
    for (const auto& term : terms_) {
      const Complex c = term.amplitude * std::polar(1.0, two_pi * term.frequency * t);
      h += c * term.op.sparse() + std::conj(c) * SparseMatrix(term.op.sparse().adjoint());
    }
    return OperatorMatrix(layout_, std::move(h));
  }

  double max_frequency() const {
    double f = 0.0;
    for (const auto& term : terms_) f = std::max(f, std::abs(term.frequency));
    return f;
  }

  /// H~(s) = -H(T - s); evolving under it for time T undoes evolution under H.
  TimeDependentHamiltonian time_reversed(double T) const {
    TimeDependentHamiltonian out(layout_);
    out.static_ = Complex(-1.0) * static_;
    for (const auto& term : terms_) {
      out.terms_.push_back({term.op, -term.amplitude * std::polar(1.0, two_pi * term.frequency * T),
                            -term.frequency});
    }
    return out;
  }

 private:
  ModeLayout layout_;
  std::vector<HamiltonianTerm> terms_;
  OperatorMatrix static_;
};

namespace detail {

inline void require_modes(const ModeLayout& layout, std::initializer_list<std::string> expected,
                          const char* what) {
  bool ok = layout.size() == expected.size();
  for (const auto& label : expected) ok = ok && layout.has_mode(label);
  if (!ok) {
    std::string list;
    for (const auto& label : expected) list += (list.empty() ? "" : ", ") + label;
    throw ShapeError(std::string(what) + " needs a layout with exactly the modes {" + list + "}");
  }
}

}  // namespace detail

/// Lab-frame Hamiltonian of the three coupled cavities and the mechanical mode.
inline OperatorMatrix build_full_hamiltonian(const SystemParams& p, const ModeLayout& layout) {
  p.validate();
  detail::require_modes(layout, {labels::a1, labels::a2, labels::a3, labels::mech},
                        "full Hamiltonian");
  using namespace hilbert;
  const auto a1 = annihilation(layout, labels::a1);
  const auto a2 = annihilation(layout, labels::a2);
  const auto a3 = annihilation(layout, labels::a3);
  const auto b = annihilation(layout, labels::mech);
  const auto n1 = dagger(a1) * a1;

  OperatorMatrix h = Complex(to_angular(p.omega1)) * n1 +
                     Complex(to_angular(p.omega2)) * (dagger(a2) * a2) +
                     Complex(to_angular(p.omega3)) * (dagger(a3) * a3) +
                     Complex(to_angular(p.omega_m)) * (dagger(b) * b);
  const OperatorMatrix hop12 = dagger(a1) * a2;
  const OperatorMatrix hop23 = dagger(a2) * a3;
  h = h + Complex(to_angular(p.mu)) * (hop12 + dagger(hop12) + hop23 + dagger(hop23));
  h = h - Complex(to_angular(p.g0)) * (n1 * (b + dagger(b)));
  return h;
}

/// Interaction-picture optomechanical coupling in the supermode basis.
///
/// With include_counter_rotating = false only the two resonant single-phonon
/// exchanges remain:
///   g1 a+ a0^dag b^dag e^{-i delta1 t} + g2 a0 a-^dag b^dag e^{-i delta2 t} + h.c.
/// With it, every term of -g0 a1^dag a1 (b + b^dag) is kept with its exact
/// interaction-picture frequency, so the t = 0 value equals the conjugated
/// lab-frame coupling.
inline TimeDependentHamiltonian build_supermode_interaction(const SupermodeData& s,
                                                            const ModeLayout& layout,
                                                            bool include_counter_rotating) {
  detail::require_modes(layout, {labels::plus, labels::zero, labels::minus, labels::mech},
                        "supermode Hamiltonian");
  using namespace hilbert;
  const std::array<OperatorMatrix, 3> a = {annihilation(layout, labels::plus),
                                           annihilation(layout, labels::zero),
                                           annihilation(layout, labels::minus)};
  const auto b = annihilation(layout, labels::mech);
  const auto bd = dagger(b);
  // Frequencies relative to omega0, Hz.
  const std::array<double, 3> rel = {s.plus_minus_zero(), 0.0, -s.zero_minus_minus()};
  auto coupling = [&](int j, int k) { return -s.g0 * s.M(j, 0) * s.M(k, 0); };

  TimeDependentHamiltonian h(layout);
  // Resonant pairs first: (a0^dag a+, a-^dag a0) with b^dag.
  constexpr std::array<std::pair<int, int>, 3> pairs = {{{1, 0}, {2, 1}, {2, 0}}};
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [j, k] = pairs[p];
    const auto hop = dagger(a[j]) * a[k];
    const double c = to_angular(coupling(j, k));
    const double omega_jk = rel[j] - rel[k];
    // the resonant frequencies are -delta1 and -delta2 exactly
    const double with_bd = p == 0 ? -s.delta1 : p == 1 ? -s.delta2 : omega_jk + s.omega_m;
    if (p < 2 || include_counter_rotating) h.add_term(hop * bd, c, with_bd);
    if (include_counter_rotating) h.add_term(hop * b, c, omega_jk - s.omega_m);
  }
  if (include_counter_rotating) {
    for (int j = 0; j < 3; ++j) {
      h.add_term((dagger(a[j]) * a[j]) * b, to_angular(coupling(j, j)), -s.omega_m);
    }
  }
  return h;
}

inline TimeDependentHamiltonian build_rwa_hamiltonian(const SupermodeData& s,
                                                      const ModeLayout& layout) {
  return build_supermode_interaction(s, layout, false);
}

/// -g [a+ a-^dag b^dag^2 e^{-i(omega+ - omega- - 2 omega_m) t} + h.c.]
///   - g [a+^dag a+ + a+^dag a+ b^dag b + a-^dag a- b^dag b]   (Kerr part optional)
inline TimeDependentHamiltonian build_effective_hamiltonian(const EffectiveModel& eff,
                                                            const ModeLayout& layout) {
  if (layout.has_mode(labels::zero)) {
    throw ShapeError("effective Hamiltonian acts on {a+, a-, b}; a0 is eliminated at this level");
  }
  detail::require_modes(layout, {labels::plus, labels::minus, labels::mech},
                        "effective Hamiltonian");
  using namespace hilbert;
  const auto ap = annihilation(layout, labels::plus);
  const auto am = annihilation(layout, labels::minus);
  const auto b = annihilation(layout, labels::mech);
  const auto bd = dagger(b);
  const double g = to_angular(eff.g);

  TimeDependentHamiltonian h(layout);
  h.add_term(ap * dagger(am) * bd * bd, -g, -eff.two_phonon_detuning);
  if (eff.include_kerr) {
    const auto np = dagger(ap) * ap;
    const auto nm = dagger(am) * am;
    const auto nb = bd * b;
    h.add_static(Complex(-g) * (np + np * nb + nm * nb));
  }
  return h;
}

/// -g (a+^dag a- b^2 + h.c.), static, for a fixed photon number n whose
/// detuning was set to (1 - 2n) g upstream.
inline OperatorMatrix build_two_phonon_hamiltonian(double g, const ModeLayout& layout) {
  detail::require_modes(layout, {labels::plus, labels::minus, labels::mech},
                        "two-phonon Hamiltonian");
  using namespace hilbert;
  const auto ap = annihilation(layout, labels::plus);
  const auto am = annihilation(layout, labels::minus);
  const auto b = annihilation(layout, labels::mech);
  const auto x = dagger(ap) * am * b * b;
  return Complex(-to_angular(g)) * (x + dagger(x));
}

}  // namespace catres::model
