#pragma once

// Measurement, phase-space and fidelity tools, plus the closed-form
// eigensystem and cat-state expressions of the two-phonon exchange.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "catres/dynamics.hpp"
#include "catres/errors.hpp"
#include "catres/hilbert.hpp"
#include "catres/model.hpp"

namespace catres::analysis {

using hilbert::MixedState;
using hilbert::ModeLayout;
using hilbert::PureState;

// ---------------------------------------------------------------- measurement

struct MeasurementOutcome {
  std::vector<int> record;  // photon numbers of the measured modes, in layout order
  double probability = 0.0;
  MixedState conditional_state;
  std::optional<PureState> conditional_pure;  // set when the input was pure

  int n_plus() const { return record.at(0); }
  int n_minus() const { return record.at(1); }
  int total() const {
    int s = 0;
    for (int r : record) s += r;
    return s;
  }
};

namespace detail {

struct RecordSplit {
  ModeLayout rest;
  std::vector<std::size_t> measured;  // mode positions, layout order
  std::map<std::vector<int>, std::vector<std::pair<std::size_t, std::size_t>>> groups;
};

inline RecordSplit split_by_record(const ModeLayout& layout, const std::vector<std::string>& optical) {
  RecordSplit s;
  std::vector<bool> is_measured(layout.size(), false);
  for (const auto& m : optical) is_measured[layout.mode_index(m)] = true;
  std::vector<std::string> keep;
  for (std::size_t m = 0; m < layout.size(); ++m) {
    if (is_measured[m]) {
      s.measured.push_back(m);
    } else {
      keep.push_back(layout.modes()[m].label);
    }
  }
  if (keep.empty()) throw ConfigError("photon-number measurement must leave at least one mode unmeasured");
  s.rest = layout.subset(keep);
  const auto split = hilbert::detail::split_indices(layout, keep);
  for (std::size_t i = 0; i < layout.dim(); ++i) {
    std::vector<int> rec;
    for (auto m : s.measured) rec.push_back(layout.occupation(i, m));
    s.groups[rec].emplace_back(i, split.kept_index[i]);
  }
  return s;
}

inline void sort_outcomes(std::vector<MeasurementOutcome>& out) {
  std::stable_sort(out.begin(), out.end(), [](const MeasurementOutcome& a, const MeasurementOutcome& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.record > b.record;
  });
}

}  // namespace detail

/// Projects the named modes onto every joint photon-number record with
/// probability above prob_floor. Outcomes come sorted by descending probability.
inline std::vector<MeasurementOutcome> photon_number_measurement(const PureState& psi,
                                                                 const std::vector<std::string>& optical,
                                                                 double prob_floor = 1e-10) {
  const auto split = detail::split_by_record(psi.layout(), optical);
  std::vector<MeasurementOutcome> out;
  for (const auto& [rec, members] : split.groups) {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(split.rest.dim()));
    for (auto [full, kept] : members) {
      v(static_cast<Eigen::Index>(kept)) = psi.amplitudes()(static_cast<Eigen::Index>(full));
    }
    const double p = v.squaredNorm();
    if (p <= prob_floor) continue;
    PureState cond(split.rest, v / std::sqrt(p));
    out.push_back({rec, p, MixedState::from_pure(cond), cond});
  }
  detail::sort_outcomes(out);
  return out;
}

inline std::vector<MeasurementOutcome> photon_number_measurement(const MixedState& rho,
                                                                 const std::vector<std::string>& optical,
                                                                 double prob_floor = 1e-10) {
  const auto split = detail::split_by_record(rho.layout(), optical);
  std::vector<MeasurementOutcome> out;
  for (const auto& [rec, members] : split.groups) {
    const auto n = static_cast<Eigen::Index>(split.rest.dim());
    DenseMatrix block = DenseMatrix::Zero(n, n);
    for (auto [fi, ki] : members) {
      for (auto [fj, kj] : members) {
        block(static_cast<Eigen::Index>(ki), static_cast<Eigen::Index>(kj)) =
            rho.rho()(static_cast<Eigen::Index>(fi), static_cast<Eigen::Index>(fj));
      }
    }
    const double p = block.trace().real();
    if (p <= prob_floor) continue;
    out.push_back({rec, p, MixedState(split.rest, block / p), std::nullopt});
  }
  detail::sort_outcomes(out);
  return out;
}

// ---------------------------------------------------------------- fidelity

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

inline double fidelity(const PureState& a, const PureState& b) {
  return clamp01(std::norm(a.inner(b)));
}

inline double fidelity(const PureState& a, const MixedState& b) {
  return clamp01(hilbert::expectation(hilbert::OperatorMatrix(b.layout(), b.rho()), a).real());
}

inline double fidelity(const MixedState& a, const PureState& b) { return fidelity(b, a); }

/// (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2
inline double fidelity(const MixedState& a, const MixedState& b) {
  hilbert::require_same_layout(a.layout(), b.layout(), "fidelity");
  const DenseMatrix ha = 0.5 * (a.rho() + a.rho().adjoint());
  Eigen::SelfAdjointEigenSolver<DenseMatrix> ea(ha);
  const Eigen::VectorXd root = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const DenseMatrix sqrt_a = ea.eigenvectors() * root.asDiagonal() * ea.eigenvectors().adjoint();
  DenseMatrix inner = sqrt_a * b.rho() * sqrt_a;
  inner = 0.5 * (inner + inner.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<DenseMatrix> ei(inner, Eigen::EigenvaluesOnly);
  const double s = ei.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return clamp01(s * s);
}

// ---------------------------------------------------------------- Wigner

struct WignerSpec {
  double x_min = -5.5;
  double x_max = 5.5;
  int nx = 201;
  double p_min = -5.5;
  double p_max = 5.5;
  int np = 201;
};

/// W(beta) with x = Re beta, p = Im beta; values(i, j) is at (x_axis[j], p_axis[i]).
struct WignerGrid {
  std::vector<double> x_axis;
  std::vector<double> p_axis;
  Eigen::MatrixXd values;
  double integral = 0.0;  // grid quadrature of W
  bool warning = false;   // grid holds less than 99.9% of the mass
  static constexpr const char* convention =
      "W(beta) = (2/pi) Tr[rho D(beta) P D(beta)^dag], P = (-1)^n, x = Re beta, p = Im beta";
};

namespace detail {

inline std::vector<double> axis(double lo, double hi, int n) {
  if (n < 2 || !(hi > lo)) throw ConfigError("Wigner axis needs n >= 2 and hi > lo");
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return v;
}

// Sum over rho_mn W_mn(beta) with the normalized Laguerre recurrence.
inline double wigner_point(const DenseMatrix& rho, Complex beta, std::vector<Complex>& work) {
  const auto d = static_cast<std::size_t>(rho.rows());
  const Complex two_beta = 2.0 * beta;
  const Complex two_beta_c = std::conj(two_beta);
  work.assign(d, Complex(0.0));
  work[0] = (2.0 / std::numbers::pi) * std::exp(-2.0 * std::norm(beta));
  double w = rho(0, 0).real() * work[0].real();
  for (std::size_t n = 1; n < d; ++n) {
    work[n] = two_beta * work[n - 1] / std::sqrt(static_cast<double>(n));
    w += 2.0 * (rho(0, static_cast<Eigen::Index>(n)) * work[n]).real();
  }
  for (std::size_t m = 1; m < d; ++m) {
    const double sm = std::sqrt(static_cast<double>(m));
    Complex temp = work[m];
    work[m] = (two_beta_c * temp - sm * work[m - 1]) / sm;
    w += (rho(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)) * work[m]).real();
    for (std::size_t n = m + 1; n < d; ++n) {
      const Complex next = (two_beta * work[n - 1] - sm * temp) / std::sqrt(static_cast<double>(n));
      temp = work[n];
      work[n] = next;
      w += 2.0 * (rho(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) * work[n]).real();
    }
  }
  return w;
}

}  // namespace detail

/// Parity-form Wigner function of a single-mode state.
inline WignerGrid wigner(const MixedState& rho, const WignerSpec& spec = {}) {
  if (rho.layout().size() != 1) throw ShapeError("wigner needs a single-mode state");
  WignerGrid g;
  g.x_axis = detail::axis(spec.x_min, spec.x_max, spec.nx);
  g.p_axis = detail::axis(spec.p_min, spec.p_max, spec.np);
  g.values.resize(spec.np, spec.nx);
  std::vector<Complex> work;
  for (int i = 0; i < spec.np; ++i) {
    for (int j = 0; j < spec.nx; ++j) {
      const Complex beta(g.x_axis[static_cast<std::size_t>(j)], g.p_axis[static_cast<std::size_t>(i)]);
      g.values(i, j) = detail::wigner_point(rho.rho(), beta, work);
    }
  }
  const double cell = (g.x_axis[1] - g.x_axis[0]) * (g.p_axis[1] - g.p_axis[0]);
  g.integral = g.values.sum() * cell;
  g.warning = g.integral < 0.999 * rho.trace();
  return g;
}

inline WignerGrid wigner(const PureState& psi, const WignerSpec& spec = {}) {
  return wigner(MixedState::from_pure(psi), spec);
}

// ---------------------------------------------------------------- closed forms

struct OpticalEigenstate {
  std::string label;
  double energy = 0.0;   // rad/s
  double in_g = 0.0;     // energy / (2 pi g)
  Vector coefficients;   // over |n,0>, |n-1,1>, ..., |0,n>
  PureState state;       // on {a+, a-}, each of dim n+1
};

namespace detail {

inline PureState optical_state(int n, const Vector& coeffs) {
  const auto layout = ModeLayout({{model::labels::plus, n + 1, hilbert::Role::optical},
                                  {model::labels::minus, n + 1, hilbert::Role::optical}});
  Vector v = Vector::Zero(static_cast<Eigen::Index>(layout.dim()));
  for (int k = 0; k <= n; ++k) v(static_cast<Eigen::Index>(layout.index_of({n - k, k}))) = coeffs(k);
  return PureState(layout, std::move(v));
}

inline OpticalEigenstate make_eigenstate(std::string label, int n, double in_g, double g_hz,
                                         std::initializer_list<double> coeffs, double scale) {
  Vector c(static_cast<Eigen::Index>(coeffs.size()));
  Eigen::Index i = 0;
  for (double x : coeffs) c(i++) = x * scale;
  return {std::move(label), in_g * model::to_angular(g_hz), in_g, c, optical_state(n, c)};
}

}  // namespace detail

/// Eigenpairs of -g (a+^dag a- + h.c.) with a+ + a- photon number 3, in the
/// order psi+, psi-, phi+, phi- (energies -3g, 3g, -g, g).
inline std::vector<OpticalEigenstate> three_photon_eigensystem(double g) {
  const double s3 = std::sqrt(3.0);
  const double k = 1.0 / (2.0 * std::sqrt(2.0));
  std::vector<OpticalEigenstate> out;
  out.push_back(detail::make_eigenstate("psi+", 3, -3.0, g, {1.0, s3, s3, 1.0}, k));
  out.push_back(detail::make_eigenstate("psi-", 3, 3.0, g, {1.0, -s3, s3, -1.0}, k));
  out.push_back(detail::make_eigenstate("phi+", 3, -1.0, g, {s3, 1.0, -1.0, -s3}, k));
  out.push_back(detail::make_eigenstate("phi-", 3, 1.0, g, {s3, -1.0, -1.0, s3}, k));
  return out;
}

/// Single-photon analogue: (|10> +/- |01>)/sqrt 2 with energies -/+ g.
inline std::vector<OpticalEigenstate> one_photon_eigensystem(double g) {
  const double k = 1.0 / std::sqrt(2.0);
  return {detail::make_eigenstate("+", 1, -1.0, g, {1.0, 1.0}, k),
          detail::make_eigenstate("-", 1, 1.0, g, {1.0, -1.0}, k)};
}

/// Numerical eigenpairs of -(a+^dag a- + h.c.) on the n-photon subspace,
/// ascending, with the |n,0> component made non-negative. Energies in units of g.
inline std::vector<std::pair<double, Eigen::VectorXd>> hopping_eigensystem(int n) {
  if (n < 1) throw ConfigError("hopping eigensystem needs n >= 1");
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n + 1, n + 1);
  // a+^dag a- maps |n-k-1, k+1> to sqrt((n-k)(k+1)) |n-k, k>
  for (int k = 0; k < n; ++k) {
    const double v = -std::sqrt(static_cast<double>((n - k) * (k + 1)));
    h(k, k + 1) = v;
    h(k + 1, k) = v;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  std::vector<std::pair<double, Eigen::VectorXd>> out;
  for (int i = 0; i <= n; ++i) {
    Eigen::VectorXd v = es.eigenvectors().col(i);
    if (v(0) < 0.0) v = -v;
    out.emplace_back(es.eigenvalues()(i), v);
  }
  return out;
}

/// Large-amplitude closed form of the state grown from |n,0>|alpha> under
/// -g (a+^dag a- b^2 + h.c.), for n in {1, 3}. Each optical eigenstate rotates
/// the coherent state by -E t and picks up the phase e^{i E t (2k - n - 1/2)}
/// on |n-k, k>. Normalized on the given {a+, a-, b} layout.
inline PureState analytic_cat_state(int n, Complex alpha, double t, double g, const ModeLayout& layout) {
  if (n != 1 && n != 3) throw ConfigError("analytic cat state is available for n = 1 and n = 3 only");
  model::detail::require_modes(layout, {model::labels::plus, model::labels::minus, model::labels::mech},
                               "analytic cat state");
  const auto eig = n == 3 ? three_photon_eigensystem(g) : one_photon_eigensystem(g);
  const int mech_dim = layout.mode(model::labels::mech).dim;
  const std::size_t mech_pos = layout.mode_index(model::labels::mech);
  Vector psi = Vector::Zero(static_cast<Eigen::Index>(layout.dim()));
  for (const auto& e : eig) {
    const double weight = e.coefficients(0).real();  // <v|n,0>
    const Vector mech = hilbert::coherent_amplitudes(mech_dim, alpha * std::polar(1.0, -e.energy * t));
    for (int k = 0; k <= n; ++k) {
      const Complex c = weight * e.coefficients(k) * std::polar(1.0, e.energy * t * (2.0 * k - n - 0.5));
      std::vector<int> occ(3, 0);
      occ[layout.mode_index(model::labels::plus)] = n - k;
      occ[layout.mode_index(model::labels::minus)] = k;
      const std::size_t base = layout.index_of(std::span<const int>(occ));
      for (int m = 0; m < mech_dim; ++m) {
        psi(static_cast<Eigen::Index>(base + static_cast<std::size_t>(m) * layout.stride(mech_pos))) +=
            c * mech(m);
      }
    }
  }
  return PureState::normalized(layout, std::move(psi));
}

// ---------------------------------------------------------------- cat fits

struct CatComponent {
  Complex amplitude;
  Complex alpha;
};

struct CatDecomposition {
  std::vector<CatComponent> components;
  double residual = 1.0;  // 1 - weight inside the span of the listed coherent states
};

/// Overlap modulus above which two candidate components count as one.
inline constexpr double max_component_overlap = 0.99;

namespace detail {

inline CatDecomposition project(const Vector& c, const std::vector<double>& angles, double radius) {
  if (angles.empty()) throw ConfigError("cat fit needs at least one candidate angle");
  const auto d = static_cast<int>(c.size());
  const auto k = static_cast<Eigen::Index>(angles.size());
  DenseMatrix basis(d, k);
  std::vector<Complex> labels;
  for (Eigen::Index i = 0; i < k; ++i) {
    labels.push_back(std::polar(radius, angles[static_cast<std::size_t>(i)]));
    basis.col(i) = hilbert::coherent_amplitudes(d, labels.back());
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double ov = std::abs(basis.col(i).dot(basis.col(j)));
      if (ov > max_component_overlap) {
        throw ConditioningError("coherent components at angles " + std::to_string(angles[static_cast<std::size_t>(j)]) +
                                " and " + std::to_string(angles[static_cast<std::size_t>(i)]) +
                                " overlap by " + std::to_string(ov));
      }
    }
  }
  Eigen::HouseholderQR<DenseMatrix> qr(basis);
  const DenseMatrix q = qr.householderQ() * DenseMatrix::Identity(d, k);
  const Vector coeffs = q.adjoint() * c;
  CatDecomposition out;
  out.residual = std::max(0.0, 1.0 - coeffs.squaredNorm() / c.squaredNorm());
  const Vector x = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>().solve(coeffs);
  const double norm = c.norm();
  for (Eigen::Index i = 0; i < k; ++i) out.components.push_back({x(i) / norm, labels[static_cast<std::size_t>(i)]});
  return out;
}

}  // namespace detail

/// Least-squares projection onto span{|radius e^{i theta_k}>}.
inline CatDecomposition cat_component_fit(const PureState& psi, const std::vector<double>& angles, double radius) {
  if (psi.layout().size() != 1) throw ShapeError("cat fit needs a single-mode state");
  return detail::project(psi.amplitudes(), angles, radius);
}

/// Mixed input: residual is 1 - Tr(P rho); components describe the leading eigenvector.
inline CatDecomposition cat_component_fit(const MixedState& rho, const std::vector<double>& angles, double radius) {
  if (rho.layout().size() != 1) throw ShapeError("cat fit needs a single-mode state");
  const DenseMatrix h = 0.5 * (rho.rho() + rho.rho().adjoint());
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h);
  const auto d = h.rows();
  double captured = 0.0;
  CatDecomposition lead;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double w = es.eigenvalues()(i);
    if (w <= 0.0) continue;
    auto part = detail::project(es.eigenvectors().col(i), angles, std::abs(radius));
    captured += w * (1.0 - part.residual);
    if (i == d - 1) lead = std::move(part);
  }
  lead.residual = std::max(0.0, 1.0 - captured / rho.trace());
  return lead;
}

/// Smallest residual over every fit that drops one angle from the list.
inline double best_reduced_residual(const PureState& psi, const std::vector<double>& angles, double radius) {
  if (angles.size() < 2) return 1.0;
  double best = 1.0;
  for (std::size_t drop = 0; drop < angles.size(); ++drop) {
    std::vector<double> fewer;
    for (std::size_t i = 0; i < angles.size(); ++i) {
      if (i != drop) fewer.push_back(angles[i]);
    }
    best = std::min(best, cat_component_fit(psi, fewer, radius).residual);
  }
  return best;
}

/// Angles (n - 2k) g t + arg(alpha), k = 0..n: where the n+1 branches sit.
inline std::vector<double> ladder_angles(int n, double gt, Complex alpha) {
  std::vector<double> out;
  for (int k = 0; k <= n; ++k) out.push_back((n - 2 * k) * gt + std::arg(alpha));
  return out;
}

// ---------------------------------------------------------------- statistics

/// Photon-number distribution of one mode; sums to the state's trace.
inline std::vector<double> number_distribution(const MixedState& rho, const std::string& mode) {
  const auto reduced = hilbert::partial_trace(rho, {mode});
  std::vector<double> p(reduced.dim());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::max(0.0, reduced.rho()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real());
  }
  return p;
}

inline std::vector<double> number_distribution(const PureState& psi, const std::string& mode) {
  const std::size_t pos = psi.layout().mode_index(mode);
  std::vector<double> p(static_cast<std::size_t>(psi.layout().modes()[pos].dim), 0.0);
  for (std::size_t i = 0; i < psi.dim(); ++i) {
    p[static_cast<std::size_t>(psi.layout().occupation(i, pos))] +=
        std::norm(psi.amplitudes()(static_cast<Eigen::Index>(i)));
  }
  return p;
}

/// <n> of a mode at every stored sample of a trajectory.
inline std::vector<double> occupation_series(const dynamics::Trajectory& traj, const std::string& mode) {
  std::vector<double> out;
  for (const auto& s : traj.pure_states) {
    out.push_back(hilbert::expectation(hilbert::number(s.layout(), mode), s).real());
  }
  for (const auto& s : traj.mixed_states) {
    out.push_back(hilbert::expectation(hilbert::number(s.layout(), mode), s).real());
  }
  return out;
}

struct RabiFit {
  double g = 0.0;          // Hz
  double amplitude = 0.0;
  double rms_residual = 0.0;
};

/// Fits P(t) = A sin^2(sqrt 2 * 2 pi g t) for g in [g_lo, g_hi].
inline RabiFit fit_two_phonon_rabi(const std::vector<double>& t, const std::vector<double>& p, double g_lo,
                                   double g_hi, int scan_points = 400) {
  if (t.size() != p.size() || t.size() < 3) throw ConfigError("Rabi fit needs matching series of length >= 3");
  if (!(g_hi > g_lo && g_lo > 0.0)) throw ConfigError("Rabi fit needs 0 < g_lo < g_hi");
  auto evaluate = [&](double g) {
    double sp = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double s = std::pow(std::sin(std::sqrt(2.0) * model::to_angular(g) * t[i]), 2);
      sp += s * p[i];
      ss += s * s;
    }
    const double a = ss > 0.0 ? sp / ss : 0.0;
    double r = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double s = std::pow(std::sin(std::sqrt(2.0) * model::to_angular(g) * t[i]), 2);
      r += (p[i] - a * s) * (p[i] - a * s);
    }
    return RabiFit{g, a, std::sqrt(r / static_cast<double>(t.size()))};
  };
  RabiFit best = evaluate(g_lo);
  int best_i = 0;
  const double step = (g_hi - g_lo) / scan_points;
  for (int i = 1; i <= scan_points; ++i) {
    auto f = evaluate(g_lo + i * step);
    if (f.rms_residual < best.rms_residual) {
      best = f;
      best_i = i;
    }
  }
  // golden-section refinement around the best scan point
  double a = g_lo + std::max(0, best_i - 1) * step;
  double b = g_lo + std::min(scan_points, best_i + 1) * step;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  auto fc = evaluate(c), fd = evaluate(d);
  for (int it = 0; it < 100 && b - a > 1e-9 * best.g; ++it) {
    if (fc.rms_residual < fd.rms_residual) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = evaluate(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = evaluate(d);
    }
  }
  const auto refined = fc.rms_residual < fd.rms_residual ? fc : fd;
  return refined.rms_residual < best.rms_residual ? refined : best;
}

/// Local maxima of the Husimi function Q(r e^{i theta}) = <r e^{i theta}|rho|r e^{i theta}> / pi
/// on a circle, keeping those above rel_floor times the largest. Angles in (-pi, pi].
inline std::vector<double> ring_peaks(const MixedState& rho, double radius, int samples = 1440,
                                      double rel_floor = 1e-4) {
  if (rho.layout().size() != 1) throw ShapeError("ring peaks need a single-mode state");
  if (samples < 8) throw ConfigError("ring peaks need at least 8 samples");
  const int d = static_cast<int>(rho.dim());
  std::vector<double> q(static_cast<std::size_t>(samples));
  std::vector<double> theta(q.size());
  for (int i = 0; i < samples; ++i) {
    theta[static_cast<std::size_t>(i)] = -std::numbers::pi + 2.0 * std::numbers::pi * (i + 1) / samples;
    const Vector c = hilbert::coherent_amplitudes(d, std::polar(radius, theta[static_cast<std::size_t>(i)]), 1.0);
    q[static_cast<std::size_t>(i)] = c.dot(rho.rho() * c).real() / std::numbers::pi;
  }
  const double top = *std::max_element(q.begin(), q.end());
  std::vector<double> out;
  for (int i = 0; i < samples; ++i) {
    const double left = q[static_cast<std::size_t>((i + samples - 1) % samples)];
    const double right = q[static_cast<std::size_t>((i + 1) % samples)];
    const double here = q[static_cast<std::size_t>(i)];
    if (here > left && here >= right && here > rel_floor * top) out.push_back(theta[static_cast<std::size_t>(i)]);
  }
  return out;
}

inline std::vector<double> ring_peaks(const PureState& psi, double radius, int samples = 1440,
                                      double rel_floor = 1e-4) {
  return ring_peaks(MixedState::from_pure(psi), radius, samples, rel_floor);
}

}  // namespace catres::analysis
