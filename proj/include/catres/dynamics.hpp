#pragma once

// Time evolution: static and time-dependent Schroedinger propagation and the
// Lindblad master equation. Operators are in angular units (rad/s), times in
// seconds, collapse rates in Hz.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "catres/errors.hpp"
#include "catres/hilbert.hpp"
#include "catres/integrators.hpp"
#include "catres/model.hpp"

namespace catres::dynamics {

using hilbert::MixedState;
using hilbert::ModeLayout;
using hilbert::OperatorMatrix;
using hilbert::PureState;

/// Sample times for a run plus the per-sample accuracy target.
struct TimeGrid {
  double t_start = 0.0;
  double t_end = 1.0;
  int n_samples = 2;
  double tolerance = 1e-8;
  std::vector<double> explicit_times;

  static TimeGrid uniform(double t_start, double t_end, int n_samples, double tolerance = 1e-8) {
    return TimeGrid{t_start, t_end, n_samples, tolerance, {}};
  }

  static TimeGrid at(std::vector<double> times, double tolerance = 1e-8) {
    TimeGrid g;
    g.t_start = times.empty() ? 0.0 : times.front();
    g.t_end = times.empty() ? 0.0 : times.back();
    g.n_samples = static_cast<int>(times.size());
    g.tolerance = tolerance;
    g.explicit_times = std::move(times);
    return g;
  }

  std::vector<double> times() const {
    std::vector<double> out = explicit_times;
    if (out.empty()) {
      if (n_samples < 2) throw ConfigError("time grid needs at least 2 samples");
      if (!(t_end > t_start)) throw ConfigError("time grid must be strictly increasing");
      out.resize(static_cast<std::size_t>(n_samples));
      const double dt = (t_end - t_start) / (n_samples - 1);
      for (int i = 0; i < n_samples; ++i) out[static_cast<std::size_t>(i)] = t_start + i * dt;
      out.back() = t_end;
    }
    if (out.size() < 2) throw ConfigError("time grid needs at least 2 samples");
    for (std::size_t i = 1; i < out.size(); ++i) {
      if (!(out[i] > out[i - 1])) throw ConfigError("time grid must be strictly increasing");
    }
    if (!(tolerance > 0.0)) throw ConfigError("time grid tolerance must be positive");
    return out;
  }
};

/// Lindblad channel: rate * (L rho L^dag - {L^dag L, rho}/2). Rate in Hz.
struct CollapseChannel {
  OperatorMatrix op;
  double rate = 0.0;
};

struct Observable {
  std::string name;
  OperatorMatrix op;
};

/// Kept basis indices of a layout (e.g. a photon-number sector).
struct Subspace {
  std::vector<std::size_t> indices;
};

/// Basis states whose total occupation of `modes` is at most max_total.
inline Subspace photon_sector(const ModeLayout& layout, const std::vector<std::string>& modes,
                              int max_total) {
  std::vector<std::size_t> pos;
  for (const auto& m : modes) pos.push_back(layout.mode_index(m));
  Subspace s;
  for (std::size_t i = 0; i < layout.dim(); ++i) {
    int total = 0;
    for (auto p : pos) total += layout.occupation(i, p);
    if (total <= max_total) s.indices.push_back(i);
  }
  return s;
}

struct EvolveOptions {
  std::vector<Observable> observables;
  /// Store every sample's state; otherwise only the final one.
  bool keep_states = true;
  /// Time-dependent runs: fixed RK4 substep in seconds, 0 picks one.
  double substep = 0.0;
  /// Time-dependent runs: repeat at half the substep and compare.
  bool richardson_check = true;
  /// Lindblad runs: propagate only inside this invariant subspace.
  std::optional<Subspace> subspace;
  /// Local error target of the adaptive stepper, relative to grid.tolerance.
  double step_tolerance_factor = 1e-3;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<PureState> pure_states;    // filled by Schroedinger runs
  std::vector<MixedState> mixed_states;  // filled by Lindblad runs
  std::map<std::string, std::vector<double>> observables;
  std::vector<double> norm_deviation;  // |norm^2 - 1| or |trace - 1| per sample
  double max_norm_deviation = 0.0;
  double achieved_error = 0.0;
  std::size_t steps = 0;
  bool warning = false;
  std::vector<std::string> warnings;

  const PureState& final_pure() const { return pure_states.back(); }
  const MixedState& final_mixed() const { return mixed_states.back(); }
};

/// Norm or trace drift at which a run is flagged.
inline constexpr double drift_warning = 1e-6;
/// Drift at which a run is declared broken.
inline constexpr double drift_failure = 1e-4;

namespace detail {

inline void record_drift(Trajectory& traj, double deviation) {
  traj.norm_deviation.push_back(deviation);
  traj.max_norm_deviation = std::max(traj.max_norm_deviation, deviation);
  if (deviation >= drift_failure) {
    throw IntegrationError("norm/trace drift " + std::to_string(deviation) + " exceeds " +
                               std::to_string(drift_failure),
                           deviation);
  }
  if (deviation >= drift_warning && !traj.warning) {
    traj.warning = true;
    traj.warnings.push_back("norm/trace drift reached " + std::to_string(deviation));
  }
}

inline void record_pure_sample(Trajectory& traj, const ModeLayout& layout, const Vector& psi,
                               const EvolveOptions& opt, bool keep) {
  for (const auto& o : opt.observables) {
    traj.observables[o.name].push_back(psi.dot(o.op.sparse() * psi).real());
  }
  record_drift(traj, std::abs(psi.squaredNorm() - 1.0));
  if (keep) traj.pure_states.emplace_back(layout, psi);
}

inline void require_hermitian(const OperatorMatrix& h) {
  if (!h.is_hermitian(1e-10)) {
    throw ContractError("Hamiltonian is not Hermitian (max |H - H^dag| = " +
                        std::to_string(h.hermiticity_error()) + ")");
  }
}

// Max absolute row sum.
inline double inf_norm(const SparseMatrix& m) {
  double best = 0.0;
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    double row = 0.0;
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) row += std::abs(it.value());
    best = std::max(best, row);
  }
  return best;
}

}  // namespace detail

/// Solves i psi' = H psi for a static Hermitian H (rad/s).
inline Trajectory evolve_unitary(const OperatorMatrix& H, const PureState& psi0,
                                 const TimeGrid& grid, const EvolveOptions& opt = {}) {
  hilbert::require_same_layout(H.layout(), psi0.layout(), "evolve_unitary");
  detail::require_hermitian(H);
  const auto times = grid.times();
  const SparseMatrix& h = H.sparse();
  auto rhs = [&h](double, const Vector& y) -> Vector { return Complex(0.0, -1.0) * (h * y); };

  const double tol = grid.tolerance * opt.step_tolerance_factor;
  Trajectory traj;
  traj.times = times;
  Vector psi = psi0.amplitudes();
  double step = 0.0;
  integrators::StepStats stats;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (i > 0) integrators::dopri5_advance(rhs, times[i - 1], times[i], psi, tol, tol, step, stats);
    const bool keep = opt.keep_states || i + 1 == times.size();
    detail::record_pure_sample(traj, psi0.layout(), psi, opt, keep);
  }
  traj.steps = stats.accepted;
  traj.achieved_error = stats.max_error_ratio * tol;
  return traj;
}

/// Time-ordered propagation under H(t) with fixed RK4 substeps bounded by the
/// fastest term frequency. With richardson_check the run is repeated at half
/// the substep; the finer result is returned and the final-state infidelity
/// between the two must stay below 1e-6.
inline Trajectory evolve_time_dependent(const model::TimeDependentHamiltonian& H,
                                        const PureState& psi0, const TimeGrid& grid,
                                        const EvolveOptions& opt = {}) {
  hilbert::require_same_layout(H.layout(), psi0.layout(), "evolve_time_dependent");
  detail::require_hermitian(H.static_part());
  const auto times = grid.times();

  const double f_max = H.max_frequency();
  const double coarsest = f_max > 0.0 ? 1.0 / (20.0 * f_max) : std::numeric_limits<double>::infinity();
  if (opt.substep > 0.0 && opt.substep > coarsest) {
    throw ConfigError("substep " + std::to_string(opt.substep) + " s is too coarse; need <= " +
                      std::to_string(coarsest) + " s (1/(20 f_max))");
  }

  struct Term {
    SparseMatrix op;
    SparseMatrix op_dag;
    Complex amplitude;
    double angular_frequency;
  };
  std::vector<Term> terms;
  double norm_bound = detail::inf_norm(H.static_part().sparse());
  for (const auto& t : H.terms()) {
    terms.push_back({t.op.sparse(), SparseMatrix(t.op.sparse().adjoint()), t.amplitude,
                     model::to_angular(t.frequency)});
    norm_bound += 2.0 * std::abs(t.amplitude) * detail::inf_norm(t.op.sparse());
  }
  const SparseMatrix& h0 = H.static_part().sparse();
  auto rhs = [&](double t, const Vector& y) -> Vector {
    Vector out = h0 * y;
    for (const auto& term : terms) {
      const Complex c = term.amplitude * std::polar(1.0, term.angular_frequency * t);
      out += c * (term.op * y) + std::conj(c) * (term.op_dag * y);
    }
    return Complex(0.0, -1.0) * out;
  };

  double substep = opt.substep;
  if (substep <= 0.0) {
    substep = f_max > 0.0 ? 1.0 / (40.0 * f_max) : std::numeric_limits<double>::infinity();
    if (norm_bound > 0.0) substep = std::min(substep, 0.05 / norm_bound);
    if (!std::isfinite(substep)) substep = times.back() - times.front();
  }

  auto run = [&](double h, Trajectory& traj) {
    traj.times = times;
    Vector psi = psi0.amplitudes();
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (i > 0) {
        const double span = times[i] - times[i - 1];
        const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(span / h - 1e-9)));
        integrators::rk4_advance(rhs, times[i - 1], times[i], psi, n);
        traj.steps += n;
      }
      const bool keep = opt.keep_states || i + 1 == times.size();
      detail::record_pure_sample(traj, psi0.layout(), psi, opt, keep);
    }
    return psi;
  };

  Trajectory coarse;
  const Vector coarse_final = run(substep, coarse);
  if (!opt.richardson_check) return coarse;

  Trajectory fine;
  const Vector fine_final = run(0.5 * substep, fine);
  const double overlap = std::norm(coarse_final.dot(fine_final)) /
                         (coarse_final.squaredNorm() * fine_final.squaredNorm());
  const double infidelity = std::max(0.0, 1.0 - overlap);
  // Difference of a 4th-order pair estimates the finer result's error.
  fine.achieved_error = (fine_final - coarse_final).norm() / 15.0;
  if (infidelity > 1e-6) {
    throw IntegrationError("halving the substep changed the final state by infidelity " +
                               std::to_string(infidelity) + " (> 1e-6)",
                           infidelity);
  }
  return fine;
}

/// Solves rho' = -i[H, rho] + sum_k rate_k (L rho L^dag - {L^dag L, rho}/2).
inline Trajectory evolve_lindblad(const OperatorMatrix& H, const std::vector<CollapseChannel>& channels,
                                  const MixedState& rho0, const TimeGrid& grid,
                                  const EvolveOptions& opt = {}) {
  hilbert::require_same_layout(H.layout(), rho0.layout(), "evolve_lindblad");
  detail::require_hermitian(H);
  for (const auto& c : channels) {
    hilbert::require_same_layout(c.op.layout(), H.layout(), "collapse channel");
    if (!(c.rate >= 0.0)) throw ConfigError("collapse rates must be non-negative");
  }
  const auto times = grid.times();
  const ModeLayout& layout = H.layout();

  // Restriction to the kept subspace (the identity when none is given).
  std::vector<std::size_t> kept;
  if (opt.subspace) {
    kept = opt.subspace->indices;
  } else {
    kept.resize(layout.dim());
    for (std::size_t i = 0; i < kept.size(); ++i) kept[i] = i;
  }
  const auto n = static_cast<Eigen::Index>(kept.size());
  std::vector<Eigen::Index> position(layout.dim(), -1);
  for (std::size_t k = 0; k < kept.size(); ++k) position[kept[k]] = static_cast<Eigen::Index>(k);

  auto restrict_op = [&](const SparseMatrix& m, const char* what) {
    std::vector<Eigen::Triplet<Complex>> entries;
    for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
        const Eigen::Index pr = position[static_cast<std::size_t>(it.row())];
        const Eigen::Index pc = position[static_cast<std::size_t>(it.col())];
        if (pc >= 0 && pr < 0 && it.value() != Complex(0.0)) {
          throw ConfigError(std::string(what) + " maps the propagation subspace outside itself");
        }
        if (pr >= 0 && pc >= 0) entries.emplace_back(pr, pc, it.value());
      }
    }
    SparseMatrix out(n, n);
    out.setFromTriplets(entries.begin(), entries.end());
    return out;
  };

  SparseMatrix h_eff = restrict_op(H.sparse(), "Hamiltonian");
  std::vector<SparseMatrix> jumps;
  for (const auto& c : channels) {
    if (c.rate == 0.0) continue;
    SparseMatrix l = std::sqrt(model::to_angular(c.rate)) * restrict_op(c.op.sparse(), "collapse channel");
    h_eff -= Complex(0.0, 0.5) * SparseMatrix(SparseMatrix(l.adjoint()) * l);
    jumps.push_back(std::move(l));
  }

  DenseMatrix rho(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      rho(i, j) = rho0.rho()(static_cast<Eigen::Index>(kept[static_cast<std::size_t>(i)]),
                             static_cast<Eigen::Index>(kept[static_cast<std::size_t>(j)]));
    }
  }
  if (std::abs(rho.trace().real() - rho0.trace()) > 1e-10) {
    throw ConfigError("initial state has weight outside the propagation subspace");
  }

  std::vector<SparseMatrix> observables;
  for (const auto& o : opt.observables) observables.push_back(restrict_op(o.op.sparse(), "observable"));

  auto rhs = [&](double, const DenseMatrix& r) -> DenseMatrix {
    const DenseMatrix a = h_eff * r;
    DenseMatrix out = Complex(0.0, -1.0) * a + Complex(0.0, 1.0) * a.adjoint();
    for (const auto& l : jumps) {
      const DenseMatrix lr = l * r;
      out += l * DenseMatrix(lr.adjoint());
    }
    return out;
  };

  auto expand = [&](const DenseMatrix& r) {
    if (!opt.subspace) return MixedState(layout, r);
    DenseMatrix full = DenseMatrix::Zero(static_cast<Eigen::Index>(layout.dim()),
                                         static_cast<Eigen::Index>(layout.dim()));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        full(static_cast<Eigen::Index>(kept[static_cast<std::size_t>(i)]),
             static_cast<Eigen::Index>(kept[static_cast<std::size_t>(j)])) = r(i, j);
      }
    }
    return MixedState(layout, std::move(full));
  };

  const double tol = grid.tolerance * opt.step_tolerance_factor;
  Trajectory traj;
  traj.times = times;
  double step = 0.0;
  integrators::StepStats stats;
  const double trace0 = rho.trace().real();
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (i > 0) integrators::dopri5_advance(rhs, times[i - 1], times[i], rho, tol, tol, step, stats);
    for (std::size_t k = 0; k < observables.size(); ++k) {
      traj.observables[opt.observables[k].name].push_back((observables[k] * rho).trace().real());
    }
    detail::record_drift(traj, std::abs(rho.trace().real() - trace0));
    if (opt.keep_states || i + 1 == times.size()) traj.mixed_states.push_back(expand(rho));
  }
  traj.steps = stats.accepted;
  traj.achieved_error = stats.max_error_ratio * tol;
  return traj;
}

/// Bose-Einstein occupation for a mode at omega_m (Hz) and temperature T (K).
inline double thermal_occupation(double omega_m, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  constexpr double planck = 6.62607015e-34;     // J s
  constexpr double boltzmann = 1.380649e-23;    // J / K
  const double x = planck * omega_m / (boltzmann * temperature);
  return 1.0 / std::expm1(x);
}

/// sqrt(gamma (n_th + 1)) b and sqrt(gamma n_th) b^dag.
inline std::vector<CollapseChannel> thermal_channels(const ModeLayout& layout, const std::string& mode,
                                                     double gamma, double n_th) {
  const auto b = hilbert::annihilation(layout, mode);
  std::vector<CollapseChannel> out;
  out.push_back({b, gamma * (n_th + 1.0)});
  if (n_th > 0.0) out.push_back({hilbert::dagger(b), gamma * n_th});
  return out;
}

enum class LossPlacement {
  /// a1 rewritten through the supermodes, a0 dropped: kappa |M(j,0)|^2 on a+ and a-.
  weighted,
  /// kappa/2 on each of a+ and a-.
  symmetric,
};

/// Optical loss of mode a1 expressed on the reduced {a+, a-} layout.
inline std::vector<CollapseChannel> optical_loss_channels(const model::SupermodeData& s,
                                                          const ModeLayout& layout, double kappa,
                                                          LossPlacement placement) {
  const double w_plus = placement == LossPlacement::weighted ? s.M(0, 0) * s.M(0, 0) : 0.5;
  const double w_minus = placement == LossPlacement::weighted ? s.M(2, 0) * s.M(2, 0) : 0.5;
  return {{hilbert::annihilation(layout, model::labels::plus), kappa * w_plus},
          {hilbert::annihilation(layout, model::labels::minus), kappa * w_minus}};
}

}  // namespace catres::dynamics
