#pragma once

// The four CLI experiments as in-memory runs. Each run returns its tables as
// strings so callers (the CLI, sweeps, tests) decide where bytes go.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "catres/analysis.hpp"
#include "catres/config.hpp"
#include "catres/dynamics.hpp"
#include "catres/errors.hpp"
#include "catres/hilbert.hpp"
#include "catres/model.hpp"

namespace catres::experiments {

using config::json;
using hilbert::ModeLayout;
using hilbert::PureState;
namespace labels = model::labels;

inline constexpr const char* code_version = "0.1.0";

struct RunContext {
  bool enforce_regime = true;
  unsigned threads = 1;
};

struct RunResult {
  std::string experiment;
  std::string hash;
  json meta;
  std::map<std::string, double> metrics;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, std::string>> files;  // name, contents
  int exit_code = 0;

  const std::string& file(const std::string& name) const {
    for (const auto& [n, body] : files) {
      if (n == name) return body;
    }
    throw Error("run produced no file named '" + name + "'");
  }
};

// ---------------------------------------------------------------- formatting

inline std::string num(double x, int digits = 10) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x == 0.0 ? 0.0 : x);
  return buf;
}

/// CSV with a header row; every row ends in the config hash.
class Table {
 public:
  Table(std::vector<std::string> header, std::string hash) : header_(std::move(header)), hash_(std::move(hash)) {
    header_.push_back("config_hash");
  }

  void add(std::vector<std::string> row) {
    if (row.size() + 1 != header_.size()) throw Error("table row width mismatch");
    row.push_back(hash_);
    rows_.push_back(std::move(row));
  }

  std::string str() const {
    std::string out;
    auto line = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

 private:
  std::vector<std::string> header_;
  std::string hash_;
  std::vector<std::vector<std::string>> rows_;
};

/// First row: corner cell with the hash, then x values. Each later row: p, W(x, p)...
inline std::string wigner_csv(const analysis::WignerGrid& w, const std::string& hash) {
  std::string out = "config_hash=" + hash;
  for (double x : w.x_axis) out += "," + num(x, 9);
  out += '\n';
  for (std::size_t i = 0; i < w.p_axis.size(); ++i) {
    out += num(w.p_axis[i], 9);
    for (Eigen::Index j = 0; j < w.values.cols(); ++j) out += "," + num(w.values(static_cast<Eigen::Index>(i), j), 9);
    out += '\n';
  }
  return out;
}

inline std::string record_name(const std::vector<int>& rec) {
  std::string s;
  for (std::size_t i = 0; i < rec.size(); ++i) s += (i ? "-" : "") + std::to_string(rec[i]);
  return s;
}

// ---------------------------------------------------------------- parameters

struct Setup {
  model::SystemParams params;
  model::SupermodeData supermodes;
  double g = 0.0;          // Hz
  double detuning = 0.0;   // omega+ - omega- - 2 omega_m, Hz
  int n = 1;
  Complex alpha{0.0, 0.0};
  int optical_dim = 3;
  int mech_dim = 4;
  std::vector<std::string> warnings;
};

namespace detail {

inline double number_or(const json& j, double fallback) { return j.is_null() ? fallback : j.get<double>(); }

inline Complex read_alpha(const json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2) return {j[0].get<double>(), j[1].get<double>()};
  throw ConfigError("params.alpha must be a number or [re, im]");
}

}  // namespace detail

/// Reads params/dims/regime blocks, designs the supermodes and checks the regime.
inline Setup make_setup(const json& c, const RunContext& ctx) {
  const json& q = c.at("params");
  Setup s;
  s.n = q.at("n_photons").get<int>();
  if (s.n < 1) throw ConfigError("params.n_photons must be at least 1");
  s.alpha = detail::read_alpha(q.at("alpha"));
  const double g0 = q.at("g0").get<double>();
  const double delta = q.at("delta").get<double>();
  const double omega_m = q.at("omega_m").get<double>();
  const double omega1 = q.at("omega1").get<double>();
  s.g = model::effective_coupling(g0, delta);
  const double detuning_over_g = detail::number_or(q.at("detuning_over_g"), 1.0 - 2.0 * s.n);

  model::SystemParams& p = s.params;
  if (!q.at("mu").is_null() || !q.at("omega2").is_null()) {
    if (q.at("mu").is_null() || q.at("omega2").is_null()) {
      throw ConfigError("params.mu and params.omega2 must be given together");
    }
    p.g0 = g0;
    p.omega_m = omega_m;
    p.omega1 = omega1;
    p.omega2 = q.at("omega2").get<double>();
    p.mu = q.at("mu").get<double>();
    p.omega3 = omega1;
  } else {
    p = model::SystemParams::two_phonon_design(g0, delta, omega_m, detuning_over_g * s.g, omega1);
  }
  p.omega3 = detail::number_or(q.at("omega3"), p.omega3);
  p.allow_omega3_mismatch = q.at("allow_omega3_mismatch").get<bool>();
  p.kappa = q.at("kappa").get<double>();
  p.gamma = q.at("gamma").get<double>();
  p.alpha = s.alpha;
  p.n_photons = s.n;
  if (!q.at("n_th").is_null() && !q.at("temperature").is_null()) {
    throw ConfigError("give params.n_th or params.temperature, not both");
  }
  if (!q.at("n_th").is_null()) p.n_th = q.at("n_th").get<double>();
  if (!q.at("temperature").is_null()) {
    p.temperature = q.at("temperature").get<double>();
    p.n_th = dynamics::thermal_occupation(omega_m, *p.temperature);
  }
  p.validate();

  const json& r = c.at("regime");
  auto violations = p.regime_violations(r.at("min_delta_over_g0").get<double>(),
                                        r.at("min_omega_m_over_delta").get<double>());
  if (!violations.empty() && ctx.enforce_regime) {
    std::string msg = "parameter regime check failed:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw ConfigError(msg);
  }
  for (auto& v : violations) s.warnings.push_back("regime: " + v);

  s.supermodes = model::supermode_transform(p);
  for (auto& v : model::supermode_approximation_issues(s.supermodes)) s.warnings.push_back("supermodes: " + v);
  s.detuning = s.supermodes.two_phonon_detuning();

  const json& d = c.at("dims");
  s.optical_dim = d.at("optical").is_null() ? s.n + 2 : d.at("optical").get<int>();
  if (s.optical_dim < s.n + 1) {
    throw TruncationError("dims.optical = " + std::to_string(s.optical_dim) + " cannot hold " +
                          std::to_string(s.n) + " photons; requires dims.optical >= " + std::to_string(s.n + 1));
  }
  const int needed = hilbert::required_dim(s.alpha, 1e-12) + 2 * s.n;
  const int floor = std::abs(s.alpha) == 0.0 ? 2 * s.n + 2 : 40;
  s.mech_dim = d.at("mech").is_null() ? std::max(floor, needed) : d.at("mech").get<int>();
  if (s.mech_dim < 2 * s.n + 1 && std::abs(s.alpha) == 0.0) {
    throw TruncationError("dims.mech = " + std::to_string(s.mech_dim) + " cannot hold the " +
                          std::to_string(2 * s.n) + " phonons created; requires dims.mech >= " +
                          std::to_string(2 * s.n + 1));
  }
  return s;
}

/// |occupations>|alpha> with the mechanical mode last in `layout`.
inline PureState product_state(const ModeLayout& layout, const std::map<std::string, int>& optical, Complex alpha) {
  const std::size_t mech = layout.mode_index(labels::mech);
  const Vector m = hilbert::coherent_amplitudes(layout.modes()[mech].dim, alpha);
  std::vector<int> occ(layout.size(), 0);
  for (const auto& [label, k] : optical) occ[layout.mode_index(label)] = k;
  const std::size_t base = layout.index_of(std::span<const int>(occ));
  Vector v = Vector::Zero(static_cast<Eigen::Index>(layout.dim()));
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    v(static_cast<Eigen::Index>(base + static_cast<std::size_t>(k) * layout.stride(mech))) = m(k);
  }
  return PureState(layout, std::move(v));
}

inline dynamics::TimeGrid make_grid(const json& c, double default_end) {
  const json& g = c.at("grid");
  return dynamics::TimeGrid::uniform(g.at("t_start").get<double>(), detail::number_or(g.at("t_end"), default_end),
                                     g.at("n_samples").get<int>(), g.at("tolerance").get<double>());
}

inline double max_drift(const std::vector<double>& series) {
  double m = 0.0;
  for (double x : series) m = std::max(m, std::abs(x - series.front()));
  return m;
}

inline json base_meta(const std::string& experiment, const json& c, const std::string& hash, const Setup& s) {
  const auto& sm = s.supermodes;
  return json{{"experiment", experiment},
              {"config_hash", hash},
              {"code_version", code_version},
              {"config", c},
              {"derived",
               {{"g_hz", s.g},
                {"two_phonon_detuning_hz", s.detuning},
                {"mu_hz", s.params.mu},
                {"omega2_hz", s.params.omega2},
                {"g1_hz", sm.g1},
                {"g2_hz", sm.g2},
                {"delta1_hz", sm.delta1},
                {"delta2_hz", sm.delta2},
                {"n_th", s.params.n_th ? json(*s.params.n_th) : json(nullptr)},
                {"optical_dim", s.optical_dim},
                {"mech_dim", s.mech_dim}}}};
}

inline void finish(RunResult& r) {
  r.meta["metrics"] = r.metrics;
  r.meta["warnings"] = r.warnings;
  r.files.emplace_back("meta.json", r.meta.dump(2) + "\n");
}

// ---------------------------------------------------------------- two-phonon

/// Photon-to-two-phonon transfer under the supermode RWA Hamiltonian, the
/// effective Hamiltonian with Kerr terms, and the pure two-phonon exchange.
inline RunResult run_two_phonon(const json& c, const RunContext& ctx = {}) {
  RunResult res;
  res.experiment = "two-phonon";
  res.hash = config::config_hash(c);
  const Setup s = make_setup(c, ctx);
  res.warnings = s.warnings;
  res.meta = base_meta(res.experiment, c, res.hash, s);

  const auto l4 = model::supermode_layout(s.optical_dim, s.mech_dim);
  const auto l5 = model::effective_layout(s.optical_dim, s.mech_dim);
  const auto h4 = model::build_rwa_hamiltonian(s.supermodes, l4);
  const auto h5 = model::build_effective_hamiltonian({s.g, s.detuning, true}, l5);
  const auto h6 = model::build_two_phonon_hamiltonian(s.g, l5);
  const auto psi4 = product_state(l4, {{labels::plus, s.n}}, s.alpha);
  const auto psi5 = product_state(l5, {{labels::plus, s.n}}, s.alpha);

  auto observables = [](const ModeLayout& l) {
    std::vector<dynamics::Observable> o = {{"N_m", hilbert::number(l, labels::mech)},
                                           {"N_plus", hilbert::number(l, labels::plus)},
                                           {"N_minus", hilbert::number(l, labels::minus)}};
    if (!l.has_mode(labels::zero)) {
      o.push_back({"N_opt", o[1].op + o[2].op});
      o.push_back({"J", Complex(2.0) * o[1].op + o[0].op});
    }
    return o;
  };
  dynamics::EvolveOptions o4, o5;
  o4.observables = observables(l4);
  o5.observables = observables(l5);
  o4.keep_states = o5.keep_states = false;
  const bool rabi = s.n == 1 && std::abs(s.alpha) == 0.0 && s.g != 0.0;
  if (rabi) {
    auto target = hilbert::fock_state(l4, {0, 0, 1, 2}).amplitudes();
    o4.observables.push_back({"P_target", hilbert::OperatorMatrix(l4, DenseMatrix(target * target.adjoint()))});
  }

  const auto grid = make_grid(c, 10.0e-6);
  const auto r4 = dynamics::evolve_time_dependent(h4, psi4, grid, o4);
  const auto r5 = dynamics::evolve_time_dependent(h5, psi5, grid, o5);
  const auto r6 = dynamics::evolve_unitary(h6, psi5, grid, o5);

  Table ts({"t", "N_m_rwa", "N_plus_rwa", "N_m_eff", "N_plus_eff", "N_m_pure", "N_plus_pure"}, res.hash);
  double diff_m = 0.0, diff_p = 0.0;
  for (std::size_t i = 0; i < r4.times.size(); ++i) {
    const double a = r4.observables.at("N_m")[i], b = r5.observables.at("N_m")[i];
    const double ap = r4.observables.at("N_plus")[i], bp = r5.observables.at("N_plus")[i];
    diff_m = std::max(diff_m, std::abs(a - b));
    diff_p = std::max(diff_p, std::abs(ap - bp));
    ts.add({num(r4.times[i]), num(a), num(ap), num(b), num(bp), num(r6.observables.at("N_m")[i]),
            num(r6.observables.at("N_plus")[i])});
  }
  res.files.emplace_back("timeseries.csv", ts.str());

  // distributions at the target time
  const double target = c.at("target_time").get<double>();
  const auto tgrid = dynamics::TimeGrid::at({grid.t_start, target}, grid.tolerance);
  dynamics::EvolveOptions plain;
  plain.keep_states = false;
  const auto d4 = analysis::number_distribution(dynamics::evolve_time_dependent(h4, psi4, tgrid, plain).final_pure(), labels::mech);
  const auto d5 = analysis::number_distribution(dynamics::evolve_time_dependent(h5, psi5, tgrid, plain).final_pure(), labels::mech);
  const auto d6 = analysis::number_distribution(dynamics::evolve_unitary(h6, psi5, tgrid, plain).final_pure(), labels::mech);
  Table dist({"n_b", "P_rwa", "P_eff", "P_pure"}, res.hash);
  for (std::size_t k = 0; k < d4.size(); ++k) dist.add({std::to_string(k), num(d4[k]), num(d5[k]), num(d6[k])});
  res.files.emplace_back("distribution.csv", dist.str());

  auto& m = res.metrics;
  m["g_hz"] = s.g;
  m["target_time"] = target;
  m["p_nb2_rwa"] = d4.size() > 2 ? d4[2] : 0.0;
  m["p_nb2_eff"] = d5.size() > 2 ? d5[2] : 0.0;
  m["p_nb2_pure"] = d6.size() > 2 ? d6[2] : 0.0;
  m["max_abs_diff_N_m"] = diff_m;
  m["max_abs_diff_N_plus"] = diff_p;
  m["drift_N_opt_eff"] = max_drift(r5.observables.at("N_opt"));
  m["drift_N_opt_pure"] = max_drift(r6.observables.at("N_opt"));
  m["drift_J_pure"] = max_drift(r6.observables.at("J"));
  m["max_norm_deviation"] = std::max({r4.max_norm_deviation, r5.max_norm_deviation, r6.max_norm_deviation});
  m["achieved_error_rwa"] = r4.achieved_error;
  m["achieved_error_eff"] = r5.achieved_error;
  m["achieved_error_pure"] = r6.achieved_error;
  if (rabi) {
    const json& f = c.at("rabi_fit");
    const auto fit = analysis::fit_two_phonon_rabi(r4.times, r4.observables.at("P_target"),
                                                   f.at("g_lo_ratio").get<double>() * std::abs(s.g),
                                                   f.at("g_hi_ratio").get<double>() * std::abs(s.g));
    m["g_fit_hz"] = fit.g;
    m["g_fit_ratio"] = fit.g / std::abs(s.g);
    m["g_fit_amplitude"] = fit.amplitude;
    m["g_fit_rms"] = fit.rms_residual;
  }
  for (const auto* r : {&r4, &r5, &r6}) {
    for (const auto& w : r->warnings) res.warnings.push_back("integrator: " + w);
  }
  finish(res);
  return res;
}

// ---------------------------------------------------------------- cat

namespace detail {

inline std::vector<double> default_snapshots(int n) {
  const double base = std::numbers::pi / (n + 1);
  return {base / 4.0, base / 2.0, 3.0 * base / 4.0, base};
}

// Highest probability; outcomes within 0.1% of it count as tied and go to the larger n+.
inline std::size_t pick_outcome(const std::vector<analysis::MeasurementOutcome>& outs, const json& selector) {
  if (outs.empty()) throw Error("measurement produced no outcomes");
  if (!selector.is_null()) {
    const auto want = selector.get<std::vector<int>>();
    for (std::size_t i = 0; i < outs.size(); ++i) {
      if (outs[i].record == want) return i;
    }
    throw ConfigError("select_record " + selector.dump() + " has no measurable probability");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < outs.size(); ++i) {
    if (outs[i].probability > outs[0].probability * (1.0 - 1e-3) && outs[i].record > outs[best].record) best = i;
  }
  return best;
}

inline std::vector<double> merged_times(std::vector<double> grid, const std::vector<double>& extra) {
  for (double t : extra) grid.push_back(t);
  std::sort(grid.begin(), grid.end());
  std::vector<double> out;
  for (double t : grid) {
    if (out.empty() || t - out.back() > 1e-12 * std::max(1e-12, std::abs(t))) out.push_back(t);
  }
  return out;
}

inline std::size_t index_of_time(const std::vector<double>& times, double t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (std::abs(times[i] - t) < std::abs(times[best] - t)) best = i;
  }
  return best;
}

inline analysis::WignerSpec wigner_spec(const json& w, Complex alpha) {
  const double half = number_or(w.at("half_width"), 5.5 * std::max(1.0, std::abs(alpha) / 3.0));
  const int pts = w.at("points").get<int>();
  return {-half, half, pts, -half, half, pts};
}

}  // namespace detail

/// Pure two-phonon evolution from |n,0>|alpha> with conditional photon-number
/// measurements, Wigner snapshots and cat-component fits.
inline RunResult run_cat(const json& c, const RunContext& ctx = {}) {
  RunResult res;
  res.experiment = "cat";
  res.hash = config::config_hash(c);
  const Setup s = make_setup(c, ctx);
  res.warnings = s.warnings;
  res.meta = base_meta(res.experiment, c, res.hash, s);
  if (s.g == 0.0) throw ConfigError("the two-phonon coupling is zero; cat states need g0 > 0");

  const auto layout = model::effective_layout(s.optical_dim, s.mech_dim);
  const auto h = model::build_two_phonon_hamiltonian(s.g, layout);
  const auto psi0 = product_state(layout, {{labels::plus, s.n}}, s.alpha);
  const double omega_g = model::to_angular(std::abs(s.g));

  std::vector<double> snaps_gt =
      c.at("snapshots_gt").is_null() ? detail::default_snapshots(s.n) : c.at("snapshots_gt").get<std::vector<double>>();
  if (snaps_gt.empty()) throw ConfigError("snapshots_gt must not be empty");
  std::vector<double> snap_t;
  for (double gt : snaps_gt) {
    if (!(gt > 0.0)) throw ConfigError("snapshot gt values must be positive");
    snap_t.push_back(gt / omega_g);
  }
  const double last = *std::max_element(snap_t.begin(), snap_t.end());
  const auto base = make_grid(c, last);
  const auto times = detail::merged_times(base.times(), snap_t);

  dynamics::EvolveOptions opt;
  opt.observables = {{"N_m", hilbert::number(layout, labels::mech)},
                     {"N_plus", hilbert::number(layout, labels::plus)},
                     {"N_minus", hilbert::number(layout, labels::minus)}};
  opt.observables.push_back({"N_opt", opt.observables[1].op + opt.observables[2].op});
  opt.observables.push_back({"J", Complex(2.0) * opt.observables[1].op + opt.observables[0].op});
  const auto traj = dynamics::evolve_unitary(h, psi0, dynamics::TimeGrid::at(times, base.tolerance), opt);

  Table ts({"t", "gt", "N_m", "N_plus", "N_minus"}, res.hash);
  for (std::size_t i = 0; i < times.size(); ++i) {
    ts.add({num(times[i]), num(times[i] * omega_g), num(traj.observables.at("N_m")[i]),
            num(traj.observables.at("N_plus")[i]), num(traj.observables.at("N_minus")[i])});
  }
  res.files.emplace_back("timeseries.csv", ts.str());

  Table outcomes({"t", "gt", "n_plus", "n_minus", "probability", "residual_n_plus_1", "residual_best_n", "selected"},
                 res.hash);
  Table dist({"t", "gt", "n_plus", "n_minus", "n_b", "probability"}, res.hash);
  const auto wspec = detail::wigner_spec(c.at("wigner"), s.alpha);
  const bool all_records = c.at("wigner").at("all_records").get<bool>();
  const double radius = std::abs(s.alpha);
  json snapshots = json::array();
  auto& m = res.metrics;
  double worst_wigner = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < snap_t.size(); ++k) {
    const std::size_t idx = detail::index_of_time(times, snap_t[k]);
    const auto& psi = traj.pure_states[idx];
    const double gt = snaps_gt[k];
    auto outs = analysis::photon_number_measurement(psi, {labels::plus, labels::minus});
    const std::size_t sel = detail::pick_outcome(outs, c.at("select_record"));
    json snap = {{"gt", gt}, {"t", snap_t[k]}, {"selected_record", outs[sel].record}};
    const auto angles = analysis::ladder_angles(s.n, gt, s.alpha);
    for (std::size_t i = 0; i < outs.size(); ++i) {
      const auto& o = outs[i];
      double r_full = std::numeric_limits<double>::quiet_NaN();
      double r_fewer = std::numeric_limits<double>::quiet_NaN();
      try {
        r_full = analysis::cat_component_fit(*o.conditional_pure, angles, radius).residual;
        r_fewer = analysis::best_reduced_residual(*o.conditional_pure, angles, radius);
      } catch (const ConditioningError& e) {
        res.warnings.push_back("cat fit at gt=" + num(gt, 6) + ": " + e.what());
      }
      outcomes.add({num(snap_t[k]), num(gt), std::to_string(o.n_plus()), std::to_string(o.n_minus()),
                    num(o.probability), num(r_full), num(r_fewer), i == sel ? "1" : "0"});
      const auto p = analysis::number_distribution(*o.conditional_pure, labels::mech);
      for (std::size_t nb = 0; nb < p.size(); ++nb) {
        dist.add({num(snap_t[k]), num(gt), std::to_string(o.n_plus()), std::to_string(o.n_minus()),
                  std::to_string(nb), num(p[nb])});
      }
      if (i == sel || all_records) {
        const auto w = analysis::wigner(o.conditional_state, wspec);
        if (w.warning) res.warnings.push_back("wigner grid at gt=" + num(gt, 6) + " holds " + num(w.integral, 6) + " of the mass");
        worst_wigner = std::min(worst_wigner, w.integral);
        res.files.emplace_back("wigner_" + record_name(o.record) + "_" + num(snap_t[k], 6) + ".csv",
                               wigner_csv(w, res.hash));
      }
      if (k + 1 == snap_t.size() && i == sel) {
        m["selected_probability"] = o.probability;
        m["selected_residual_n_plus_1"] = r_full;
        m["selected_residual_best_n"] = r_fewer;
        m["selected_n_plus"] = o.n_plus();
        m["selected_n_minus"] = o.n_minus();
      }
    }
    if (s.n == 1 || s.n == 3) {
      const auto analytic = analysis::analytic_cat_state(s.n, s.alpha, snap_t[k], std::abs(s.g), layout);
      snap["fidelity_vs_large_alpha_form"] = analysis::fidelity(analytic, psi);
    }
    snap["n_outcomes"] = outs.size();
    snapshots.push_back(snap);
  }
  res.files.emplace_back("outcomes.csv", outcomes.str());
  res.files.emplace_back("distribution.csv", dist.str());
  res.meta["snapshots"] = snapshots;
  res.meta["wigner_convention"] = analysis::WignerGrid::convention;

  // rotation rates read off the Husimi peaks of the mechanical state at the last snapshot,
  // optical modes traced out so every eigenbranch contributes
  {
    const std::size_t k = snap_t.size() - 1;
    const auto rho_m = hilbert::partial_trace(traj.pure_states[detail::index_of_time(times, snap_t[k])], {labels::mech});
    json rates = json::array();
    for (double a : analysis::ring_peaks(rho_m, radius)) {
      rates.push_back(std::remainder(a - std::arg(s.alpha), 2.0 * std::numbers::pi) / snaps_gt[k]);
    }
    res.meta["rotation_rates_over_g"] = rates;
    m["distinct_rotation_rates"] = static_cast<double>(rates.size());
  }
  m["drift_N_opt"] = max_drift(traj.observables.at("N_opt"));
  m["drift_J"] = max_drift(traj.observables.at("J"));
  m["max_norm_deviation"] = traj.max_norm_deviation;
  m["achieved_error"] = traj.achieved_error;
  m["min_wigner_integral"] = worst_wigner;
  for (const auto& w : traj.warnings) res.warnings.push_back("integrator: " + w);
  finish(res);
  return res;
}

// ---------------------------------------------------------------- worker pool

inline unsigned worker_count(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CATRES_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

/// Runs job(i) for i < count on up to `threads` workers. Results land by index,
/// so the output never depends on scheduling.
template <class Job>
void parallel_for(std::size_t count, unsigned threads, Job&& job) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
  }
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------- robustness

struct NoisePoint {
  double n_th = 0.0;
  double kappa_over_g = 0.0;
};

struct NoiseResult {
  std::vector<double> probability;     // full-sector probability per time
  std::vector<double> fidelity_min;    // worst full-sector record per time
  std::vector<double> fidelity_mean;   // probability-weighted per time
  std::vector<std::vector<std::string>> final_records;
  std::vector<double> final_distribution;
  double max_trace_deviation = 0.0;
  double achieved_error = 0.0;
  std::vector<std::string> warnings;
  std::string error;
  int exit_code = 0;
};

/// Lindblad runs over thermal occupations and optical losses, compared record
/// by record with the lossless conditional states.
inline RunResult run_robustness(const json& c, const RunContext& ctx = {}) {
  RunResult res;
  res.experiment = "robustness";
  res.hash = config::config_hash(c);
  const Setup s = make_setup(c, ctx);
  res.warnings = s.warnings;
  res.meta = base_meta(res.experiment, c, res.hash, s);
  if (s.g == 0.0) throw ConfigError("the two-phonon coupling is zero; cat states need g0 > 0");

  const auto layout = model::effective_layout(s.optical_dim, s.mech_dim);
  const auto h = model::build_two_phonon_hamiltonian(s.g, layout);
  const auto psi0 = product_state(layout, {{labels::plus, s.n}}, s.alpha);
  const auto grid = make_grid(c, 5.0e-6);
  const auto times = grid.times();

  const std::string placement_name = c.at("loss_placement").get<std::string>();
  if (placement_name != "weighted" && placement_name != "symmetric") {
    throw ConfigError("loss_placement must be 'weighted' or 'symmetric'");
  }
  const auto placement =
      placement_name == "weighted" ? dynamics::LossPlacement::weighted : dynamics::LossPlacement::symmetric;

  std::optional<dynamics::Subspace> sector;
  std::size_t side = layout.dim();
  if (c.at("subspace_projection").get<bool>()) {
    sector = dynamics::photon_sector(layout, {labels::plus, labels::minus}, s.n);
    side = sector->indices.size();
  }
  const double liouvillian = static_cast<double>(side) * static_cast<double>(side);
  if (liouvillian > c.at("max_liouvillian_dim").get<double>()) {
    throw ConfigError("Liouvillian dimension " + num(liouvillian) + " exceeds max_liouvillian_dim " +
                      c.at("max_liouvillian_dim").dump() +
                      (sector ? "" : "; set subspace_projection=true to restrict to the photon-number <= n sector"));
  }

  std::vector<NoisePoint> points;
  std::vector<double> thermal = c.at("n_th_values").get<std::vector<double>>();
  if (s.params.n_th) thermal = {*s.params.n_th};
  for (double n_th : thermal) points.push_back({n_th, 0.0});
  for (double k : c.at("kappa_over_g_values").get<std::vector<double>>()) points.push_back({0.0, k});
  for (const auto& p : points) {
    if (!(p.n_th >= 0.0) || !(p.kappa_over_g >= 0.0)) throw ConfigError("n_th and kappa/g values must be non-negative");
  }
  std::sort(points.begin(), points.end(), [](const NoisePoint& a, const NoisePoint& b) {
    return std::pair(a.n_th, a.kappa_over_g) < std::pair(b.n_th, b.kappa_over_g);
  });
  points.erase(std::unique(points.begin(), points.end(),
                           [](const NoisePoint& a, const NoisePoint& b) {
                             return a.n_th == b.n_th && a.kappa_over_g == b.kappa_over_g;
                           }),
               points.end());

  // lossless reference
  const auto ref = dynamics::evolve_unitary(h, psi0, grid);
  std::vector<std::map<std::vector<int>, PureState>> lossless(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    for (auto& o : analysis::photon_number_measurement(ref.pure_states[i], {labels::plus, labels::minus})) {
      lossless[i].emplace(o.record, *o.conditional_pure);
    }
  }

  const auto rho0 = hilbert::MixedState::from_pure(psi0);
  std::vector<NoiseResult> results(points.size());
  parallel_for(points.size(), ctx.threads, [&](std::size_t idx) {
    NoiseResult& out = results[idx];
    const NoisePoint& pt = points[idx];
    try {
      std::vector<dynamics::CollapseChannel> channels;
      if (s.params.gamma > 0.0) {
        for (auto& ch : dynamics::thermal_channels(layout, labels::mech, s.params.gamma, pt.n_th)) channels.push_back(ch);
      }
      if (pt.kappa_over_g > 0.0) {
        for (auto& ch : dynamics::optical_loss_channels(s.supermodes, layout, pt.kappa_over_g * std::abs(s.g), placement)) {
          channels.push_back(ch);
        }
      }
      dynamics::EvolveOptions opt;
      opt.subspace = sector;
      const auto traj = dynamics::evolve_lindblad(h, channels, rho0, grid, opt);
      out.max_trace_deviation = traj.max_norm_deviation;
      out.achieved_error = traj.achieved_error;
      out.warnings = traj.warnings;
      for (std::size_t i = 0; i < times.size(); ++i) {
        const auto outs = analysis::photon_number_measurement(traj.mixed_states[i], {labels::plus, labels::minus});
        double prob = 0.0, f_min = 1.0, f_sum = 0.0;
        for (const auto& o : outs) {
          if (o.total() != s.n) continue;
          prob += o.probability;
          auto it = lossless[i].find(o.record);
          const double f = it == lossless[i].end() ? 0.0 : analysis::fidelity(it->second, o.conditional_state);
          f_min = std::min(f_min, f);
          f_sum += o.probability * f;
          if (i + 1 == times.size()) {
            out.final_records.push_back({std::to_string(o.n_plus()), std::to_string(o.n_minus()),
                                         num(o.probability), num(f)});
          }
        }
        out.probability.push_back(prob);
        out.fidelity_min.push_back(prob > 0.0 ? f_min : 0.0);
        out.fidelity_mean.push_back(prob > 0.0 ? f_sum / prob : 0.0);
      }
      out.final_distribution = analysis::number_distribution(traj.mixed_states.back(), labels::mech);
      std::sort(out.final_records.begin(), out.final_records.end());
    } catch (const IntegrationError& e) {
      out.error = e.what();
      out.exit_code = 3;
    }
  });

  Table ts({"n_th", "kappa_over_g", "t", "probability", "fidelity_min", "fidelity_weighted"}, res.hash);
  Table rec({"n_th", "kappa_over_g", "t", "n_plus", "n_minus", "probability", "fidelity"}, res.hash);
  Table dist({"n_th", "kappa_over_g", "t", "n_b", "probability"}, res.hash);
  json summary = json::array();
  double thermal_prob_dev = 0.0, thermal_f_min = 1.0, loss_f_min = 1.0;
  std::vector<std::pair<double, double>> loss_final;  // (kappa/g, final probability)
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& pt = points[k];
    const auto& r = results[k];
    if (!r.error.empty()) {
      res.warnings.push_back("point n_th=" + num(pt.n_th) + " kappa/g=" + num(pt.kappa_over_g) + ": " + r.error);
      res.exit_code = std::max(res.exit_code, r.exit_code);
      continue;
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
      ts.add({num(pt.n_th), num(pt.kappa_over_g), num(times[i]), num(r.probability[i]), num(r.fidelity_min[i]),
              num(r.fidelity_mean[i])});
    }
    for (const auto& row : r.final_records) {
      std::vector<std::string> cells = {num(pt.n_th), num(pt.kappa_over_g), num(times.back())};
      cells.insert(cells.end(), row.begin(), row.end());
      rec.add(cells);
    }
    for (std::size_t nb = 0; nb < r.final_distribution.size(); ++nb) {
      dist.add({num(pt.n_th), num(pt.kappa_over_g), num(times.back()), std::to_string(nb), num(r.final_distribution[nb])});
    }
    const double f_min = *std::min_element(r.fidelity_min.begin(), r.fidelity_min.end());
    if (pt.kappa_over_g == 0.0) {
      for (double p : r.probability) thermal_prob_dev = std::max(thermal_prob_dev, std::abs(p - 1.0));
      thermal_f_min = std::min(thermal_f_min, f_min);
    }
    if (pt.n_th == 0.0) {
      loss_f_min = std::min(loss_f_min, r.fidelity_min.back());
      loss_final.emplace_back(pt.kappa_over_g, r.probability.back());
    }
    summary.push_back({{"n_th", pt.n_th},
                       {"kappa_over_g", pt.kappa_over_g},
                       {"final_probability", r.probability.back()},
                       {"final_fidelity_min", r.fidelity_min.back()},
                       {"min_fidelity_over_time", f_min},
                       {"max_trace_deviation", r.max_trace_deviation},
                       {"achieved_error", r.achieved_error}});
    for (const auto& w : r.warnings) res.warnings.push_back("integrator: " + w);
  }
  res.files.emplace_back("timeseries.csv", ts.str());
  res.files.emplace_back("outcomes.csv", rec.str());
  res.files.emplace_back("distribution.csv", dist.str());
  res.meta["points"] = summary;

  bool decreasing = loss_final.size() >= 2;
  for (std::size_t i = 1; i < loss_final.size(); ++i) decreasing = decreasing && loss_final[i].second < loss_final[i - 1].second;
  auto& m = res.metrics;
  m["thermal_max_probability_deviation"] = thermal_prob_dev;
  m["thermal_min_fidelity"] = thermal_f_min;
  m["loss_min_final_fidelity"] = loss_f_min;
  m["loss_probability_strictly_decreasing"] = decreasing ? 1.0 : 0.0;
  m["reference_max_norm_deviation"] = ref.max_norm_deviation;
  finish(res);
  return res;
}

// ---------------------------------------------------------------- dispatch

inline RunResult run_sweep(const json& c, const RunContext& ctx);

inline RunResult run_experiment(const json& c, const RunContext& ctx = {}) {
  const std::string name = c.at("experiment").get<std::string>();
  if (name == "two-phonon") return run_two_phonon(c, ctx);
  if (name == "cat") return run_cat(c, ctx);
  if (name == "robustness") return run_robustness(c, ctx);
  if (name == "sweep") return run_sweep(c, ctx);
  throw ConfigError("unknown experiment '" + name + "'");
}

// ---------------------------------------------------------------- sweep

/// Runs the base experiment at every point of a 1-2 axis grid. With no axes
/// it is the base run itself.
inline RunResult run_sweep(const json& c, const RunContext& ctx) {
  json base = c;
  const json sweep = base.at("sweep");
  base.erase("sweep");
  base["experiment"] = sweep.at("experiment");
  const json& axes = sweep.at("axes");
  if (!axes.is_array()) throw ConfigError("sweep.axes must be a list");
  if (axes.empty()) return run_experiment(base, ctx);
  if (axes.size() > 2) throw ConfigError("a sweep takes one or two axes");

  std::vector<std::string> paths;
  std::vector<std::vector<double>> values;
  for (const auto& a : axes) {
    const std::string path = a.at("path").get<std::string>();
    const json& current = config::at_path(base, path);
    if (!(current.is_number() || current.is_null())) throw ConfigError("sweep axis '" + path + "' is not a numeric field");
    if (!a.at("values").is_array() || a.at("values").empty()) throw ConfigError("sweep axis '" + path + "' needs values");
    std::vector<double> v;
    for (const auto& x : a.at("values")) {
      if (!x.is_number()) throw ConfigError("sweep axis '" + path + "' has a non-numeric value " + x.dump());
      v.push_back(x.get<double>());
    }
    std::sort(v.begin(), v.end());
    paths.push_back(path);
    values.push_back(std::move(v));
  }
  std::vector<std::vector<double>> grid;
  for (double x : values[0]) {
    if (values.size() == 1) {
      grid.push_back({x});
    } else {
      for (double y : values[1]) grid.push_back({x, y});
    }
  }

  RunResult res;
  res.experiment = "sweep";
  res.hash = config::config_hash(c);
  struct Point {
    std::map<std::string, double> metrics;
    std::vector<std::string> warnings;
    std::string hash;
    std::string status = "ok";
    int exit_code = 0;
  };
  std::vector<Point> pts(grid.size());
  RunContext inner = ctx;
  inner.enforce_regime = false;
  inner.threads = 1;
  parallel_for(grid.size(), ctx.threads, [&](std::size_t i) {
    json pc = base;
    for (std::size_t a = 0; a < paths.size(); ++a) config::set_path(pc, paths[a], grid[i][a]);
    pts[i].hash = config::config_hash(pc);
    try {
      auto r = run_experiment(pc, inner);
      pts[i].metrics = std::move(r.metrics);
      pts[i].warnings = std::move(r.warnings);
      pts[i].exit_code = r.exit_code;
    } catch (const IntegrationError& e) {
      pts[i].status = std::string("integration error: ") + e.what();
      pts[i].exit_code = 3;
    } catch (const Error& e) {
      pts[i].status = std::string("error: ") + e.what();
      pts[i].exit_code = 2;
    }
  });

  std::set<std::string> names;
  for (const auto& p : pts) {
    for (const auto& [k, v] : p.metrics) names.insert(k);
  }
  std::vector<std::string> header = paths;
  header.push_back("status");
  header.push_back("point_hash");
  header.insert(header.end(), names.begin(), names.end());
  Table t(header, res.hash);
  json jpoints = json::array();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<std::string> row;
    for (double x : grid[i]) row.push_back(num(x));
    std::string status = pts[i].status;
    for (char& ch : status) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    row.push_back(status);
    row.push_back(pts[i].hash);
    for (const auto& n : names) {
      auto it = pts[i].metrics.find(n);
      row.push_back(it == pts[i].metrics.end() ? "" : num(it->second));
    }
    t.add(row);
    jpoints.push_back({{"values", grid[i]}, {"point_hash", pts[i].hash}, {"status", pts[i].status},
                       {"warnings", pts[i].warnings}});
    res.exit_code = std::max(res.exit_code, pts[i].exit_code);
  }
  res.files.emplace_back("sweep.csv", t.str());
  res.meta = json{{"experiment", "sweep"},
                  {"base_experiment", base.at("experiment")},
                  {"config_hash", res.hash},
                  {"code_version", code_version},
                  {"config", c},
                  {"axes", paths},
                  {"points", jpoints}};
  finish(res);
  return res;
}

// ---------------------------------------------------------------- output

inline void write_outputs(const RunResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, body] : r.files) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    out << body;
  }
}

}  // namespace catres::experiments
