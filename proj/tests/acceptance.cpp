// Acceptance checks A1-A10. Prints one PASS/FAIL line per criterion.
//
//   catres_acceptance            run every criterion
//   catres_acceptance A3 A7      run the named ones

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "catres/catres.hpp"

using namespace catres;
namespace ex = catres::experiments;
namespace labels = model::labels;
using config::json;
using hilbert::ModeLayout;
using hilbert::PureState;
using hilbert::Role;

namespace {

constexpr double kPi = std::numbers::pi;

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  double limit_seconds;  // 0 = no runtime bound
  std::function<Verdict()> check;
};

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(4);
  s << x;
  return s.str();
}

const ex::RunResult& default_two_phonon() {
  static std::optional<ex::RunResult> cached;
  if (!cached) cached = ex::run_two_phonon(config::resolve(json::object(), "two-phonon"));
  return *cached;
}

Verdict a1() {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> w(150e12, 250e12), split(-50e9, 50e9), mu(1e6, 20e9);
  double worst_orth = 0.0, worst_eig = 0.0;
  for (int i = 0; i < 10000; ++i) {
    model::SystemParams p;
    p.omega1 = p.omega3 = w(rng);
    p.omega2 = p.omega1 - split(rng);
    p.mu = mu(rng);
    const auto s = model::supermode_transform(p);
    Eigen::Matrix3d k;
    k << p.omega1, p.mu, 0.0, p.mu, p.omega2, p.mu, 0.0, p.mu, p.omega3;
    worst_orth = std::max(worst_orth, (s.M * s.M.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
    const Eigen::Matrix3d d = s.M * k * s.M.transpose();
    const Eigen::Vector3d want(s.omega_plus, s.omega_zero, s.omega_minus);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        const double e = r == c ? std::abs(d(r, c) - want(r)) / std::abs(want(r)) : std::abs(d(r, c)) / p.omega1;
        worst_eig = std::max(worst_eig, e);
      }
    }
  }
  return {worst_orth < 1e-12 && worst_eig < 1e-9,
          "max|MM^T-I|=" + fmt(worst_orth) + " max rel eig/offdiag err=" + fmt(worst_eig)};
}

Verdict a2() {
  const double g = model::effective_coupling(1.0e6, 5.0e6);
  const auto& r = default_two_phonon();
  const double ratio = r.metrics.at("g_fit_ratio");
  return {g == 1.0e6 / 40.0 && std::abs(ratio - 1.0) < 0.05,
          "g=" + fmt(g) + " Hz, Rabi fit g/g_expected=" + fmt(ratio)};
}

Verdict a3() {
  const auto& m = default_two_phonon().metrics;
  const double p6 = m.at("p_nb2_pure"), p5 = m.at("p_nb2_eff");
  const double dm = m.at("max_abs_diff_N_m"), dp = m.at("max_abs_diff_N_plus");
  return {p6 > 0.99 && p5 > 0.95 && dm < 0.05 && dp < 0.05,
          "P(nb=2) two-phonon H=" + fmt(p6) + " (>0.99), effective H=" + fmt(p5) +
              " (>0.95), max|dN_m|=" + fmt(dm) + " max|dN_+|=" + fmt(dp) + " (<0.05)"};
}

Verdict a4() {
  const auto closed = analysis::three_photon_eigensystem(25.0e3);
  const auto l = ModeLayout({{labels::plus, 4, Role::optical}, {labels::minus, 4, Role::optical}});
  const auto hop = hilbert::dagger(hilbert::annihilation(l, labels::plus)) * hilbert::annihilation(l, labels::minus);
  const DenseMatrix full = (Complex(-1.0) * (hop + hilbert::dagger(hop))).dense();
  Eigen::MatrixXd block(4, 4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      block(i, j) = full(static_cast<Eigen::Index>(l.index_of({3 - i, i})), static_cast<Eigen::Index>(l.index_of({3 - j, j}))).real();
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block);
  double worst = closed.size() == 4 ? 0.0 : 1.0;
  for (const auto& e : closed) {
    Eigen::Index k;
    worst = std::max(worst, (es.eigenvalues().array() - e.in_g).abs().minCoeff(&k));
    worst = std::max(worst, std::abs(std::abs(es.eigenvectors().col(k).dot(e.coefficients.real())) - 1.0));
  }
  return {worst < 1e-10, "max eigenvalue/eigenvector deviation=" + fmt(worst)};
}

// Unnormalized three-photon branch states, one per record |3-j, j>.
Vector literal_branch(int j, double gt, Complex alpha, int dim) {
  const double s3 = std::sqrt(3.0);
  struct Term {
    double coeff, phase;
    int rot;
  };
  static const std::vector<std::vector<Term>> table = {
      {{1.0, 10.5, 3}, {3.0, 3.5, 1}, {3.0, -3.5, -1}, {1.0, -10.5, -3}},
      {{s3, 4.5, 3}, {s3, 1.5, 1}, {-s3, -1.5, -1}, {-s3, -4.5, -3}},
      {{s3, -1.5, 3}, {-s3, -0.5, 1}, {-s3, 0.5, -1}, {s3, 1.5, -3}},
      {{1.0, -7.5, 3}, {-3.0, -2.5, 1}, {3.0, 2.5, -1}, {-1.0, 7.5, -3}},
  };
  Vector v = Vector::Zero(dim);
  for (const auto& t : table[static_cast<std::size_t>(j)]) {
    v += t.coeff / 8.0 * std::polar(1.0, t.phase * gt) *
         hilbert::coherent_amplitudes(dim, alpha * std::polar(1.0, t.rot * gt), 1e-6);
  }
  return v;
}

Verdict a5() {
  const double g = 25.0e3, w = model::to_angular(g);
  const Complex alpha = 3.0;
  const int d = std::max(40, hilbert::required_dim(alpha, 1e-12) + 6);
  const auto layout = model::effective_layout(5, d);
  const auto h = model::build_two_phonon_hamiltonian(g, layout);
  const auto opt = ModeLayout({{labels::plus, 5, Role::optical}, {labels::minus, 5, Role::optical}});
  const auto mech = ModeLayout({{labels::mech, d, Role::mechanical}});
  const auto psi0 = hilbert::tensor(hilbert::fock_state(opt, {3, 0}), hilbert::coherent_state(mech, labels::mech, alpha));
  const auto traj = dynamics::evolve_unitary(h, psi0, dynamics::TimeGrid::at({0.0, kPi / 8.0 / w, kPi / 4.0 / w}));
  double worst_f = 1.0, worst_branch = 0.0;
  for (std::size_t i = 1; i < traj.times.size(); ++i) {
    const double gt = traj.times[i] * w;
    worst_f = std::min(worst_f, analysis::fidelity(analysis::analytic_cat_state(3, alpha, traj.times[i], g, layout),
                                                   traj.pure_states[i]));
    const auto outs = analysis::photon_number_measurement(traj.pure_states[i], {labels::plus, labels::minus});
    if (outs.size() != 4) worst_branch = 1.0;
    for (const auto& o : outs) {
      const auto ref = PureState::normalized(mech, literal_branch(o.n_minus(), gt, alpha, d));
      worst_branch = std::max(worst_branch, 1.0 - analysis::fidelity(ref, *o.conditional_pure));
    }
  }
  return {worst_f > 1.0 - 1e-6 && worst_branch < 1e-8,
          "min fidelity vs closed form=" + fmt(worst_f) + " (>1-1e-6), max branch infidelity=" + fmt(worst_branch) +
              " (<1e-8)"};
}

Verdict a6() {
  bool pass = true;
  std::string detail;
  for (int n : {1, 2, 3, 5}) {
    auto c = config::resolve(json::object(), "cat");
    c["params"]["n_photons"] = n;
    const auto r = ex::run_cat(c);
    const double full = r.metrics.at("selected_residual_n_plus_1");
    const double fewer = r.metrics.at("selected_residual_best_n");
    pass = pass && full < 1e-3 && fewer > 0.1;
    detail += "n=" + std::to_string(n) + " record " + std::to_string(static_cast<int>(r.metrics.at("selected_n_plus"))) +
              "-" + std::to_string(static_cast<int>(r.metrics.at("selected_n_minus"))) + ": " +
              std::to_string(n + 1) + "-fit " + fmt(full) + " " + std::to_string(n) + "-fit " + fmt(fewer) + "; ";
  }
  return {pass, detail + "(need <1e-3 and >0.1)"};
}

Verdict a7() {
  auto c = config::resolve(json::object(), "robustness");
  c["n_th_values"] = json::array({1, 2, 3, 4, 5});
  c["kappa_over_g_values"] = json::array({0.0});
  const auto r = ex::run_robustness(c);
  const double dev = r.metrics.at("thermal_max_probability_deviation");
  const double f = r.metrics.at("thermal_min_fidelity");
  return {dev < 1e-6 && f > 0.97, "max|P-1|=" + fmt(dev) + " (<1e-6), min fidelity over 5 us=" + fmt(f) + " (>0.97)"};
}

Verdict a8() {
  auto c = config::resolve(json::object(), "robustness");
  c["n_th_values"] = json::array({0});
  c["kappa_over_g_values"] = json::array({0.0, 0.25, 0.5, 0.75, 1.0});
  const auto r = ex::run_robustness(c);
  const double f = r.metrics.at("loss_min_final_fidelity");
  const bool dec = r.metrics.at("loss_probability_strictly_decreasing") == 1.0;
  return {f > 0.99 && dec, "min fidelity=" + fmt(f) + " (>0.99), probability strictly decreasing=" + (dec ? "yes" : "no")};
}

Verdict a9() {
  const auto& m = default_two_phonon().metrics;
  double occ = std::max(m.at("drift_N_opt_eff"), m.at("drift_N_opt_pure"));
  double j = m.at("drift_J_pure");
  double norm = m.at("max_norm_deviation");
  for (int n : {1, 3}) {
    auto c = config::resolve(json::object(), "cat");
    c["params"]["n_photons"] = n;
    c["wigner"]["points"] = 21;
    const auto r = ex::run_cat(c);
    occ = std::max(occ, r.metrics.at("drift_N_opt"));
    j = std::max(j, r.metrics.at("drift_J"));
    norm = std::max(norm, r.metrics.at("max_norm_deviation"));
  }
  return {occ < 1e-8 && j < 1e-8 && norm < dynamics::drift_warning,
          "drift N_+ + N_-=" + fmt(occ) + " drift 2N_+ + N_b=" + fmt(j) + " (<1e-8), norm drift=" + fmt(norm) + " (<" +
              fmt(dynamics::drift_warning) + ")"};
}

Verdict a10() {
  std::vector<json> configs;
  auto tp = config::resolve(json::object(), "two-phonon");
  tp["grid"]["n_samples"] = 51;
  configs.push_back(tp);
  auto cat = config::resolve(json::object(), "cat");
  cat["params"]["n_photons"] = 1;
  configs.push_back(cat);
  auto rob = config::resolve(json::object(), "robustness");
  rob["params"]["n_photons"] = 1;
  rob["params"]["alpha"] = json::array({1.5, 0.0});
  rob["n_th_values"] = json::array({0, 2});
  rob["kappa_over_g_values"] = json::array({0.0, 0.5});
  rob["grid"]["n_samples"] = 3;
  configs.push_back(rob);
  auto sw = config::resolve(json{{"sweep", {{"axes", {{{"path", "params.delta"}, {"values", {2.5e6, 5.0e6, 1.0e7}}}}}}}},
                            "sweep");
  sw["grid"]["n_samples"] = 51;
  configs.push_back(sw);

  bool pass = true;
  std::string detail;
  for (const auto& c : configs) {
    const auto a = ex::run_experiment(c, {true, 1});
    const auto b = ex::run_experiment(c, {true, 2});
    bool same = a.files.size() == b.files.size() && !a.files.empty();
    for (std::size_t i = 0; same && i < a.files.size(); ++i) same = a.files[i] == b.files[i];
    pass = pass && same;
    detail += c.at("experiment").get<std::string>() + " " + std::to_string(a.files.size()) + " files " +
              (same ? "identical" : "DIFFER") + "; ";
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {"A1", 5.0, a1},    {"A2", 120.0, a2},   {"A3", 300.0, a3},   {"A4", 1.0, a4}, {"A5", 120.0, a5},
      {"A6", 600.0, a6},  {"A7", 1200.0, a7},  {"A8", 1200.0, a8},  {"A9", 0.0, a9}, {"A10", 0.0, a10},
  };
  std::vector<std::string> wanted(argv + 1, argv + argc);
  for (const auto& w : wanted) {
    bool known = false;
    for (const auto& c : all) known = known || c.id == w;
    if (!known) {
      std::cerr << "unknown criterion '" << w << "'\n";
      return 2;
    }
  }
  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt(secs) + " s";
    if (c.limit_seconds > 0.0) {
      timing += ", limit " + fmt(c.limit_seconds) + " s";
      if (secs > c.limit_seconds) {
        v.pass = false;
        timing += " EXCEEDED";
      }
    }
    failures += v.pass ? 0 : 1;
    std::cout << c.id << " " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << " [" << timing << "]\n" << std::flush;
  }
  return failures == 0 ? 0 : 1;
}
