#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "catres/catres.hpp"

using namespace catres;
namespace ex = catres::experiments;
using config::json;

namespace {

json short_two_phonon() {
  auto c = config::resolve(json::object(), "two-phonon");
  c["grid"]["t_end"] = 1.0e-6;
  c["grid"]["n_samples"] = 11;
  c["target_time"] = 1.0e-6;
  c["dims"]["mech"] = 8;
  return c;
}

json small_cat(int n) {
  auto c = config::resolve(json::object(), "cat");
  c["params"]["n_photons"] = n;
  c["params"]["alpha"] = json::array({1.5, 0.0});
  c["grid"]["n_samples"] = 9;
  c["wigner"]["points"] = 21;
  return c;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("catres_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" CATRES_CLI_PATH "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class ThreadsEnv {
 public:
  explicit ThreadsEnv(const char* value) {
    if (const char* old = std::getenv("CATRES_THREADS")) saved_ = old;
    if (value) {
      setenv("CATRES_THREADS", value, 1);
    } else {
      unsetenv("CATRES_THREADS");
    }
  }
  ~ThreadsEnv() {
    if (saved_.empty()) {
      unsetenv("CATRES_THREADS");
    } else {
      setenv("CATRES_THREADS", saved_.c_str(), 1);
    }
  }

 private:
  std::string saved_;
};

}  // namespace

TEST(Config, ResolveFillsDefaults) {
  const auto c = config::resolve(json::object(), "two-phonon");
  EXPECT_EQ(c.at("experiment"), "two-phonon");
  EXPECT_DOUBLE_EQ(c.at("params").at("g0").get<double>(), 1.0e6);
  EXPECT_DOUBLE_EQ(c.at("target_time").get<double>(), 7.07e-6);
  EXPECT_EQ(c.at("grid").at("n_samples"), 400);
  const auto r = config::resolve(json::object(), "robustness");
  EXPECT_DOUBLE_EQ(r.at("params").at("omega_m").get<double>(), 10.0e9);
  EXPECT_DOUBLE_EQ(r.at("params").at("gamma").get<double>(), 10.0);
}

TEST(Config, RejectsUnknownKeysAndExperiments) {
  EXPECT_THROW(config::resolve(json{{"params", {{"g1", 1.0}}}}, "cat"), ConfigError);
  EXPECT_THROW(config::resolve(json{{"params", 3}}, "cat"), ConfigError);
  EXPECT_THROW(config::resolve(json::object(), "spin"), ConfigError);
  EXPECT_THROW(config::resolve(json{{"experiment", "cat"}}, "two-phonon"), ConfigError);
  EXPECT_THROW(config::resolve(json{{"sweep", {{"experiment", "sweep"}}}}, "sweep"), ConfigError);
}

TEST(Config, OverridesByDottedPath) {
  auto c = config::resolve(json::object(), "cat");
  config::apply_override(c, "params.alpha=[2.5,0.5]");
  config::apply_override(c, "params.n_photons=5");
  config::apply_override(c, "select_record=[4,0]");
  EXPECT_EQ(c.at("params").at("alpha"), json::array({2.5, 0.5}));
  EXPECT_EQ(c.at("params").at("n_photons"), 5);
  EXPECT_EQ(config::at_path(c, "select_record"), json::array({4, 0}));
  EXPECT_THROW(config::apply_override(c, "params.nope=1"), ConfigError);
  EXPECT_THROW(config::apply_override(c, "params.g0"), ConfigError);
  EXPECT_THROW(config::apply_override(c, "params..g0=1"), ConfigError);
}

TEST(Config, NullOverlayIsStored) {
  const auto c = config::resolve(json{{"params", {{"detuning_over_g", nullptr}}}}, "two-phonon");
  EXPECT_TRUE(c.at("params").at("detuning_over_g").is_null());
}

TEST(Config, HashIsStableAndSensitive) {
  const auto a = config::resolve(json::object(), "cat");
  const auto b = config::resolve(json::parse(a.dump()), "cat");
  EXPECT_EQ(config::config_hash(a), config::config_hash(b));
  EXPECT_EQ(config::config_hash(a).size(), 16u);
  auto d = a;
  d["params"]["g0"] = 1.0e6 + 1.0;
  EXPECT_NE(config::config_hash(a), config::config_hash(d));
}

TEST(Config, ParseFileErrors) {
  const auto dir = scratch("parse");
  EXPECT_THROW(config::parse_file((dir / "missing.json").string()), ConfigError);
  std::ofstream(dir / "bad.json") << "[1, 2";
  EXPECT_THROW(config::parse_file((dir / "bad.json").string()), ConfigError);
  std::ofstream(dir / "ok.json") << R"({"params": {"g0": 2e6}})";
  EXPECT_DOUBLE_EQ(config::parse_file((dir / "ok.json").string()).at("params").at("g0").get<double>(), 2e6);
}

TEST(Formatting, NumbersAndTables) {
  EXPECT_EQ(ex::num(0.1, 9), "0.1");
  EXPECT_EQ(ex::num(-0.0), "0");
  EXPECT_EQ(ex::num(std::nan("")), "nan");
  ex::Table t({"a", "b"}, "abc");
  t.add({"1", "2"});
  EXPECT_EQ(t.str(), "a,b,config_hash\n1,2,abc\n");
  EXPECT_THROW(t.add({"1"}), Error);
  EXPECT_EQ(ex::record_name({3, 0}), "3-0");
}

TEST(TwoPhonon, WritesTablesWithHash) {
  const auto c = short_two_phonon();
  const auto r = ex::run_two_phonon(c);
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.hash, config::config_hash(c));
  for (const char* name : {"timeseries.csv", "distribution.csv", "meta.json"}) {
    EXPECT_NE(r.file(name).find(r.hash), std::string::npos) << name;
  }
  const auto ts = lines_of(r.file("timeseries.csv"));
  ASSERT_EQ(ts.size(), 12u);
  EXPECT_EQ(ts[0], "t,N_m_rwa,N_plus_rwa,N_m_eff,N_plus_eff,N_m_pure,N_plus_pure,config_hash");
  EXPECT_EQ(ts[1].rfind("0,0,1,0,1,0,1,", 0), 0u) << ts[1];
  const auto meta = json::parse(r.file("meta.json"));
  EXPECT_EQ(meta.at("config_hash"), r.hash);
  EXPECT_EQ(meta.at("code_version"), ex::code_version);
  EXPECT_FALSE(meta.contains("wall_seconds"));
  EXPECT_LT(r.metrics.at("drift_N_opt_pure"), 1e-8);
  EXPECT_LT(r.metrics.at("drift_J_pure"), 1e-8);
}

TEST(TwoPhonon, ZeroCouplingStaysInVacuum) {
  auto c = short_two_phonon();
  c["params"]["g0"] = 0.0;
  const auto r = ex::run_two_phonon(c, {false, 1});
  const auto ts = lines_of(r.file("timeseries.csv"));
  for (std::size_t i = 1; i < ts.size(); ++i) {
    std::stringstream row(ts[i]);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    EXPECT_EQ(cells[1], "0");
    EXPECT_EQ(cells[3], "0");
    EXPECT_EQ(cells[5], "0");
  }
}

TEST(TwoPhonon, ByteIdenticalReruns) {
  const auto c = short_two_phonon();
  const auto a = ex::run_two_phonon(c);
  const auto b = ex::run_two_phonon(c);
  ASSERT_EQ(a.files.size(), b.files.size());
  for (std::size_t i = 0; i < a.files.size(); ++i) {
    EXPECT_EQ(a.files[i].first, b.files[i].first);
    EXPECT_EQ(a.files[i].second, b.files[i].second) << a.files[i].first;
  }
}

TEST(Regime, ViolationRefusedUnlessDisabled) {
  auto c = short_two_phonon();
  c["params"]["delta"] = 2.0e6;
  try {
    ex::run_two_phonon(c);
    FAIL() << "expected refusal";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("delta"), std::string::npos) << e.what();
  }
  const auto r = ex::run_two_phonon(c, {false, 1});
  bool warned = false;
  for (const auto& w : r.warnings) warned = warned || w.rfind("regime:", 0) == 0;
  EXPECT_TRUE(warned);
}

TEST(Cat, WignerFilesNamedByRecordAndTime) {
  auto c = small_cat(1);
  c["snapshots_gt"] = json::array({std::numbers::pi / 2});
  const auto r = ex::run_cat(c);
  const double t = std::numbers::pi / 2 / model::to_angular(model::effective_coupling(1.0e6, 5.0e6));
  const std::string name = "wigner_" + ex::record_name({static_cast<int>(r.metrics.at("selected_n_plus")),
                                                         static_cast<int>(r.metrics.at("selected_n_minus"))}) +
                           "_" + ex::num(t, 6) + ".csv";
  const auto rows = lines_of(r.file(name));
  ASSERT_EQ(rows.size(), 22u);
  EXPECT_EQ(rows[0].rfind("config_hash=" + r.hash + ",", 0), 0u);
  std::size_t commas = 0;
  for (char ch : rows[5]) commas += ch == ',';
  EXPECT_EQ(commas, 21u);
  const auto outcomes = lines_of(r.file("outcomes.csv"));
  EXPECT_EQ(outcomes[0], "t,gt,n_plus,n_minus,probability,residual_n_plus_1,residual_best_n,selected,config_hash");
  EXPECT_GE(outcomes.size(), 3u);
}

TEST(Cat, ZeroCouplingRejected) {
  auto c = small_cat(1);
  c["params"]["g0"] = 0.0;
  EXPECT_THROW(ex::run_cat(c, {false, 1}), ConfigError);
}

TEST(Cat, UndersizedMechanicalDimRejected) {
  auto c = small_cat(1);
  c["dims"]["mech"] = 5;
  EXPECT_THROW(ex::run_cat(c), TruncationError);
}

TEST(Cat, UnmeasurableSelectorRejected) {
  auto c = small_cat(1);
  c["snapshots_gt"] = json::array({0.3});
  c["select_record"] = json::array({0, 0});
  EXPECT_THROW(ex::run_cat(c), ConfigError);
}

TEST(Robustness, LiouvillianCapSuggestsProjection) {
  auto c = config::resolve(json::object(), "robustness");
  c["params"]["n_photons"] = 1;
  c["params"]["alpha"] = json::array({1.0, 0.0});
  c["subspace_projection"] = false;
  c["max_liouvillian_dim"] = 100;
  try {
    ex::run_robustness(c);
    FAIL() << "expected refusal";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("subspace_projection"), std::string::npos);
  }
}

TEST(Robustness, ClosedLimitMatchesCatRun) {
  auto c = config::resolve(json::object(), "robustness");
  c["params"]["n_photons"] = 1;
  c["params"]["alpha"] = json::array({1.0, 0.0});
  c["params"]["gamma"] = 0.0;
  c["n_th_values"] = json::array({0});
  c["kappa_over_g_values"] = json::array({0.0});
  c["grid"]["t_end"] = 2.0e-6;
  c["grid"]["n_samples"] = 3;
  const auto r = ex::run_robustness(c);
  EXPECT_LT(r.metrics.at("thermal_max_probability_deviation"), 1e-6);
  EXPECT_GT(r.metrics.at("thermal_min_fidelity"), 1.0 - 1e-7);
}

TEST(Sweep, EmptyAxesIsTheBaseRun) {
  auto sc = config::resolve(json{{"grid", {{"t_end", 1.0e-6}, {"n_samples", 11}}},
                                 {"target_time", 1.0e-6},
                                 {"dims", {{"mech", 8}}}},
                            "sweep");
  const auto s = ex::run_sweep(sc, {});
  const auto b = ex::run_two_phonon(short_two_phonon());
  EXPECT_EQ(s.hash, b.hash);
  EXPECT_EQ(s.file("timeseries.csv"), b.file("timeseries.csv"));
}

TEST(Sweep, OutputIndependentOfWorkerCount) {
  auto sc = config::resolve(json{{"grid", {{"t_end", 5.0e-7}, {"n_samples", 6}}},
                                 {"target_time", 5.0e-7},
                                 {"dims", {{"mech", 8}}},
                                 {"sweep", {{"axes", {{{"path", "params.delta"}, {"values", {1.0e7, 5.0e6, 2.5e6}}}}}}}},
                            "sweep");
  const auto one = ex::run_sweep(sc, {true, 1});
  const auto three = ex::run_sweep(sc, {true, 3});
  EXPECT_EQ(one.file("sweep.csv"), three.file("sweep.csv"));
  EXPECT_EQ(one.file("meta.json"), three.file("meta.json"));
  const auto rows = lines_of(one.file("sweep.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1].rfind("2500000,", 0), 0u);
  EXPECT_EQ(rows[3].rfind("10000000,", 0), 0u);
}

TEST(Sweep, RejectsBadAxes) {
  auto sc = config::resolve(json::object(), "sweep");
  sc["sweep"]["axes"] = json::array({{{"path", "params.allow_omega3_mismatch"}, {"values", {1}}}});
  EXPECT_THROW(ex::run_sweep(sc, {}), ConfigError);
  sc["sweep"]["axes"] = json::array({{{"path", "params.delta"}, {"values", {"x"}}}});
  EXPECT_THROW(ex::run_sweep(sc, {}), ConfigError);
  sc["sweep"]["axes"] = json::array({{{"path", "params.delta"}, {"values", json::array()}}});
  EXPECT_THROW(ex::run_sweep(sc, {}), ConfigError);
}

TEST(Threads, EnvironmentCapsWorkers) {
  {
    ThreadsEnv env("2");
    EXPECT_LE(ex::worker_count(100), 2u);
    EXPECT_EQ(ex::worker_count(1), 1u);
  }
  {
    ThreadsEnv env("1");
    EXPECT_EQ(ex::worker_count(100), 1u);
  }
  ThreadsEnv env(nullptr);
  EXPECT_GE(ex::worker_count(100), 1u);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  std::ofstream(dir / "tp.json") << R"({"grid": {"t_end": 1e-7, "n_samples": 3}, "target_time": 1e-7, "dims": {"mech": 8}})";
  std::ofstream(dir / "bad.json") << R"({"params": {"bogus": 1}})";
  std::ofstream(dir / "tiny.json") << R"({"grid": {"t_end": 1e-7, "n_samples": 3, "tolerance": 1e-30}, "dims": {"mech": 8}})";
  const std::string out = (dir / "out").string();
  EXPECT_EQ(run_cli("two-phonon --config " + (dir / "tp.json").string() + " --out " + out), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "timeseries.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "timing.json"));
  EXPECT_EQ(run_cli("two-phonon --config " + (dir / "bad.json").string() + " --out " + out), 2);
  EXPECT_EQ(run_cli("two-phonon --config " + (dir / "missing.json").string() + " --out " + out), 2);
  EXPECT_EQ(run_cli("two-phonon --config " + (dir / "tp.json").string() + " --set params.delta=1e6 --out " + out), 2);
  EXPECT_EQ(run_cli("two-phonon --config " + (dir / "tp.json").string() + " --set nope=1 --out " + out), 2);
  EXPECT_EQ(run_cli("levitate --config x --out " + out), 2);
  EXPECT_EQ(run_cli("two-phonon --config " + (dir / "tiny.json").string() + " --out " + out), 3);
}

TEST(Cli, OutputsByteIdenticalAcrossThreadCounts) {
  const auto dir = scratch("cli_det");
  std::ofstream(dir / "s.json")
      << R"({"grid": {"t_end": 5e-7, "n_samples": 6}, "target_time": 5e-7, "dims": {"mech": 8},
            "sweep": {"axes": [{"path": "params.delta", "values": [5e6, 1e7]}]}})";
  const std::string cfg = (dir / "s.json").string();
  ASSERT_EQ(run_cli("sweep --config " + cfg + " --out " + (dir / "a").string(), "CATRES_THREADS=1"), 0);
  ASSERT_EQ(run_cli("sweep --config " + cfg + " --out " + (dir / "b").string(), "CATRES_THREADS=2"), 0);
  for (const char* name : {"sweep.csv", "meta.json"}) {
    EXPECT_EQ(slurp(dir / "a" / name), slurp(dir / "b" / name)) << name;
  }
  EXPECT_NE(slurp(dir / "a" / "timing.json").find("\"threads\": 1"), std::string::npos);
}
