// catres <two-phonon|cat|robustness|sweep> --config <path> [--set key=value ...] --out <dir>
//
// Exit codes: 0 success, 2 configuration or validation failure,
// 3 numerical tolerance failure.

#include <chrono>
#include <ctime>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "catres/catres.hpp"

namespace {

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-phonon optomechanics and mechanical cat-state simulator"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  for (const auto& name : catres::config::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--set", overrides, "override a configuration leaf, key.path=value");
    sub->add_option("--out", out_dir, "output directory")->required();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string experiment = app.get_subcommands().front()->get_name();

  namespace ex = catres::experiments;
  try {
    const auto started = std::chrono::steady_clock::now();
    const std::string started_utc = utc_now();
    auto cfg = catres::config::resolve(catres::config::parse_file(config_path), experiment);
    for (const auto& o : overrides) catres::config::apply_override(cfg, o);

    ex::RunContext ctx;
    ctx.threads = ex::worker_count(1u << 16);
    const auto result = ex::run_experiment(cfg, ctx);
    ex::write_outputs(result, out_dir);

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const catres::config::json timing = {{"config_hash", result.hash},
                                         {"started_utc", started_utc},
                                         {"wall_seconds", wall},
                                         {"threads", ctx.threads}};
    ex::RunResult timing_file;
    timing_file.files.emplace_back("timing.json", timing.dump(2) + "\n");
    ex::write_outputs(timing_file, out_dir);

    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << experiment << ": wrote " << result.files.size() << " files to " << out_dir
              << " (config " << result.hash << ")\n";
    return result.exit_code;
  } catch (const catres::IntegrationError& e) {
    std::cerr << "numerical failure: " << e.what() << " (achieved error " << e.achieved_error() << ")\n";
    return 3;
  } catch (const catres::ConditioningError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const catres::Error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const catres::config::json::exception& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
