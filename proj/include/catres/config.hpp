#pragma once

// JSON run configuration: defaults per experiment, dotted-path overrides,
// key validation and a stable content hash.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "catres/errors.hpp"

namespace catres::config {

using json = nlohmann::json;

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"two-phonon", "cat", "robustness", "sweep"};
  return names;
}

inline json common_defaults() {
  return json{
      {"params",
       {{"g0", 1.0e6},
        {"delta", 5.0e6},
        {"omega_m", 5.0e9},
        {"omega1", 193.4e12},
        {"detuning_over_g", nullptr},
        {"mu", nullptr},
        {"omega2", nullptr},
        {"omega3", nullptr},
        {"allow_omega3_mismatch", false},
        {"kappa", 0.0},
        {"gamma", 0.0},
        {"n_th", nullptr},
        {"temperature", nullptr},
        {"alpha", json::array({3.0, 0.0})},
        {"n_photons", 3}}},
      {"grid", {{"t_start", 0.0}, {"t_end", nullptr}, {"n_samples", 400}, {"tolerance", 1e-8}}},
      {"dims", {{"optical", nullptr}, {"mech", nullptr}}},
      {"regime", {{"min_delta_over_g0", 5.0}, {"min_omega_m_over_delta", 100.0}}},
      {"seed", 0},
  };
}

inline json default_config(const std::string& experiment) {
  json c = common_defaults();
  c["experiment"] = experiment;
  if (experiment == "two-phonon") {
    c["params"]["alpha"] = json::array({0.0, 0.0});
    c["params"]["n_photons"] = 1;
    c["params"]["detuning_over_g"] = -1.0;
    c["grid"]["t_end"] = 10.0e-6;
    c["target_time"] = 7.07e-6;
    c["rabi_fit"] = {{"g_lo_ratio", 0.5}, {"g_hi_ratio", 1.5}};
  } else if (experiment == "cat") {
    c["snapshots_gt"] = nullptr;
    c["select_record"] = nullptr;
    c["wigner"] = {{"half_width", nullptr}, {"points", 201}, {"all_records", false}};
  } else if (experiment == "robustness") {
    c["params"]["omega_m"] = 10.0e9;
    c["params"]["gamma"] = 10.0;
    c["grid"]["t_end"] = 5.0e-6;
    c["grid"]["n_samples"] = 26;
    c["n_th_values"] = json::array({0, 1, 2, 3, 4, 5});
    c["kappa_over_g_values"] = json::array({0.0, 0.25, 0.5, 0.75, 1.0});
    c["loss_placement"] = "weighted";
    c["subspace_projection"] = true;
    c["max_liouvillian_dim"] = 1000000;
  } else if (experiment == "sweep") {
    c["sweep"] = {{"experiment", "two-phonon"}, {"axes", json::array()}};
  } else {
    throw ConfigError("unknown experiment '" + experiment + "'");
  }
  return c;
}

namespace detail {

inline void check_known_keys(const json& defaults, const json& user, const std::string& where) {
  if (!user.is_object()) return;
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    if (!defaults.contains(it.key())) throw ConfigError("unknown configuration key '" + path + "'");
    const json& d = defaults.at(it.key());
    if (d.is_object()) {
      if (!it.value().is_object()) throw ConfigError("configuration key '" + path + "' must be an object");
      check_known_keys(d, it.value(), path);
    }
  }
}

// Recursive overlay; unlike a JSON merge patch, null is stored, not a deletion.
inline void overlay(json& base, const json& top) {
  for (auto it = top.begin(); it != top.end(); ++it) {
    if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object()) {
      overlay(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

inline std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("malformed key path '" + path + "'");
    parts.push_back(part);
  }
  if (parts.empty()) throw ConfigError("empty key path");
  return parts;
}

}  // namespace detail

/// Value at a dotted path; throws ConfigError when absent.
inline const json& at_path(const json& c, const std::string& path) {
  const json* node = &c;
  for (const auto& part : detail::split_path(path)) {
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown configuration key '" + path + "'");
    node = &node->at(part);
  }
  return *node;
}

/// Sets an existing leaf by dotted path.
inline void set_path(json& c, const std::string& path, json value) {
  json* node = &c;
  const auto parts = detail::split_path(path);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) throw ConfigError("unknown configuration key '" + path + "'");
    node = &(*node)[parts[i]];
  }
  if (!node->is_object() || !node->contains(parts.back())) {
    throw ConfigError("unknown configuration key '" + path + "'");
  }
  (*node)[parts.back()] = std::move(value);
}

/// "a.b=value"; the value is parsed as JSON and falls back to a plain string.
inline void apply_override(json& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set_path(c, key, std::move(value));
}

inline json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config file '" + path + "' is not a JSON object");
  return j;
}

/// Defaults for the named experiment with the user document merged on top.
inline json resolve(const json& user, const std::string& experiment) {
  if (user.contains("experiment") && user.at("experiment") != experiment) {
    throw ConfigError("config is for experiment '" + user.at("experiment").dump() + "', not '" + experiment + "'");
  }
  json defaults = default_config(experiment);
  if (experiment == "sweep") {
    std::string base = "two-phonon";
    if (user.contains("sweep") && user.at("sweep").contains("experiment")) {
      base = user.at("sweep").at("experiment").get<std::string>();
    }
    if (base == "sweep") throw ConfigError("a sweep cannot sweep another sweep");
    json b = default_config(base);
    b["experiment"] = "sweep";
    b["sweep"] = defaults["sweep"];
    b["sweep"]["experiment"] = base;
    defaults = std::move(b);
  }
  detail::check_known_keys(defaults, user, "");
  detail::overlay(defaults, user);
  defaults["experiment"] = experiment;
  return defaults;
}

/// FNV-1a over the canonical (key-sorted, compact) serialization.
inline std::string config_hash(const json& c) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : c.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace catres::config
