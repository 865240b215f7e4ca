#pragma once

// Run configuration: command defaults, JSON config file, --set overrides and
// the BRIDGEST_SEED fallback, resolved into one JSON document.
//
// Precedence (highest first): --set, config file, BRIDGEST_SEED (seed only),
// built-in defaults. Every key must already exist in the defaults.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bridgest/errors.hpp"
#include "bridgest/model/checkpoint.hpp"

namespace bridgest::cli {

using nlohmann::json;

/// Deep merge of `patch` into `base`. Objects merge key by key; any other
/// value replaces the default. Keys absent from `base` are rejected.
inline void merge_strict(json& base, const json& patch, const std::string& where = "") {
  if (!patch.is_object()) throw ConfigError("config" + (where.empty() ? "" : " '" + where + "'") + ": expected an object");
  for (const auto& [k, v] : patch.items()) {
    const std::string path = where.empty() ? k : where + "." + k;
    auto it = base.find(k);
    if (it == base.end()) throw ConfigError("unknown config key '" + path + "'");
    if (it->is_object() && v.is_object()) {
      merge_strict(*it, v, path);
    } else if (it->is_object()) {
      throw ConfigError("config key '" + path + "' must be an object");
    } else {
      *it = v;
    }
  }
}

/// Value text of a --set: JSON when it parses, otherwise a plain string.
inline json parse_value(const std::string& text) {
  json v = json::parse(text, nullptr, false);
  if (v.is_discarded()) return json(text);
  return v;
}

/// Applies one `dotted.key=value` override.
inline void apply_set(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  json patch = parse_value(assignment.substr(eq + 1));
  std::size_t end = key.size();
  while (true) {
    const auto dot = key.rfind('.', end - 1);
    const std::string part = key.substr(dot == std::string::npos ? 0 : dot + 1,
                                        end - (dot == std::string::npos ? 0 : dot + 1));
    if (part.empty()) throw ConfigError("--set key '" + key + "' has an empty component");
    patch = json{{part, std::move(patch)}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  merge_strict(cfg, patch);
}

inline json load_config_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read config file '" + p.string() + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file '" + p.string() + "' is not valid JSON");
  return j;
}

/// `command-<hash>` where the hash covers the resolved config (minus run_id),
/// unless the config names a run_id explicitly.
inline std::string run_id_for(const std::string& command, const json& cfg) {
  if (auto it = cfg.find("run_id"); it != cfg.end() && it->is_string() && !it->get<std::string>().empty()) {
    return it->get<std::string>();
  }
  json c = cfg;
  c.erase("run_id");
  std::ostringstream os;
  os << command << '-' << std::hex << std::setw(16) << std::setfill('0') << model::detail::fnv1a(c.dump());
  return os.str().substr(0, command.size() + 13);
}

struct ResolvedRun {
  json config;
  std::string run_id;
  std::filesystem::path dir;
};

inline ResolvedRun resolve_config(const std::string& command, json defaults,
                                  const std::optional<std::filesystem::path>& config_file,
                                  const std::vector<std::string>& sets, const std::optional<std::string>& env_seed) {
  json cfg = std::move(defaults);
  if (env_seed && !env_seed->empty()) {
    try {
      std::size_t used = 0;
      const unsigned long long s = std::stoull(*env_seed, &used);
      if (used != env_seed->size()) throw std::invalid_argument("trailing characters");
      cfg["seed"] = s;
    } catch (const std::exception&) {
      throw ConfigError("BRIDGEST_SEED must be a non-negative integer, got '" + *env_seed + "'");
    }
  }
  if (config_file) merge_strict(cfg, load_config_file(*config_file));
  for (const auto& s : sets) apply_set(cfg, s);
  ResolvedRun r;
  r.run_id = run_id_for(command, cfg);
  cfg["run_id"] = r.run_id;
  r.config = std::move(cfg);
  r.dir = std::filesystem::path(r.config.at("out_dir").get<std::string>()) / r.run_id;
  return r;
}

}  // namespace bridgest::cli
