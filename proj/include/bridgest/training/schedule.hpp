#pragma once

// Linear warmup from lr_base to lr_peak, then n_cycles half-cosine arcs from
// lr_peak down to lr_min. Every arc restarts at lr_peak; the last one ends
// exactly at lr_min on total_steps. Steps count optimizer updates.

#include <cmath>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>

#include "bridgest/errors.hpp"

namespace bridgest::train {

struct ScheduleConfig {
  long warmup_steps = 3000;
  double lr_base = 1e-6;
  double lr_peak = 3e-5;
  double lr_min = 1e-5;
  long total_steps = 30000;
  long n_cycles = 1;

  void validate() const {
    if (!(lr_base < lr_min && lr_min < lr_peak)) throw ConfigError("schedule: requires lr_base < lr_min < lr_peak");
    if (!(lr_base >= 0)) throw ConfigError("schedule: lr_base must be non-negative");
    if (warmup_steps < 0) throw ConfigError("schedule: warmup_steps must be non-negative");
    if (warmup_steps >= total_steps) throw ConfigError("schedule: warmup_steps must be smaller than total_steps");
    if (n_cycles < 1) throw ConfigError("schedule: n_cycles must be >= 1");
    if (n_cycles > total_steps - warmup_steps) throw ConfigError("schedule: more cycles than post-warmup steps");
  }
};

inline double lr_at(long step, const ScheduleConfig& c) {
  if (step < 0 || step > c.total_steps) {
    throw ArgumentError("lr_at: step " + std::to_string(step) + " outside [0, " + std::to_string(c.total_steps) + "]");
  }
  if (step <= c.warmup_steps) {
    if (c.warmup_steps == 0) return c.lr_peak;
    return c.lr_base + (c.lr_peak - c.lr_base) * double(step) / double(c.warmup_steps);
  }
  const double post = double(c.total_steps - c.warmup_steps);
  const double cycle_len = post / double(c.n_cycles);
  const double u = double(step - c.warmup_steps);
  const double k = std::min(std::floor(u / cycle_len), double(c.n_cycles - 1));
  const double t = (u - k * cycle_len) / cycle_len;
  return c.lr_min + (c.lr_peak - c.lr_min) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

inline nlohmann::json to_json(const ScheduleConfig& c) {
  return {{"warmup_steps", c.warmup_steps}, {"lr_base", c.lr_base},         {"lr_peak", c.lr_peak},
          {"lr_min", c.lr_min},             {"total_steps", c.total_steps}, {"n_cycles", c.n_cycles}};
}

inline void from_json(const nlohmann::json& j, ScheduleConfig& c) {
  if (!j.is_object()) throw ConfigError("schedule: expected an object");
  for (const auto& [k, v] : j.items()) {
    if (k == "warmup_steps") c.warmup_steps = v.get<long>();
    else if (k == "lr_base") c.lr_base = v.get<double>();
    else if (k == "lr_peak") c.lr_peak = v.get<double>();
    else if (k == "lr_min") c.lr_min = v.get<double>();
    else if (k == "total_steps") c.total_steps = v.get<long>();
    else if (k == "n_cycles") c.n_cycles = v.get<long>();
    else throw ConfigError("schedule: unknown key '" + k + "'");
  }
}

}  // namespace bridgest::train
