#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "bridgest/model/bridge_model.hpp"
#include "bridgest/model/checkpoint.hpp"
#include "bridgest/numerics/adam.hpp"
#include "bridgest/textkit/bleu.hpp"
#include "bridgest/textkit/cot.hpp"
#include "bridgest/training/freeze.hpp"
#include "bridgest/training/schedule.hpp"

namespace bridgest::train {

using model::Example;

enum class Stage { kShort, kLong, kSingle };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::kShort: return "short";
    case Stage::kLong: return "long";
    case Stage::kSingle: return "single";
  }
  return "?";
}

inline Stage stage_from_string(const std::string& s) {
  if (s == "short") return Stage::kShort;
  if (s == "long") return Stage::kLong;
  if (s == "single") return Stage::kSingle;
  throw CheckpointError("unknown stage '" + s + "'");
}

struct TrainProfile {
  std::string direction = "en-hi";
  std::size_t batch_size = 4;
  std::size_t grad_accum_steps = 1;
  std::size_t epochs = 1;
  FreezePolicy freeze;

  void validate() const {
    if (batch_size < 1) throw ConfigError("profile: batch_size must be >= 1");
    if (grad_accum_steps < 1) throw ConfigError("profile: grad_accum_steps must be >= 1");
    if (epochs < 1) throw ConfigError("profile: epochs must be >= 1");
    freeze.validate();
  }

  /// Optimizer updates needed to see `n` examples `epochs` times; a trailing
  /// partial accumulation window still counts as one update.
  long updates_for(std::size_t n) const {
    const std::size_t batches = (n + batch_size - 1) / batch_size;
    return static_cast<long>(epochs * ((batches + grad_accum_steps - 1) / grad_accum_steps));
  }

  // English -> Indic: short-bucket stage with batch 4, then the long bucket.
  static TrainProfile en_to_indic_short(std::string dir = "en-hi") { return {std::move(dir), 4, 1, 1, FreezePolicy::en_to_indic()}; }
  static TrainProfile en_to_indic_long(std::string dir = "en-hi") { return {std::move(dir), 1, 1, 1, FreezePolicy::en_to_indic()}; }
  // Indic -> English: batch 1, accumulate 4, speech encoder trainable in epoch 0.
  static TrainProfile indic_to_en(std::string dir = "hi-en") { return {std::move(dir), 1, 4, 1, FreezePolicy::indic_to_en()}; }
};

/// Resolves total_steps == 0 to the number of updates the stage will run.
inline ScheduleConfig resolve_schedule(ScheduleConfig s, const TrainProfile& p, std::size_t n_examples) {
  if (s.total_steps == 0) s.total_steps = std::max<long>(p.updates_for(n_examples), 1);
  s.validate();
  return s;
}

struct TrainState {
  Stage stage = Stage::kSingle;
  long global_step = 0;
  long stage_step = 0;
  std::size_t epoch = 0;  // next epoch to run within the stage
  ParameterStore params;
  double best_dev_bleu = -1;  // -1 until the first evaluation
  long best_step = -1;
  std::optional<ParameterStore> best_params;
  Rng rng;
  double last_lr = 0;

  // open accumulation window
  std::size_t window_micro = 0;
  std::size_t window_examples = 0;
  double window_loss = 0;
};

struct StepMetrics {
  bool updated = false;
  long step = 0;  // global step after this call
  double lr = 0;
  double loss = 0;  // mean example loss of the update window (when updated)
};

namespace detail {

inline StepMetrics apply_update(TrainState& st, const ScheduleConfig& sched) {
  const Real inv = Real(1) / Real(st.window_examples);
  for (auto& [_, e] : st.params.entries()) {
    if (!e.trainable) continue;
    auto& g = e.value.ensure_grad();
    for (auto& v : g) v *= inv;
  }
  const double lr = lr_at(st.stage_step, sched);
  adam_step(st.params, static_cast<Real>(lr));
  StepMetrics m{true, 0, lr, st.window_loss / double(st.window_examples)};
  ++st.stage_step;
  ++st.global_step;
  m.step = st.global_step;
  st.last_lr = lr;
  st.window_micro = 0;
  st.window_examples = 0;
  st.window_loss = 0;
  return m;
}

}  // namespace detail

/// Forward+backward one micro-batch. After grad_accum_steps micro-batches the
/// summed example gradients are averaged over every example in the window and
/// one Adam update runs at lr_at(stage step).
inline StepMetrics train_step(const model::BridgeModel& m, std::span<const Example> batch, TrainState& st,
                              const TrainProfile& profile, const ScheduleConfig& sched) {
  if (batch.empty()) throw ArgumentError("train_step: empty batch");
  for (const auto& ex : batch) {
    const Real loss = m.loss(st.params, ex, true);
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << "train_step: non-finite loss at step " << st.global_step << " (utterances:";
      for (const auto& e : batch) os << ' ' << e.id;
      os << ')';
      throw NumericError(os.str());
    }
    st.window_loss += loss;
  }
  st.window_examples += batch.size();
  ++st.window_micro;
  if (st.window_micro < profile.grad_accum_steps) return {false, st.global_step, 0, 0};
  return detail::apply_update(st, sched);
}

/// Applies a trailing partial accumulation window, if any.
inline std::optional<StepMetrics> flush_window(TrainState& st, const ScheduleConfig& sched) {
  if (st.window_micro == 0) return std::nullopt;
  return detail::apply_update(st, sched);
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalSet {
  std::vector<Example> examples;
  std::vector<std::string> references;  // plain translations
};

struct EvalOptions {
  std::size_t max_new_tokens = 64;
  bool cot = false;  // hypotheses are parsed out of CoT responses
  std::size_t threads = 1;
};

struct DevResult {
  text::BleuReport bleu;
  double loss = 0;                  // mean example cross-entropy
  std::vector<std::string> raw;     // decoded generations
  std::vector<std::string> hyps;    // hypotheses scored against the references
};

/// Greedy generation over the set followed by corpus BLEU. Work is split into
/// contiguous index ranges and reduced in index order, so the result does not
/// depend on the thread count.
inline DevResult evaluate_dev(const model::BridgeModel& m, const ParameterStore& params, const EvalSet& dev,
                              const text::Vocab& vocab, const EvalOptions& opt = {}) {
  if (dev.examples.empty()) throw ArgumentError("evaluate_dev: empty evaluation set");
  if (dev.examples.size() != dev.references.size()) throw ArgumentError("evaluate_dev: references not aligned");
  const std::size_t n = dev.examples.size();
  std::vector<std::string> raw(n);
  std::vector<double> losses(n);
  const std::size_t max_seq = m.config().decoder.max_seq_len;
  auto work = [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Example& ex = dev.examples[i];
      losses[i] = m.loss(params, ex);
      const std::size_t ctx = m.bridge_length(ex.features.rows()) + ex.prompt.size();
      const std::size_t cap = max_seq + 1 > ctx ? max_seq + 1 - ctx : 0;
      const std::size_t budget = std::min(opt.max_new_tokens, cap);
      raw[i] = budget ? vocab.decode(m.generate(params, ex.features, ex.prompt, budget)) : std::string();
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(opt.threads, n));
  if (threads == 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(n, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }
  DevResult r;
  r.raw = raw;
  r.hyps.reserve(n);
  for (const auto& s : raw) {
    if (!opt.cot) {
      r.hyps.push_back(s);
    } else {
      auto p = text::parse_cot_response(s);
      r.hyps.push_back(p.parsed() ? *p.translation : std::string());
    }
  }
  r.loss = std::accumulate(losses.begin(), losses.end(), 0.0) / double(n);
  r.bleu = text::bleu_corpus(r.hyps, dev.references);
  return r;
}

// ---------------------------------------------------------------------------
// Checkpoint bridge

inline std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline Rng rng_from_string(const std::string& s) {
  Rng rng;
  std::istringstream is(s);
  is >> rng;
  if (!is) throw CheckpointError("checkpoint field 'state.rng' is invalid");
  return rng;
}

inline nlohmann::json state_to_json(const TrainState& st) {
  return {{"stage", to_string(st.stage)},
          {"global_step", st.global_step},
          {"stage_step", st.stage_step},
          {"epoch", st.epoch},
          {"best_dev_bleu", st.best_dev_bleu},
          {"best_step", st.best_step},
          {"last_lr", st.last_lr},
          {"rng", rng_to_string(st.rng)},
          {"window_micro", st.window_micro},
          {"window_examples", st.window_examples},
          {"window_loss", st.window_loss}};
}

inline model::Checkpoint to_checkpoint(const TrainState& st, nlohmann::json config) {
  model::Checkpoint c;
  c.config = std::move(config);
  c.params = st.params.values_only();
  c.params.optimizer_state() = st.params.optimizer_state();
  if (st.best_params) c.best = st.best_params->values_only();
  c.state = state_to_json(st);
  return c;
}

inline TrainState from_checkpoint(const model::Checkpoint& c) {
  TrainState st;
  try {
    const auto& j = c.state;
    st.stage = stage_from_string(j.at("stage").get<std::string>());
    st.global_step = j.at("global_step").get<long>();
    st.stage_step = j.at("stage_step").get<long>();
    st.epoch = j.at("epoch").get<std::size_t>();
    st.best_dev_bleu = j.at("best_dev_bleu").get<double>();
    st.best_step = j.at("best_step").get<long>();
    st.last_lr = j.at("last_lr").get<double>();
    st.rng = rng_from_string(j.at("rng").get<std::string>());
    st.window_micro = j.at("window_micro").get<std::size_t>();
    st.window_examples = j.at("window_examples").get<std::size_t>();
    st.window_loss = j.at("window_loss").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint field 'state' is incomplete: ") + e.what());
  }
  st.params = c.params.values_only();
  st.params.optimizer_state() = c.params.optimizer_state();
  if (c.best) st.best_params = c.best->values_only();
  return st;
}

inline void save_checkpoint(const TrainState& st, const nlohmann::json& config, const std::string& path) {
  model::save_checkpoint_file(path, to_checkpoint(st, config));
}

inline TrainState load_checkpoint(const std::string& path) { return from_checkpoint(model::load_checkpoint_file(path)); }

}  // namespace bridgest::train
