#pragma once

// Stage runner and the short -> long length curriculum. Each stage trains for
// its profile's epochs, evaluates dev BLEU at every epoch end and keeps the
// best-scoring parameters (ties keep the earliest). The next stage starts
// from that best snapshot.

#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bridgest/training/trainer.hpp"

namespace bridgest::train {

struct StageLogRecord {
  std::string stage;
  long step = 0;
  std::size_t epoch = 0;
  double lr = 0;
  double loss = 0;
  std::optional<double> dev_bleu;
  std::optional<double> dev_loss;

  nlohmann::json to_json() const {
    nlohmann::json j{{"stage", stage}, {"step", step}, {"epoch", epoch}, {"lr", lr}, {"loss", loss}};
    if (dev_bleu) j["dev_bleu"] = *dev_bleu;
    if (dev_loss) j["dev_loss"] = *dev_loss;
    return j;
  }
};

struct StagePlan {
  Stage stage = Stage::kSingle;
  std::vector<Example> data;
  TrainProfile profile;
  ScheduleConfig schedule;  // total_steps == 0 resolves from the data size
};

struct RunOptions {
  EvalOptions eval;
  bool reset_optimizer_between_stages = true;
  std::function<void(const StageLogRecord&)> on_log;  // optional streaming sink
};

struct StageOutcome {
  Stage stage = Stage::kSingle;
  ParameterStore initial;  // parameter values the stage started from
  ParameterStore best;
  double best_dev_bleu = -1;
  long best_step = -1;
};

struct CurriculumResult {
  std::vector<StageLogRecord> log;
  std::vector<StageOutcome> stages;
  ParameterStore final_params;  // best snapshot of the last stage
  TrainState state;             // state after the last epoch
};

/// Resets per-stage counters; parameters carry over unchanged.
inline void begin_stage(TrainState& st, Stage stage, bool reset_optimizer) {
  st.stage = stage;
  st.stage_step = 0;
  st.epoch = 0;
  st.best_dev_bleu = -1;
  st.best_step = -1;
  st.best_params.reset();
  st.window_micro = st.window_examples = 0;
  st.window_loss = 0;
  if (reset_optimizer) st.params.reset_optimizer();
}

/// Keeps a snapshot when `dev_bleu` beats every earlier evaluation of the
/// stage; an equal score keeps the earlier snapshot. Returns true on a new best.
inline bool record_evaluation(TrainState& st, double dev_bleu) {
  if (!(dev_bleu > st.best_dev_bleu)) return false;
  st.best_dev_bleu = dev_bleu;
  st.best_step = st.global_step;
  st.best_params = st.params.values_only();
  return true;
}

/// Runs epochs [st.epoch, profile.epochs) of `plan`. A state saved at an epoch
/// boundary therefore resumes exactly where it left off.
inline void run_stage(const model::BridgeModel& m, TrainState& st, const StagePlan& plan, const EvalSet& dev,
                      const text::Vocab& vocab, const RunOptions& opt, std::vector<StageLogRecord>& log) {
  plan.profile.validate();
  if (plan.data.empty()) throw ConfigError(std::string("stage '") + to_string(plan.stage) + "' has no data");
  const ScheduleConfig sched = resolve_schedule(plan.schedule, plan.profile, plan.data.size());
  if (plan.profile.updates_for(plan.data.size()) > sched.total_steps) {
    throw ConfigError("schedule total_steps is smaller than the updates this stage performs");
  }
  auto emit = [&](StageLogRecord r) {
    if (opt.on_log) opt.on_log(r);
    log.push_back(std::move(r));
  };
  const std::string stage_name = to_string(plan.stage);
  const std::size_t bs = plan.profile.batch_size;
  for (; st.epoch < plan.profile.epochs;) {
    apply_freeze_policy(st.params, plan.profile.freeze, st.epoch);
    std::vector<std::size_t> order(plan.data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), st.rng);
    double epoch_loss = 0;
    std::size_t updates = 0;
    std::vector<Example> batch;
    auto record = [&](const StepMetrics& sm) {
      epoch_loss += sm.loss;
      ++updates;
      emit({stage_name, sm.step, st.epoch, sm.lr, sm.loss, std::nullopt, std::nullopt});
    };
    for (std::size_t b = 0; b < order.size(); b += bs) {
      batch.clear();
      for (std::size_t k = b; k < std::min(order.size(), b + bs); ++k) batch.push_back(plan.data[order[k]]);
      auto sm = train_step(m, batch, st, plan.profile, sched);
      if (sm.updated) record(sm);
    }
    if (auto sm = flush_window(st, sched)) record(*sm);

    const DevResult dr = evaluate_dev(m, st.params, dev, vocab, opt.eval);
    emit({stage_name, st.global_step, st.epoch, st.last_lr, updates ? epoch_loss / double(updates) : 0.0,
          dr.bleu.score, dr.loss});
    record_evaluation(st, dr.bleu.score);
    ++st.epoch;
  }
}

/// Stage 1 on the short bucket, then (when the long bucket is non-empty)
/// stage 2 on the long bucket initialized from stage 1's best checkpoint.
inline CurriculumResult run_curriculum(const model::BridgeModel& m, ParameterStore init, const StagePlan& short_plan,
                                       const std::optional<StagePlan>& long_plan, const EvalSet& dev,
                                       const text::Vocab& vocab, std::uint64_t seed, const RunOptions& opt = {}) {
  if (short_plan.data.empty()) throw ConfigError("run_curriculum: the short bucket is empty");
  CurriculumResult res;
  TrainState& st = res.state;
  st.params = std::move(init);
  st.rng = Rng(seed);

  std::vector<const StagePlan*> plans{&short_plan};
  if (long_plan && !long_plan->data.empty()) plans.push_back(&*long_plan);

  for (std::size_t i = 0; i < plans.size(); ++i) {
    const StagePlan& plan = *plans[i];
    if (i > 0) st.params.load_values(*st.best_params);
    begin_stage(st, plan.stage, i > 0 && opt.reset_optimizer_between_stages);
    StageOutcome out;
    out.stage = plan.stage;
    out.initial = st.params.values_only();
    run_stage(m, st, plan, dev, vocab, opt, res.log);
    out.best = *st.best_params;
    out.best_dev_bleu = st.best_dev_bleu;
    out.best_step = st.best_step;
    res.stages.push_back(std::move(out));
  }
  res.final_params = res.stages.back().best.values_only();
  return res;
}

}  // namespace bridgest::train
