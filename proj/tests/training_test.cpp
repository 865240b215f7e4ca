#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "bridgest/datakit/bucketing.hpp"
#include "bridgest/datakit/synth.hpp"
#include "bridgest/training/curriculum.hpp"
#include "bridgest/training/pipeline.hpp"

using namespace bridgest;
using namespace bridgest::train;

namespace {

// Tiny synthetic task shared by the tests below.
struct Fixture {
  std::vector<data::UtteranceRecord> train_rs, dev_rs;
  text::Vocab vocab;
  TextSetup setup;
  model::ModelConfig cfg;

  explicit Fixture(std::size_t n_train = 24, std::size_t n_dev = 6) {
    data::SynthSpec spec;
    spec.seed = 5;
    spec.vocab_size = 12;
    spec.min_len = 2;
    spec.max_len = 4;
    spec.mapping = data::permutation_mapping(12, 5);
    train_rs = data::synth_generate(spec, n_train);
    dev_rs = data::synth_generate(spec, n_dev, n_train);
    vocab = build_vocab({&train_rs, &dev_rs}, setup);
    cfg.speech = {8, 8, 1, 11, 2};
    cfg.qformer = {2, 1, 8, 1, 2, 23};
    cfg.lora = {2, 4, {"q", "v"}, 31};
    cfg.decoder = {vocab.size(), 8, 1, 2, 24, 41};
  }

  std::vector<model::Example> examples() const { return make_examples(train_rs, vocab, setup); }
  EvalSet dev() const { return make_eval_set(dev_rs, vocab, setup); }
};

ScheduleConfig small_schedule(long total = 0) { return {2, 1e-4, 3e-3, 1e-3, total, 1}; }

}  // namespace

// ---------------------------------------------------------------------------
// Schedule

TEST(Schedule, DefaultAnchors) {
  ScheduleConfig c;
  EXPECT_NEAR(lr_at(0, c), 1e-6, 1e-6 * 1e-12);
  EXPECT_NEAR(lr_at(3000, c), 3e-5, 3e-5 * 1e-12);
  EXPECT_NEAR(lr_at(c.total_steps, c), 1e-5, 1e-5 * 1e-12);
  EXPECT_NEAR(lr_at(1500, c), 1.55e-5, 1.55e-5 * 1e-12);
}

TEST(Schedule, ContinuousMonotoneAndBounded) {
  ScheduleConfig c;
  c.total_steps = 10000;
  // Both sides of the warmup boundary approach lr_peak.
  const double slope = (c.lr_peak - c.lr_base) / c.warmup_steps;
  EXPECT_NEAR(lr_at(c.warmup_steps - 1, c), c.lr_peak - slope, 1e-18);
  EXPECT_NEAR(lr_at(c.warmup_steps + 1, c), c.lr_peak, 1e-10);
  for (long t = 1; t <= c.warmup_steps; ++t) EXPECT_GE(lr_at(t, c), lr_at(t - 1, c));
  for (long t = c.warmup_steps + 1; t <= c.total_steps; ++t) {
    EXPECT_LE(lr_at(t, c), lr_at(t - 1, c));
    EXPECT_GE(lr_at(t, c), c.lr_min);
    EXPECT_LE(lr_at(t, c), c.lr_peak);
  }
  // Largest jump between neighbouring steps is one slope unit: no discontinuities.
  double max_jump = 0;
  for (long t = 1; t <= c.total_steps; ++t) max_jump = std::max(max_jump, std::abs(lr_at(t, c) - lr_at(t - 1, c)));
  EXPECT_LE(max_jump, slope * (1 + 1e-9));
}

TEST(Schedule, CosineMatchesClosedForm) {
  ScheduleConfig c{10, 1e-6, 3e-5, 1e-5, 110, 1};
  for (long t = 10; t <= 110; ++t) {
    const double want = 1e-5 + 0.5 * (3e-5 - 1e-5) * (1 + std::cos(std::numbers::pi * double(t - 10) / 100.0));
    EXPECT_NEAR(lr_at(t, c), want, 1e-18);
  }
}

TEST(Schedule, RestartsStayInRangeAndEndAtMin) {
  ScheduleConfig c{10, 1e-6, 3e-5, 1e-5, 130, 3};
  EXPECT_NEAR(lr_at(50, c), 3e-5, 1e-18);  // restart at the start of cycle 2
  EXPECT_NEAR(lr_at(130, c), 1e-5, 1e-18);
  for (long t = 10; t <= 130; ++t) {
    EXPECT_LE(lr_at(t, c), 3e-5);
    EXPECT_GE(lr_at(t, c), 1e-5);
  }
}

TEST(Schedule, Errors) {
  ScheduleConfig c;
  EXPECT_THROW(lr_at(-1, c), ArgumentError);
  EXPECT_THROW(lr_at(c.total_steps + 1, c), ArgumentError);
  EXPECT_THROW((ScheduleConfig{10, 1e-5, 3e-5, 1e-6, 100, 1}).validate(), ConfigError);
  EXPECT_THROW((ScheduleConfig{100, 1e-6, 3e-5, 1e-5, 100, 1}).validate(), ConfigError);
  EXPECT_THROW((ScheduleConfig{10, 1e-6, 3e-5, 1e-5, 100, 0}).validate(), ConfigError);
}

// ---------------------------------------------------------------------------
// Freeze policy

TEST(Freeze, EnToIndicOnlyQFormerAndLora) {
  Fixture f;
  model::BridgeModel m(f.cfg);
  auto s = m.init_params();
  apply_freeze_policy(s, FreezePolicy::en_to_indic(), 0);
  for (const auto& [n, e] : s.entries()) {
    const auto g = model::param_group(n);
    EXPECT_EQ(e.trainable, g == "qformer" || g == "lora") << n;
  }
}

TEST(Freeze, IndicToEnSpeechEncoderFirstEpochOnly) {
  Fixture f;
  model::BridgeModel m(f.cfg);
  auto s = m.init_params();
  apply_freeze_policy(s, FreezePolicy::indic_to_en(), 0);
  EXPECT_TRUE(s.trainable("speech_encoder.proj.W"));
  EXPECT_FALSE(s.trainable("decoder.head.W"));
  apply_freeze_policy(s, FreezePolicy::indic_to_en(), 1);
  EXPECT_FALSE(s.trainable("speech_encoder.proj.W"));
  EXPECT_TRUE(s.trainable("qformer.queries"));
}

TEST(Freeze, UnknownGroupIsConfigError) {
  FreezePolicy p;
  p.trainable_groups.insert("vision_tower");
  ParameterStore s;
  EXPECT_THROW(apply_freeze_policy(s, p, 0), ConfigError);
  nlohmann::json j{{"trainable_groups", {"qformer"}}, {"unknown", true}};
  EXPECT_THROW(from_json(j, p), ConfigError);
}

// ---------------------------------------------------------------------------
// train_step

TEST(TrainStep, OneUpdatePerAccumulationWindow) {
  Fixture f;
  model::BridgeModel m(f.cfg);
  auto ex = f.examples();
  TrainState st;
  st.params = m.init_params();
  TrainProfile p = TrainProfile::indic_to_en();
  p.freeze = FreezePolicy::en_to_indic();
  const auto sched = small_schedule(100);
  int updates = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    auto sm = train_step(m, std::span(&ex[i], 1), st, p, sched);
    updates += sm.updated;
    EXPECT_EQ(sm.updated, (i + 1) % 4 == 0);
  }
  EXPECT_EQ(updates, 2);
  EXPECT_EQ(st.global_step, 2);
}

// Accumulated update vs a single fused batch, both by the library and by a
// hand-computed mean gradient.
TEST(TrainStep, AccumulationEqualsFusedBatch) {
  Fixture f;
  model::BridgeModel m(f.cfg);
  auto ex = f.examples();
  const auto sched = small_schedule(100);
  auto init = m.init_params();
  apply_freeze_policy(init, FreezePolicy::en_to_indic(), 0);
  // make B non-zero so every adapter factor gets a gradient
  for (auto& [n, e] : init.entries())
    if (n.ends_with(".lora.B"))
      for (std::size_t i = 0; i < e.value.numel(); ++i) e.value.data[i] = Real(0.01) * Real(i % 7);

  TrainState acc;
  acc.params = init.values_only();
  TrainProfile pa{"hi-en", 1, 4, 1, FreezePolicy::en_to_indic()};
  for (std::size_t i = 0; i < 4; ++i) train_step(m, std::span(&ex[i], 1), acc, pa, sched);

  TrainState fused;
  fused.params = init.values_only();
  TrainProfile pf{"hi-en", 4, 1, 1, FreezePolicy::en_to_indic()};
  train_step(m, std::span(ex.data(), 4), fused, pf, sched);

  ParameterStore oracle = init.values_only();
  for (std::size_t i = 0; i < 4; ++i) m.loss(oracle, ex[i], true, Real(0.25));
  adam_step(oracle, Real(lr_at(0, sched)));

  EXPECT_LE(max_param_diff(acc.params, fused.params), 1e-9);
  EXPECT_LE(max_param_diff(acc.params, oracle), 1e-9);
  EXPECT_FALSE(same_values(acc.params, init));
}

TEST(TrainStep, FrozenParametersUnchanged) {
  Fixture f;
  model::BridgeModel m(f.cfg);
  auto ex = f.examples();
  TrainState st;
  st.params = m.init_params();
  const auto before = st.params.values_only();
  TrainProfile p = TrainProfile::en_to_indic_short();
  for (int k = 0; k < 3; ++k) train_step(m, std::span(ex.data() + 4 * k, 4), st, p, small_schedule(100));
  for (const auto& [n, e] : st.params.entries()) {
    if (!e.trainable) {
      EXPECT_EQ(e.value.data, before.at(n).data) << n;
    }
  }
}

TEST(TrainStep, NonFiniteLossReportsStepAndIds) {
  Fixture f;
  model::BridgeModel m(f.cfg);
  auto ex = f.examples();
  TrainState st;
  st.params = m.init_params();
  st.params.at("decoder.head.b").data[0] = std::numeric_limits<Real>::infinity();
  try {
    train_step(m, std::span(ex.data(), 2), st, TrainProfile::en_to_indic_short(), small_schedule(100));
    FAIL();
  } catch (const NumericError& e) {
    const std::string w = e.what();
    EXPECT_NE(w.find("step 0"), std::string::npos);
    EXPECT_NE(w.find(ex[0].id), std::string::npos);
  }
  EXPECT_THROW(train_step(m, {}, st, TrainProfile::en_to_indic_short(), small_schedule(100)), ArgumentError);
}

TEST(TrainStep, PartialWindowIsFlushed) {
  Fixture f;
  model::BridgeModel m(f.cfg);
  auto ex = f.examples();
  TrainState st;
  st.params = m.init_params();
  TrainProfile p = TrainProfile::indic_to_en();
  p.freeze = {};
  for (std::size_t i = 0; i < 3; ++i) train_step(m, std::span(&ex[i], 1), st, p, small_schedule(100));
  EXPECT_EQ(st.global_step, 0);
  auto sm = flush_window(st, small_schedule(100));
  ASSERT_TRUE(sm);
  EXPECT_EQ(st.global_step, 1);
  EXPECT_FALSE(flush_window(st, small_schedule(100)));
  EXPECT_EQ(p.updates_for(7), 2);
}

// ---------------------------------------------------------------------------
// Evaluation and selection

TEST(Evaluate, PerfectCopyScoresHundred) {
  std::vector<std::string> refs{"a b c", "d e"};
  EXPECT_EQ(text::bleu_corpus(refs, refs).score, 100.0);
  Fixture f;
  model::BridgeModel m(f.cfg);
  auto s = m.init_params();
  EvalSet dev = f.dev();
  EvalOptions one, many;
  many.threads = 3;
  auto a = evaluate_dev(m, s, dev, f.vocab, one), b = evaluate_dev(m, s, dev, f.vocab, many);
  EXPECT_EQ(a.bleu.score, b.bleu.score);
  EXPECT_EQ(a.raw, b.raw);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_THROW(evaluate_dev(m, s, EvalSet{}, f.vocab), ArgumentError);
}

TEST(Evaluate, UntrainedModelNearZero) {
  Fixture f(8, 40);
  model::BridgeModel m(f.cfg);
  auto r = evaluate_dev(m, m.init_params(), f.dev(), f.vocab);
  EXPECT_LT(r.bleu.score, 5.0);
}

TEST(Selection, TieKeepsEarliest) {
  TrainState st;
  st.params.add("w", Tensor({1}));
  const std::vector<double> seq{10, 12, 12};
  std::vector<bool> improved;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    st.global_step = long(i + 1) * 10;
    st.params.at("w").data[0] = Real(i);
    improved.push_back(record_evaluation(st, seq[i]));
  }
  EXPECT_EQ(improved, (std::vector<bool>{true, true, false}));
  EXPECT_EQ(st.best_step, 20);
  EXPECT_EQ(st.best_params->at("w").data[0], 1);
  EXPECT_EQ(st.best_dev_bleu, 12);
}

// ---------------------------------------------------------------------------
// Curriculum

namespace {

struct Plans {
  StagePlan short_plan;
  std::optional<StagePlan> long_plan;
};

Plans make_plans(const Fixture& f, std::size_t threshold, std::size_t epochs = 2) {
  auto [sb, lb] = data::split_by_transcript_length(f.train_rs, threshold);
  Plans p;
  p.short_plan = {Stage::kShort, make_examples(sb.records, f.vocab, f.setup), TrainProfile::en_to_indic_short(),
                  small_schedule()};
  p.short_plan.profile.epochs = epochs;
  if (!lb.records.empty()) {
    p.long_plan = StagePlan{Stage::kLong, make_examples(lb.records, f.vocab, f.setup),
                            TrainProfile::en_to_indic_long(), small_schedule()};
    p.long_plan->profile.epochs = 1;
  }
  return p;
}

}  // namespace

TEST(Curriculum, TwoStagesSecondStartsFromFirstBest) {
  Fixture f;
  model::BridgeModel m(f.cfg);
  auto plans = make_plans(f, 14);
  ASSERT_TRUE(plans.long_plan);
  ASSERT_FALSE(plans.short_plan.data.empty());
  auto res = run_curriculum(m, m.init_params(), plans.short_plan, plans.long_plan, f.dev(), f.vocab, 3);
  ASSERT_EQ(res.stages.size(), 2u);
  EXPECT_EQ(res.stages[0].stage, Stage::kShort);
  EXPECT_EQ(res.stages[1].stage, Stage::kLong);
  EXPECT_EQ(max_param_diff(res.stages[1].initial, res.stages[0].best), 0);
  EXPECT_TRUE(same_values(res.final_params, res.stages[1].best));
  std::set<std::string> stages;
  long prev = 0;
  double best = -1;
  for (const auto& r : res.log) {
    stages.insert(r.stage);
    EXPECT_GE(r.step, prev);
    prev = r.step;
    if (r.dev_bleu && r.stage == "short") best = std::max(best, *r.dev_bleu);
  }
  EXPECT_EQ(stages, (std::set<std::string>{"short", "long"}));
  EXPECT_EQ(res.stages[0].best_dev_bleu, best);
}

TEST(Curriculum, EmptyLongBucketSkipsStageTwo) {
  Fixture f;
  model::BridgeModel m(f.cfg);
  auto plans = make_plans(f, 10000);
  EXPECT_FALSE(plans.long_plan);
  auto res = run_curriculum(m, m.init_params(), plans.short_plan, plans.long_plan, f.dev(), f.vocab, 3);
  ASSERT_EQ(res.stages.size(), 1u);
  EXPECT_TRUE(same_values(res.final_params, res.stages[0].best));
}

TEST(Curriculum, EmptyShortBucketIsConfigError) {
  Fixture f;
  model::BridgeModel m(f.cfg);
  StagePlan empty{Stage::kShort, {}, TrainProfile::en_to_indic_short(), small_schedule()};
  EXPECT_THROW(run_curriculum(m, m.init_params(), empty, std::nullopt, f.dev(), f.vocab, 1), ConfigError);
}

TEST(Curriculum, SameSeedSameLogAndParameters) {
  Fixture f;
  model::BridgeModel m(f.cfg);
  auto plans = make_plans(f, 14);
  auto a = run_curriculum(m, m.init_params(), plans.short_plan, plans.long_plan, f.dev(), f.vocab, 9);
  auto b = run_curriculum(m, m.init_params(), plans.short_plan, plans.long_plan, f.dev(), f.vocab, 9);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].to_json().dump(), b.log[i].to_json().dump());
  EXPECT_LE(max_param_diff(a.final_params, b.final_params), 1e-12);
}

TEST(Checkpointing, ResumeMidStageReplaysIdentically) {
  Fixture f;
  model::BridgeModel m(f.cfg);
  auto plans = make_plans(f, 10000, 3);
  StagePlan plan = plans.short_plan;
  plan.schedule.total_steps = plan.profile.updates_for(plan.data.size());
  const EvalSet dev = f.dev();
  RunOptions opt;

  TrainState full;
  full.params = m.init_params();
  full.rng = Rng(4);
  begin_stage(full, plan.stage, false);
  std::vector<StageLogRecord> full_log;
  run_stage(m, full, plan, dev, f.vocab, opt, full_log);

  TrainState part;
  part.params = m.init_params();
  part.rng = Rng(4);
  begin_stage(part, plan.stage, false);
  StagePlan first_epoch = plan;
  first_epoch.profile.epochs = 1;
  std::vector<StageLogRecord> log;
  run_stage(m, part, first_epoch, dev, f.vocab, opt, log);
  const auto bytes = model::serialize_checkpoint(to_checkpoint(part, {{"note", "mid"}}));
  TrainState resumed = from_checkpoint(model::deserialize_checkpoint(bytes));
  run_stage(m, resumed, plan, dev, f.vocab, opt, log);

  ASSERT_EQ(log.size(), full_log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    EXPECT_EQ(log[i].to_json().dump(), full_log[i].to_json().dump()) << i;
  }
  EXPECT_TRUE(same_values(resumed.params, full.params));
  EXPECT_EQ(resumed.best_step, full.best_step);
}

TEST(Pipeline, ExamplesAndVocab) {
  Fixture f;
  auto ex = f.examples();
  ASSERT_EQ(ex.size(), f.train_rs.size());
  EXPECT_EQ(ex[0].prompt.back(), text::kBos);
  EXPECT_EQ(ex[0].target.back(), text::kEos);
  EXPECT_EQ(f.vocab.decode(ex[0].target), f.train_rs[0].translation);
  TextSetup cot{"translate", true};
  auto v = build_vocab({&f.train_rs}, cot);
  auto e = make_example(f.train_rs[0], v, cot);
  auto parsed = text::parse_cot_response(v.decode(e.target));
  ASSERT_TRUE(parsed.parsed());
  EXPECT_EQ(*parsed.translation, f.train_rs[0].translation);
  EXPECT_EQ(*parsed.transcription, f.train_rs[0].transcript);
}
