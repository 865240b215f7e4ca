// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bridgest/bridgest.hpp"
#include "bridgest/cli/commands.hpp"

using namespace bridgest;

namespace {

// Tolerances and budgets.
constexpr double kScheduleRelTol = 1e-12;
constexpr double kScheduleBudgetS = 1.0;
constexpr double kGradTol = 1e-4;
constexpr double kGradH = 1e-5;
constexpr double kGradBudgetS = 120.0;
constexpr double kPermutationTol = 1e-9;
constexpr double kLocalityTol = 1e-12;
constexpr double kHandBleu = 77.880;
constexpr double kHandBleuTol = 1e-3;
constexpr double kAccumTol = 1e-9;
constexpr double kCeRatio = 0.5;
constexpr double kBleuGain = 30.0;
constexpr double kEndToEndBudgetS = 600.0;
constexpr double kDeterminismTol = 1e-12;
constexpr std::size_t kFreezeSteps = 200;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

bool rel_close(double got, double want, double tol) { return std::abs(got - want) <= tol * std::abs(want); }

Tensor randn(Shape s, std::uint64_t seed, Real sd = 1) {
  Rng rng(seed);
  return normal_tensor(std::move(s), sd, rng);
}

// ---------------------------------------------------------------------------

Outcome schedule_anchors() {
  Outcome o;
  const auto t0 = Clock::now();
  const train::ScheduleConfig c;
  const double a0 = train::lr_at(0, c), aw = train::lr_at(c.warmup_steps, c), at = train::lr_at(c.total_steps, c);
  o.check(rel_close(a0, 1e-6, kScheduleRelTol), "lr(0)");
  o.check(rel_close(aw, 3e-5, kScheduleRelTol), "lr(3000)");
  o.check(rel_close(at, 1e-5, kScheduleRelTol), "lr(total)");
  // Continuity: the warmup and cosine expressions agree at the boundary.
  const double cosine_at_boundary = c.lr_min + 0.5 * (c.lr_peak - c.lr_min) * (1 + std::cos(0.0));
  o.check(rel_close(aw, cosine_at_boundary, kScheduleRelTol), "continuity at warmup boundary");
  for (long s = 0; s <= c.total_steps; ++s) (void)train::lr_at(s, c);
  const double dt = seconds_since(t0);
  o.check(dt < kScheduleBudgetS, "runtime");
  char buf[256];
  std::snprintf(buf, sizeof buf, "lr(0)=%.17g lr(3000)=%.17g lr(30000)=%.17g runtime=%.3fs", a0, aw, at, dt);
  o.detail << buf;
  return o;
}

Outcome gradient_fidelity() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto results = model::run_grad_suite(0, kGradH, kGradTol, 1);
  double worst = 0;
  for (const auto& r : results) {
    o.check(r.pass && r.result.checked > 0, r.name);
    worst = std::max(worst, double(r.result.max_rel_error));
    o.detail << r.name << "=" << r.result.max_rel_error << " ";
  }
  const double dt = seconds_since(t0);
  o.check(dt < kGradBudgetS, "runtime");
  o.detail << "worst=" << worst << " runtime=" << dt << "s";
  return o;
}

model::ModelConfig small_model(std::size_t vocab) {
  model::ModelConfig c;
  c.speech = {8, 8, 1, 11, 2};
  c.qformer = {2, 1, 8, 1, 2, 23};
  c.lora = {2, 4, {"q", "v"}, 31};
  c.decoder = {vocab, 8, 1, 2, 48, 41};
  return c;
}

struct SmallTask {
  std::vector<data::UtteranceRecord> train_rs, dev_rs;
  train::TextSetup setup;
  text::Vocab vocab;

  SmallTask(std::size_t n_train, std::size_t n_dev, std::uint64_t seed) {
    data::SynthSpec spec;
    spec.seed = seed;
    spec.vocab_size = 12;
    spec.min_len = 2;
    spec.max_len = 5;
    spec.mapping = data::permutation_mapping(12, seed);
    train_rs = data::synth_generate(spec, n_train);
    dev_rs = data::synth_generate(spec, n_dev, n_train);
    vocab = train::build_vocab({&train_rs, &dev_rs}, setup);
  }
};

Outcome lora_identity() {
  Outcome o;
  SmallTask task(0, 50, 3);
  model::BridgeModel m(small_model(task.vocab.size()));
  const auto s = m.init_params();
  const auto bare = model::strip_lora(s);
  std::size_t n = 0, loss_eq = 0, gen_eq = 0;
  for (const auto& ex : train::make_examples(task.dev_rs, task.vocab, task.setup)) {
    ++n;
    loss_eq += m.loss(s, ex) == m.loss(bare, ex);
    gen_eq += m.generate(s, ex.features, ex.prompt, 16) == m.generate(bare, ex.features, ex.prompt, 16);
  }
  o.check(loss_eq == n, "loss bit-exact");
  o.check(gen_eq == n, "generation identical");
  o.detail << "utterances=" << n << " loss_bit_exact=" << loss_eq << " generations_equal=" << gen_eq;
  return o;
}

// Trains `steps` updates under `profile`, two epochs, and reports which
// parameters moved.
struct FreezeAudit {
  bool frozen_intact = true;
  std::string first_violation;
  bool speech_changed_epoch0 = false;
  bool speech_stable_after = true;
  long steps = 0;
};

FreezeAudit audit_profile(const train::TrainProfile& profile) {
  const std::size_t epochs = 2;
  const std::size_t per_epoch = kFreezeSteps / epochs;
  const std::size_t n = per_epoch * profile.batch_size * profile.grad_accum_steps;
  SmallTask task(n, 4, 17);
  model::BridgeModel m(small_model(task.vocab.size()));
  auto ex = train::make_examples(task.train_rs, task.vocab, task.setup);
  train::TrainState st;
  st.params = m.init_params();
  const auto init = st.params.values_only();
  const train::ScheduleConfig sched{10, 1e-4, 3e-3, 1e-3, long(kFreezeSteps), 1};
  FreezeAudit a;
  auto speech_values = [&] {
    std::vector<Real> v;
    for (const auto& [name, e] : st.params.entries())
      if (model::param_group(name) == "speech_encoder") v.insert(v.end(), e.value.data.begin(), e.value.data.end());
    return v;
  };
  const auto speech0 = speech_values();
  std::vector<Real> speech_after_epoch0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    train::apply_freeze_policy(st.params, profile.freeze, epoch);
    // parameters frozen in this epoch must not move during it
    std::map<std::string, std::vector<Real>> frozen_now;
    for (const auto& [name, e] : st.params.entries())
      if (!e.trainable) frozen_now[name] = e.value.data;
    for (std::size_t b = 0; b < ex.size(); b += profile.batch_size) {
      train::train_step(m, std::span(ex.data() + b, profile.batch_size), st, profile, sched);
    }
    for (const auto& [name, v] : frozen_now) {
      if (st.params.at(name).data != v && a.frozen_intact) {
        a.frozen_intact = false;
        a.first_violation = name;
      }
    }
    if (epoch == 0) {
      speech_after_epoch0 = speech_values();
      a.speech_changed_epoch0 = speech_after_epoch0 != speech0;
    } else {
      a.speech_stable_after = a.speech_stable_after && speech_values() == speech_after_epoch0;
    }
  }
  // Parameters never trainable under the profile are bit-identical to init.
  for (const auto& [name, e] : st.params.entries()) {
    const auto g = model::param_group(name);
    const bool ever = profile.freeze.trainable_groups.count(g) ||
                      (g == "speech_encoder" && profile.freeze.speech_encoder_trainable_first_epoch);
    if (!ever && e.value.data != init.at(name).data && a.frozen_intact) {
      a.frozen_intact = false;
      a.first_violation = name;
    }
  }
  a.steps = st.global_step;
  return a;
}

Outcome freeze_audit() {
  Outcome o;
  const auto en = audit_profile(train::TrainProfile::en_to_indic_short());
  const auto in = audit_profile(train::TrainProfile::indic_to_en());
  o.check(en.steps == long(kFreezeSteps) && in.steps == long(kFreezeSteps), "step count");
  o.check(en.frozen_intact, "en-indic frozen parameter moved: " + en.first_violation);
  o.check(in.frozen_intact, "indic-en frozen parameter moved: " + in.first_violation);
  o.check(!en.speech_changed_epoch0, "en-indic speech encoder moved");
  o.check(in.speech_changed_epoch0, "indic-en speech encoder did not train in epoch 0");
  o.check(in.speech_stable_after, "indic-en speech encoder moved after epoch 0");
  o.detail << "steps=" << en.steps << "/" << in.steps << " en-indic frozen intact=" << en.frozen_intact
           << " indic-en frozen intact=" << in.frozen_intact << " speech epoch0 changed=" << in.speech_changed_epoch0
           << " speech stable after=" << in.speech_stable_after;
  return o;
}

Outcome qformer_contracts() {
  Outcome o;
  double worst_perm = 0, worst_local = 0;
  std::size_t sweep = 0, sweep_ok = 0;
  std::mt19937_64 rng(5);
  for (std::size_t cfg_i = 0; cfg_i < 4; ++cfg_i) {
    const std::size_t W = 2 + cfg_i * 2, Q = 1 + cfg_i % 3, T = 3 * W + 1 + cfg_i;
    model::QFormerConfig cfg{W, Q, 8, 1 + cfg_i % 2, 2, 100 + cfg_i};
    ParameterStore s;
    model::add_qformer_params(s, cfg, 5, 8, true);
    const Tensor x = randn({T, 5}, 200 + cfg_i);
    const Tensor y0 = model::qformer_forward(x, cfg, s);
    const auto wins = model::window_bounds(T, W);
    for (int trial = 0; trial < 10; ++trial) {
      Tensor p = x;
      for (const auto& w : wins) {
        std::vector<std::size_t> idx(w.size());
        std::iota(idx.begin(), idx.end(), w.begin);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t k = 0; k < w.size(); ++k)
          for (std::size_t d = 0; d < 5; ++d) p(w.begin + k, d) = x(idx[k], d);
      }
      worst_perm = std::max(worst_perm, double(max_abs_diff(model::qformer_forward(p, cfg, s), y0)));
    }
    for (std::size_t i = 0; i < wins.size(); ++i) {
      Tensor p = x;
      for (std::size_t t = wins[i].begin; t < wins[i].end; ++t)
        for (std::size_t d = 0; d < 5; ++d) p(t, d) += Real(0.5);
      const Tensor y = model::qformer_forward(p, cfg, s);
      for (std::size_t j = 0; j < wins.size(); ++j) {
        if (j == i) continue;
        for (std::size_t q = j * Q; q < (j + 1) * Q; ++q)
          for (std::size_t d = 0; d < 8; ++d) worst_local = std::max(worst_local, double(std::abs(y(q, d) - y0(q, d))));
      }
    }
  }
  for (std::size_t W : {1u, 2u, 3u, 7u, 16u})
    for (std::size_t Q : {1u, 2u, 4u})
      for (std::size_t T : {1u, 2u, 5u, 16u, 17u, 50u}) {
        model::QFormerConfig cfg{W, Q, 8, 1, 2, 7};
        ParameterStore s;
        model::add_qformer_params(s, cfg, 3, 4, true);
        const Tensor y = model::qformer_forward(randn({T, 3}, T * 31 + W), cfg, s);
        ++sweep;
        sweep_ok += y.rows() == (T + W - 1) / W * Q && y.cols() == 4;
      }
  o.check(worst_perm <= kPermutationTol, "permutation");
  o.check(worst_local <= kLocalityTol, "locality");
  o.check(sweep_ok == sweep, "token count");
  o.detail << "permutation max diff=" << worst_perm << " cross-window max diff=" << worst_local
           << " token-count sweep " << sweep_ok << "/" << sweep;
  return o;
}

Outcome bleu_oracle() {
  Outcome o;
  const std::vector<std::string> corpus{"the cat sat on the mat", "a b c d e f", "नमस्ते दुनिया यह एक परीक्षण है"};
  const double ident = text::bleu_corpus(corpus, corpus).score;
  const double hand = text::bleu_corpus(std::vector<std::string>{"a b c d"}, {"a b c d e"}).score;
  const double zero = text::bleu_corpus(std::vector<std::string>{"a b c x"}, {"a b y c"}).score;
  o.check(ident == 100.0, "identity");
  o.check(std::abs(hand - kHandBleu) <= kHandBleuTol, "hand case");
  o.check(zero == 0.0, "zero precision");
  char buf[160];
  std::snprintf(buf, sizeof buf, "identity=%.6f hand=%.6f zero_precision=%.6f", ident, hand, zero);
  o.detail << buf;
  return o;
}

std::string random_field(std::mt19937_64& rng) {
  static const std::vector<std::string> words{"a", "bb", "ccc", "नमस्ते", "दुनिया", "x1", "ñu", "தமிழ்", "yes", "no"};
  std::uniform_int_distribution<std::size_t> n(1, 8), w(0, words.size() - 1);
  std::string s;
  const std::size_t k = n(rng);
  for (std::size_t i = 0; i < k; ++i) s += (i ? " " : "") + words[w(rng)];
  return s;
}

Outcome cot_round_trip() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::size_t round_ok = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::string a = random_field(rng), b = random_field(rng);
    const auto r = text::parse_cot_response(text::format_cot_target(a, b));
    round_ok += r.parsed() && *r.transcription == a && *r.translation == b;
  }
  const std::vector<std::string> pieces{"Transcription:", "TRANSLATION:", "translation:", "\n", " ", ":", "x",
                                        "\xff", "\xe0\xa4", "नमस्ते", std::string(1, '\0'), "Transcription", "\t"};
  std::uniform_int_distribution<std::size_t> len(0, 12), pick(0, pieces.size() - 1), byte(0, 255);
  std::size_t fuzz_ok = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    const std::size_t k = len(rng);
    for (std::size_t j = 0; j < k; ++j) s += (rng() % 4 == 0) ? std::string(1, char(byte(rng))) : pieces[pick(rng)];
    try {
      const auto r = text::parse_cot_response(s);
      fuzz_ok += r.parsed() == (r.transcription.has_value() && r.translation.has_value());
    } catch (...) {
    }
  }
  std::vector<std::string> raw, refs, base;
  for (int i = 0; i < 300; ++i) {
    const std::string a = random_field(rng), b = random_field(rng);
    raw.push_back(text::format_cot_target(a, b));
    refs.push_back(b);
    base.push_back(b);
  }
  raw = cli::inject_malformed(raw, 3);
  std::vector<text::CoTResponse> resp;
  for (const auto& r : raw) resp.push_back(text::parse_cot_response(r));
  const auto m = text::cot_metrics(resp, refs, base);
  char rate[32];
  std::snprintf(rate, sizeof rate, "%.2f", m.success_rate_pct);
  o.check(round_ok == 1000, "round trip");
  o.check(fuzz_ok == 10000, "parser totality");
  o.check(m.parsed == 200 && std::string(rate) == "66.67", "success rate");
  o.detail << "round_trips=" << round_ok << "/1000 fuzz_ok=" << fuzz_ok << "/10000 success_rate=" << rate << "% ("
           << m.parsed << "/" << m.total << ")";
  return o;
}

Outcome accumulation_equivalence() {
  Outcome o;
  SmallTask task(4, 0, 9);
  model::BridgeModel m(small_model(task.vocab.size()));
  auto ex = train::make_examples(task.train_rs, task.vocab, task.setup);
  const train::ScheduleConfig sched{2, 1e-4, 3e-3, 1e-3, 50, 1};
  auto init = m.init_params();
  train::apply_freeze_policy(init, train::FreezePolicy::indic_to_en(), 0);
  for (auto& [n, e] : init.entries())
    if (n.ends_with(".lora.B"))
      for (std::size_t i = 0; i < e.value.numel(); ++i) e.value.data[i] = Real(0.01) * Real(int(i % 5) - 2);
  train::TrainState acc, fused;
  acc.params = init.values_only();
  fused.params = init.values_only();
  const train::TrainProfile pa{"hi-en", 1, 4, 1, train::FreezePolicy::indic_to_en()};
  const train::TrainProfile pf{"hi-en", 4, 1, 1, train::FreezePolicy::indic_to_en()};
  for (std::size_t i = 0; i < 4; ++i) train::train_step(m, std::span(&ex[i], 1), acc, pa, sched);
  train::train_step(m, std::span(ex.data(), 4), fused, pf, sched);
  const double diff = max_param_diff(acc.params, fused.params);
  const bool moved = !same_values(acc.params, init);
  o.check(acc.global_step == 1 && fused.global_step == 1, "one update each");
  o.check(moved, "update applied");
  o.check(diff <= kAccumTol, "max param diff");
  o.detail << "max |accumulated - fused| = " << diff;
  return o;
}

// ---------------------------------------------------------------------------
// End-to-end run shared by the last two criteria

struct EndToEnd {
  double untrained_ce = 0, untrained_bleu = 0, final_ce = 0, final_bleu = 0;
  bool stage2_from_stage1_best = false;
  std::size_t n_stages = 0, short_n = 0, long_n = 0;
  std::string log;
  ParameterStore params;
  double seconds = 0;
};

EndToEnd run_end_to_end() {
  const auto t0 = Clock::now();
  data::SynthSpec spec;
  spec.seed = 7;
  spec.vocab_size = 50;
  spec.min_len = 3;
  spec.max_len = 8;
  spec.mapping = data::permutation_mapping(50, 7);
  const auto train_rs = data::synth_generate(spec, 2000, 0);
  const auto dev_rs = data::synth_generate(spec, 200, 2000);
  const train::TextSetup setup;
  const auto vocab = train::build_vocab({&train_rs, &dev_rs}, setup);

  model::ModelConfig mc;
  mc.speech = {8, 16, 1, 11, 2};
  mc.qformer = {2, 1, 32, 1, 2, 23};
  mc.decoder = {vocab.size(), 32, 2, 2, 24, 41};
  const model::BridgeModel m(mc);

  const auto [sb, lb] = data::split_by_transcript_length(train_rs, 30);
  train::StagePlan sp{train::Stage::kShort, train::make_examples(sb.records, vocab, setup),
                      train::TrainProfile::en_to_indic_short(), {50, 1e-4, 3e-3, 1e-3, 0, 1}};
  sp.profile.epochs = 15;
  train::StagePlan lp{train::Stage::kLong, train::make_examples(lb.records, vocab, setup),
                      train::TrainProfile::en_to_indic_long(), {20, 1e-5, 1e-3, 1e-4, 0, 1}};
  lp.profile.epochs = 3;
  const auto dev = train::make_eval_set(dev_rs, vocab, setup);

  EndToEnd r;
  r.short_n = sp.data.size();
  r.long_n = lp.data.size();
  const auto p0 = m.init_params();
  const auto base = train::evaluate_dev(m, p0, dev, vocab);
  r.untrained_ce = base.loss;
  r.untrained_bleu = base.bleu.score;
  const auto res = train::run_curriculum(m, p0, sp, lp, dev, vocab, 1);
  const auto fin = train::evaluate_dev(m, res.final_params, dev, vocab);
  r.final_ce = fin.loss;
  r.final_bleu = fin.bleu.score;
  r.n_stages = res.stages.size();
  r.stage2_from_stage1_best = res.stages.size() == 2 && same_values(res.stages[1].initial, res.stages[0].best);
  for (const auto& rec : res.log) r.log += rec.to_json().dump() + "\n";
  r.params = res.final_params.values_only();
  r.seconds = seconds_since(t0);
  return r;
}

Outcome end_to_end(const EndToEnd& r) {
  Outcome o;
  o.check(r.final_ce <= kCeRatio * r.untrained_ce, "dev cross-entropy");
  o.check(r.final_bleu - r.untrained_bleu >= kBleuGain, "dev BLEU gain");
  o.check(r.n_stages == 2, "two stages");
  o.check(r.stage2_from_stage1_best, "stage-2 initializer");
  o.check(r.seconds <= kEndToEndBudgetS, "runtime");
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "short=%zu long=%zu dev CE %.4f -> %.4f (ratio %.3f) dev BLEU %.2f -> %.2f (+%.2f) stages=%zu "
                "stage2_init_is_stage1_best=%d runtime=%.1fs",
                r.short_n, r.long_n, r.untrained_ce, r.final_ce, r.final_ce / r.untrained_ce, r.untrained_bleu,
                r.final_bleu, r.final_bleu - r.untrained_bleu, r.n_stages, int(r.stage2_from_stage1_best), r.seconds);
  o.detail << buf;
  return o;
}

Outcome determinism(const EndToEnd& a) {
  Outcome o;
  const EndToEnd b = run_end_to_end();
  const double diff = max_param_diff(a.params, b.params);
  o.check(!a.log.empty() && a.log == b.log, "stage log bytes");
  o.check(diff <= kDeterminismTol, "parameters");
  o.detail << "log bytes=" << a.log.size() << " identical=" << (a.log == b.log) << " max param diff=" << diff;
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  EndToEnd e2e;
  bool e2e_ok = false;
  std::string e2e_error;
  auto ensure_e2e = [&] {
    if (!e2e_ok && e2e_error.empty()) {
      try {
        e2e = run_end_to_end();
        e2e_ok = true;
      } catch (const std::exception& e) {
        e2e_error = e.what();
      }
    }
    if (!e2e_ok) throw std::runtime_error("end-to-end run failed: " + e2e_error);
  };
  const std::vector<Criterion> criteria{
      {"schedule anchors", schedule_anchors},
      {"gradient fidelity", gradient_fidelity},
      {"LoRA zero-init identity", lora_identity},
      {"freeze audit", freeze_audit},
      {"Q-Former contracts", qformer_contracts},
      {"BLEU oracle", bleu_oracle},
      {"CoT round trip and metrics", cot_round_trip},
      {"accumulation equivalence", accumulation_equivalence},
      {"end-to-end learning", [&] {
         ensure_e2e();
         return end_to_end(e2e);
       }},
      {"determinism", [&] {
         ensure_e2e();
         return determinism(e2e);
       }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].name << ": " << o.detail.str()
              << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
