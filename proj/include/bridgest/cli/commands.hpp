#pragma once

// Subcommand implementations. Each takes a resolved config and its run
// directory, writes its outputs plus resolved_config.json there, and returns
// a JSON report. Failures surface as the library's exception types; the
// executable maps them to exit codes (see exit_code_for).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bridgest/bridgest.hpp"
#include "bridgest/cli/config.hpp"

namespace bridgest::cli {

namespace fs = std::filesystem;

inline const std::vector<std::string> kCommands{"synth", "train", "eval", "cot-eval", "lr-dump", "grad-check"};

// ---------------------------------------------------------------------------
// Defaults

inline json train_stage_defaults(const train::TrainProfile& p) {
  return {{"batch_size", p.batch_size},
          {"grad_accum_steps", p.grad_accum_steps},
          {"epochs", p.epochs},
          {"freeze", train::to_json(p.freeze)},
          {"schedule", train::to_json(train::ScheduleConfig{})}};
}

inline json default_config(const std::string& command) {
  json base{{"seed", 0}, {"out_dir", "runs"}, {"run_id", ""}};
  if (command == "synth") {
    base["seed"] = 7;
    base["n_train"] = 100;
    base["n_dev"] = 20;
    base["n_test"] = 20;
    base["synth"] = {{"vocab_size", 50},
                     {"sentence_length_range", {3, 8}},
                     {"mapping_rule", "permutation"},
                     {"frames_per_token", 4},
                     {"feature_dim", 8},
                     {"noise_std", 0.1},
                     {"frame_shift_s", 0.02},
                     {"direction", "en-hi"}};
  } else if (command == "train") {
    model::ModelConfig m;
    m.decoder.vocab_size = 0;
    base["train_manifest"] = "";
    base["dev_manifest"] = "";
    base["profile"] = "en-indic";
    base["prompt"] = "translate";
    base["cot"] = false;
    base["length_threshold_chars"] = data::kDefaultLengthThreshold;
    base["reset_optimizer_between_stages"] = true;
    base["eval"] = {{"max_new_tokens", 64}, {"threads", 1}};
    base["model"] = model::to_json(m);
    base["stages"] = {{"short", train_stage_defaults(train::TrainProfile::en_to_indic_short())},
                      {"long", train_stage_defaults(train::TrainProfile::en_to_indic_long())},
                      {"single", train_stage_defaults(train::TrainProfile::indic_to_en())}};
  } else if (command == "eval") {
    base["checkpoint"] = "";
    base["dev_manifest"] = "";
    base["test_manifest"] = "";
    base["max_new_tokens"] = 64;
    base["threads"] = 1;
  } else if (command == "cot-eval") {
    base["checkpoint"] = "";
    base["manifest"] = "";
    base["baseline_hyps"] = "";
    base["baseline_checkpoint"] = "";
    base["inject_malformed_every"] = 0;
    base["delta_baseline"] = "parsed_subset";
    base["max_new_tokens"] = 64;
    base["threads"] = 1;
  } else if (command == "lr-dump") {
    base["schedule"] = train::to_json(train::ScheduleConfig{});
  } else if (command == "grad-check") {
    base["h"] = 1e-5;
    base["tolerance"] = 1e-4;
    base["configs"] = 1;
    base["inject_fault"] = false;
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  return base;
}

// ---------------------------------------------------------------------------
// Helpers

/// Typed read of a dotted key; type mismatches become config errors.
template <class T>
T get(const json& cfg, const std::string& key) {
  const json* cur = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    auto it = cur->find(part);
    if (it == cur->end()) throw ConfigError("missing config key '" + key + "'");
    cur = &*it;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    return cur->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type: " + cur->dump());
  }
}

inline void prepare_run_dir(const fs::path& dir, const json& cfg) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::ofstream out(dir / "resolved_config.json");
  if (!out) throw std::runtime_error("cannot write to output directory '" + dir.string() + "'");
  out << cfg.dump(2) << '\n';
}

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << s;
  if (!out) throw std::runtime_error("write failed for '" + p.string() + "'");
}

inline std::vector<data::UtteranceRecord> load_required_manifest(const json& cfg, const std::string& key) {
  const auto path = get<std::string>(cfg, key);
  if (path.empty()) throw ConfigError("config key '" + key + "' is required");
  if (!fs::exists(path)) throw ConfigError(key + ": no such file '" + path + "'");
  return data::load_manifest(path);
}

/// Direction tag shared by every record; mixed directions are rejected.
inline std::string common_direction(const std::vector<data::UtteranceRecord>& rs, const std::string& fallback) {
  if (rs.empty()) return fallback;
  const std::string tag = rs.front().direction.tag();
  for (const auto& r : rs) {
    if (r.direction.tag() != tag) {
      throw ValidationError("manifest mixes directions '" + tag + "' and '" + r.direction.tag() + "' (record " + r.id +
                            ")");
    }
  }
  return tag;
}

// Everything eval needs to rebuild a trained model from a checkpoint.
struct LoadedModel {
  model::ModelConfig config;
  text::Vocab vocab;
  train::TextSetup setup;
  std::string direction;
  ParameterStore params;
};

inline json checkpoint_config(const model::ModelConfig& m, const text::Vocab& v, const train::TextSetup& setup,
                              const std::string& direction) {
  return {{"model", model::to_json(m)},
          {"vocab", v.tokens()},
          {"prompt", setup.prompt},
          {"cot", setup.cot},
          {"direction", direction}};
}

inline LoadedModel load_trained(const std::string& path) {
  if (path.empty()) throw ConfigError("a checkpoint path is required");
  if (!fs::exists(path)) throw CheckpointError("checkpoint not found: '" + path + "'");
  const model::Checkpoint c = model::load_checkpoint_file(path);
  LoadedModel lm;
  try {
    model::from_json(c.config.at("model"), lm.config);
    lm.vocab = text::Vocab::from_tokens(c.config.at("vocab").get<std::vector<std::string>>());
    lm.setup.prompt = c.config.at("prompt").get<std::string>();
    lm.setup.cot = c.config.at("cot").get<bool>();
    lm.direction = c.config.at("direction").get<std::string>();
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint field 'config' is incomplete: " + std::string(e.what()));
  }
  lm.params = c.params.values_only();
  return lm;
}

inline train::TrainProfile stage_profile(const json& j, const std::string& direction, const std::string& where) {
  train::TrainProfile p;
  p.direction = direction;
  model::detail::reject_unknown(j, {"batch_size", "grad_accum_steps", "epochs", "freeze", "schedule"}, where);
  p.batch_size = get<std::size_t>(j, "batch_size");
  p.grad_accum_steps = get<std::size_t>(j, "grad_accum_steps");
  p.epochs = get<std::size_t>(j, "epochs");
  train::from_json(j.at("freeze"), p.freeze);
  p.validate();
  return p;
}

inline train::ScheduleConfig stage_schedule(const json& j) {
  train::ScheduleConfig s;
  train::from_json(j.at("schedule"), s);
  return s;
}

// ---------------------------------------------------------------------------
// synth

inline data::SynthSpec synth_spec(const json& cfg) {
  const json& j = cfg.at("synth");
  data::SynthSpec s;
  s.seed = get<std::uint64_t>(cfg, "seed");
  s.vocab_size = get<std::size_t>(j, "vocab_size");
  const auto range = get<std::vector<std::size_t>>(j, "sentence_length_range");
  if (range.size() != 2) throw ConfigError("synth.sentence_length_range must be [min, max]");
  s.min_len = range[0];
  s.max_len = range[1];
  const json& rule = j.at("mapping_rule");
  if (rule.is_string()) {
    const auto r = rule.get<std::string>();
    if (r == "permutation") {
      s.mapping = data::permutation_mapping(s.vocab_size, s.seed);
    } else if (r != "identity") {
      throw ConfigError("synth.mapping_rule must be 'identity', 'permutation' or an explicit index list");
    }
  } else {
    s.mapping = get<std::vector<std::size_t>>(j, "mapping_rule");
  }
  s.frames_per_token = get<std::size_t>(j, "frames_per_token");
  s.feature_dim = get<std::size_t>(j, "feature_dim");
  s.noise_std = get<double>(j, "noise_std");
  s.frame_shift_s = get<double>(j, "frame_shift_s");
  s.direction = data::Direction::parse(get<std::string>(j, "direction"));
  s.validate();
  return s;
}

inline json cmd_synth(const json& cfg, const fs::path& dir, std::ostream& out) {
  const data::SynthSpec spec = synth_spec(cfg);
  const auto n_train = get<std::size_t>(cfg, "n_train");
  const auto n_dev = get<std::size_t>(cfg, "n_dev");
  const auto n_test = get<std::size_t>(cfg, "n_test");
  prepare_run_dir(dir, cfg);
  // One index space across splits, so record ids are unique.
  const auto train = data::synth_generate(spec, n_train, 0);
  const auto dev = data::synth_generate(spec, n_dev, n_train);
  const auto test = data::synth_generate(spec, n_test, n_train + n_dev);
  data::save_manifest((dir / "train.jsonl").string(), train);
  data::save_manifest((dir / "dev.jsonl").string(), dev);
  data::save_manifest((dir / "test.jsonl").string(), test);
  const auto stats = data::dataset_stats(
      {{data::Split::kTrain, &train}, {data::Split::kDev, &dev}, {data::Split::kTest, &test}}, {spec.direction.tag()});
  write_text(dir / "stats.json", stats.to_json().dump(2) + "\n");
  write_text(dir / "stats.txt", stats.to_text());
  out << stats.to_text();
  return {{"train", n_train}, {"dev", n_dev}, {"test", n_test}, {"stats", stats.to_json()}};
}

// ---------------------------------------------------------------------------
// train

inline json cmd_train(const json& cfg, const fs::path& dir, std::ostream& out) {
  const auto seed = get<std::uint64_t>(cfg, "seed");
  const auto profile = get<std::string>(cfg, "profile");
  if (profile != "en-indic" && profile != "indic-en") {
    throw ConfigError("profile must be 'en-indic' (two-stage) or 'indic-en' (single stage)");
  }
  train::TextSetup setup;
  setup.prompt = get<std::string>(cfg, "prompt");
  setup.cot = get<bool>(cfg, "cot");
  if (text::tokenize(setup.prompt).empty()) throw ConfigError("prompt must contain at least one word");

  model::ModelConfig mc;
  model::from_json(cfg.at("model"), mc);
  const auto train_rs = load_required_manifest(cfg, "train_manifest");
  const auto dev_rs = load_required_manifest(cfg, "dev_manifest");
  if (train_rs.empty()) throw ArgumentError("train_manifest is empty");
  if (dev_rs.empty()) throw ArgumentError("dev_manifest is empty");
  const std::string direction = common_direction(train_rs, "");
  for (const auto* rs : {&train_rs, &dev_rs}) {
    for (const auto& r : *rs) {
      const auto f = r.features();
      if (f.cols() != mc.speech.feature_dim_in) {
        throw ConfigError("record " + r.id + " has feature_dim " + std::to_string(f.cols()) +
                          " but model.speech_encoder.feature_dim_in is " + std::to_string(mc.speech.feature_dim_in));
      }
    }
  }

  const text::Vocab vocab = train::build_vocab({&train_rs, &dev_rs}, setup);
  if (mc.decoder.vocab_size == 0) {
    mc.decoder.vocab_size = vocab.size();
  } else if (mc.decoder.vocab_size < vocab.size()) {
    throw ConfigError("model.decoder.vocab_size " + std::to_string(mc.decoder.vocab_size) +
                      " is smaller than the corpus vocabulary (" + std::to_string(vocab.size()) + ")");
  }
  mc.validate();

  const json& stages = cfg.at("stages");
  model::detail::reject_unknown(stages, {"short", "long", "single"}, "stages");
  train::StagePlan first;
  std::optional<train::StagePlan> second;
  if (profile == "en-indic") {
    const auto threshold = get<std::size_t>(cfg, "length_threshold_chars");
    const auto [short_b, long_b] = data::split_by_transcript_length(train_rs, threshold);
    first.stage = train::Stage::kShort;
    first.profile = stage_profile(stages.at("short"), direction, "stages.short");
    first.schedule = stage_schedule(stages.at("short"));
    first.data = train::make_examples(short_b.records, vocab, setup);
    if (first.data.empty()) {
      throw ConfigError("no training record is shorter than length_threshold_chars=" + std::to_string(threshold));
    }
    if (!long_b.records.empty()) {
      second.emplace();
      second->stage = train::Stage::kLong;
      second->profile = stage_profile(stages.at("long"), direction, "stages.long");
      second->schedule = stage_schedule(stages.at("long"));
      second->data = train::make_examples(long_b.records, vocab, setup);
    }
  } else {
    first.stage = train::Stage::kSingle;
    first.profile = stage_profile(stages.at("single"), direction, "stages.single");
    first.schedule = stage_schedule(stages.at("single"));
    first.data = train::make_examples(train_rs, vocab, setup);
  }

  const train::EvalSet dev = train::make_eval_set(dev_rs, vocab, setup);
  train::RunOptions opt;
  opt.eval.max_new_tokens = get<std::size_t>(cfg, "eval.max_new_tokens");
  opt.eval.threads = std::max<std::size_t>(1, get<std::size_t>(cfg, "eval.threads"));
  opt.eval.cot = setup.cot;
  opt.reset_optimizer_between_stages = get<bool>(cfg, "reset_optimizer_between_stages");

  prepare_run_dir(dir, cfg);
  std::ofstream log(dir / "stage_log.jsonl", std::ios::binary);
  if (!log) throw std::runtime_error("cannot write stage log in '" + dir.string() + "'");
  opt.on_log = [&](const train::StageLogRecord& r) {
    log << r.to_json().dump() << '\n';
    if (r.dev_bleu) {
      out << r.stage << " epoch " << r.epoch << " step " << r.step << " loss " << r.loss << " dev_bleu "
          << *r.dev_bleu << '\n';
    }
  };

  const model::BridgeModel m(mc);
  auto res = train::run_curriculum(m, m.init_params(), first, second, dev, vocab, seed, opt);
  log.flush();

  const json ck_cfg = checkpoint_config(mc, vocab, setup, direction);
  model::Checkpoint best;
  best.config = ck_cfg;
  best.params = res.final_params.values_only();
  best.state = train::state_to_json(res.state);
  model::save_checkpoint_file((dir / "best.ckpt").string(), best);
  train::save_checkpoint(res.state, ck_cfg, (dir / "final.ckpt").string());

  json report{{"direction", direction}, {"profile", profile}, {"vocab_size", vocab.size()}, {"stages", json::array()}};
  for (const auto& s : res.stages) {
    report["stages"].push_back(
        {{"stage", train::to_string(s.stage)}, {"best_dev_bleu", s.best_dev_bleu}, {"best_step", s.best_step}});
  }
  write_text(dir / "train_report.json", report.dump(2) + "\n");
  return report;
}

// ---------------------------------------------------------------------------
// eval

inline train::DevResult run_eval(const LoadedModel& lm, const std::vector<data::UtteranceRecord>& rs,
                                 std::size_t max_new, std::size_t threads) {
  const model::BridgeModel m(lm.config);
  train::EvalOptions opt;
  opt.max_new_tokens = max_new;
  opt.threads = std::max<std::size_t>(1, threads);
  opt.cot = lm.setup.cot;
  return train::evaluate_dev(m, lm.params, train::make_eval_set(rs, lm.vocab, lm.setup), lm.vocab, opt);
}

inline std::string join_lines(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += x + '\n';
  return s;
}

inline json cmd_eval(const json& cfg, const fs::path& dir, std::ostream& out) {
  const LoadedModel lm = load_trained(get<std::string>(cfg, "checkpoint"));
  std::vector<std::pair<std::string, std::vector<data::UtteranceRecord>>> splits;
  for (const char* split : {"dev", "test"}) {
    const std::string key = std::string(split) + "_manifest";
    const auto path = get<std::string>(cfg, key);
    if (path.empty()) continue;
    if (!fs::exists(path)) throw ConfigError(key + ": no such file '" + path + "'");
    auto rs = data::load_manifest(path);
    if (rs.empty()) throw ArgumentError(key + " '" + path + "' is empty");
    splits.emplace_back(split, std::move(rs));
  }
  if (splits.empty()) throw ConfigError("eval needs dev_manifest and/or test_manifest");
  prepare_run_dir(dir, cfg);
  json report = json::array();
  for (const auto& [split, rs] : splits) {
    const auto r = run_eval(lm, rs, get<std::size_t>(cfg, "max_new_tokens"), get<std::size_t>(cfg, "threads"));
    const std::string direction = common_direction(rs, lm.direction);
    report.push_back({{"direction", direction}, {"split", split}, {"bleu", r.bleu.score}, {"n_utterances", rs.size()}});
    write_text(dir / ("hyps_" + split + ".txt"), join_lines(r.hyps));
    out << direction << ' ' << split << " BLEU " << r.bleu.score << " (" << rs.size() << " utterances)\n";
  }
  write_text(dir / "eval_report.json", report.dump(2) + "\n");
  return report;
}

// ---------------------------------------------------------------------------
// cot-eval

/// Deterministic malformation: every k-th response (1-based) loses its colons,
/// which removes both markers.
inline std::vector<std::string> inject_malformed(std::vector<std::string> raw, std::size_t every) {
  if (every == 0) return raw;
  for (std::size_t i = every - 1; i < raw.size(); i += every) {
    raw[i].erase(std::remove(raw[i].begin(), raw[i].end(), ':'), raw[i].end());
  }
  return raw;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

inline json cmd_cot_eval(const json& cfg, const fs::path& dir, std::ostream& out) {
  const auto baseline_hyps_path = get<std::string>(cfg, "baseline_hyps");
  const auto baseline_ckpt_path = get<std::string>(cfg, "baseline_checkpoint");
  if (baseline_hyps_path.empty() && baseline_ckpt_path.empty()) {
    throw ConfigError("cot-eval needs baseline_hyps or baseline_checkpoint");
  }
  if (!baseline_hyps_path.empty() && !baseline_ckpt_path.empty()) {
    throw ConfigError("give only one of baseline_hyps and baseline_checkpoint");
  }
  const auto mode_s = get<std::string>(cfg, "delta_baseline");
  text::DeltaBaseline mode;
  if (mode_s == "parsed_subset") {
    mode = text::DeltaBaseline::kParsedSubset;
  } else if (mode_s == "full_set") {
    mode = text::DeltaBaseline::kFullSet;
  } else {
    throw ConfigError("delta_baseline must be 'parsed_subset' or 'full_set'");
  }
  const LoadedModel lm = load_trained(get<std::string>(cfg, "checkpoint"));
  if (!lm.setup.cot) throw ConfigError("checkpoint was not trained with CoT targets");
  const auto rs = load_required_manifest(cfg, "manifest");
  if (rs.empty()) throw ArgumentError("manifest is empty");
  const auto max_new = get<std::size_t>(cfg, "max_new_tokens");
  const auto threads = get<std::size_t>(cfg, "threads");

  std::vector<std::string> baseline;
  if (!baseline_hyps_path.empty()) {
    baseline = read_lines(baseline_hyps_path);
    if (baseline.size() != rs.size()) {
      throw ArgumentError("baseline_hyps has " + std::to_string(baseline.size()) + " lines for " +
                          std::to_string(rs.size()) + " utterances");
    }
  } else {
    const LoadedModel base = load_trained(baseline_ckpt_path);
    if (base.setup.cot) throw ConfigError("baseline_checkpoint must be a direct (non-CoT) model");
    baseline = run_eval(base, rs, max_new, threads).hyps;
  }
  prepare_run_dir(dir, cfg);

  const auto raw = inject_malformed(run_eval(lm, rs, max_new, threads).raw,
                                    get<std::size_t>(cfg, "inject_malformed_every"));
  std::vector<text::CoTResponse> responses;
  std::vector<std::string> refs;
  std::ofstream resp(dir / "responses.jsonl", std::ios::binary);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    responses.push_back(text::parse_cot_response(raw[i]));
    refs.push_back(text::normalize_whitespace(rs[i].translation));
    json line{{"id", rs[i].id}, {"raw", raw[i]}, {"parsed", responses.back().parsed()}};
    if (responses.back().parsed()) line["translation"] = *responses.back().translation;
    resp << line.dump() << '\n';
  }
  const auto m = text::cot_metrics(responses, refs, baseline, mode);
  auto opt_score = [](const std::optional<text::BleuReport>& b) { return b ? json(b->score) : json(nullptr); };
  json report{{"direction", common_direction(rs, lm.direction)},
              {"total", m.total},
              {"parsed", m.parsed},
              {"success_rate_pct", m.success_rate_pct},
              {"bleu_parsed", opt_score(m.bleu_parsed)},
              {"bleu_baseline_subset", opt_score(m.bleu_baseline)},
              {"delta_baseline", mode_s},
              {"delta", m.delta ? json(*m.delta) : json(nullptr)}};
  write_text(dir / "cot_report.json", report.dump(2) + "\n");
  out << report.dump(2) << '\n';
  return report;
}

// ---------------------------------------------------------------------------
// lr-dump

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline json cmd_lr_dump(const json& cfg, const fs::path& dir, std::ostream& out) {
  train::ScheduleConfig s;
  train::from_json(cfg.at("schedule"), s);
  s.validate();
  prepare_run_dir(dir, cfg);
  std::string csv = "step,lr\n";
  for (long t = 0; t <= s.total_steps; ++t) csv += std::to_string(t) + ',' + format_real(train::lr_at(t, s)) + '\n';
  write_text(dir / "lr_schedule.csv", csv);
  out << "wrote " << (s.total_steps + 1) << " rows to " << (dir / "lr_schedule.csv").string() << '\n';
  return {{"rows", s.total_steps + 1},
          {"lr_first", train::lr_at(0, s)},
          {"lr_peak_at_warmup", train::lr_at(s.warmup_steps, s)},
          {"lr_last", train::lr_at(s.total_steps, s)}};
}

// ---------------------------------------------------------------------------
// grad-check

inline json cmd_grad_check(const json& cfg, const fs::path& dir, std::ostream& out) {
  if (!kDoublePrecision) throw ConfigError("grad-check requires a double-precision build (BRIDGEST_FP32=OFF)");
  const auto tol = get<double>(cfg, "tolerance");
  const auto configs = get<std::size_t>(cfg, "configs");
  if (configs < 1) throw ConfigError("configs must be >= 1");
  prepare_run_dir(dir, cfg);
  const auto results = model::run_grad_suite(get<std::uint64_t>(cfg, "seed"), get<double>(cfg, "h"), tol, configs,
                                             get<bool>(cfg, "inject_fault"));
  json layers = json::array();
  bool all = true;
  for (const auto& r : results) {
    all = all && r.pass;
    layers.push_back({{"name", r.name},
                      {"max_rel_error", r.result.max_rel_error},
                      {"worst_param", r.result.worst_param},
                      {"worst_index", r.result.worst_index},
                      {"worst_analytic", r.result.worst_analytic},
                      {"worst_numeric", r.result.worst_numeric},
                      {"checked", r.result.checked},
                      {"pass", r.pass}});
    out << (r.pass ? "PASS " : "FAIL ") << r.name << " max_rel_error=" << r.result.max_rel_error << '\n';
  }
  json report{{"tolerance", tol}, {"pass", all}, {"layers", layers}};
  write_text(dir / "grad_check.json", report.dump(2) + "\n");
  return report;
}

// ---------------------------------------------------------------------------
// Dispatch

/// 1 for configuration/validation problems, 2 for runtime/numeric failures.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const std::invalid_argument*>(&e) || dynamic_cast<const json::exception*>(&e)) return 1;
  return 2;
}

struct CommandOutcome {
  int exit_code = 0;
  json report;
};

inline CommandOutcome run_command(const std::string& command, const ResolvedRun& run, std::ostream& out) {
  static const std::map<std::string, std::function<json(const json&, const fs::path&, std::ostream&)>> table{
      {"synth", cmd_synth},     {"train", cmd_train},       {"eval", cmd_eval},
      {"cot-eval", cmd_cot_eval}, {"lr-dump", cmd_lr_dump}, {"grad-check", cmd_grad_check}};
  auto it = table.find(command);
  if (it == table.end()) throw ConfigError("unknown command '" + command + "'");
  CommandOutcome r;
  r.report = it->second(run.config, run.dir, out);
  if (command == "grad-check" && !r.report.at("pass").get<bool>()) r.exit_code = 2;
  return r;
}

}  // namespace bridgest::cli
