#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "bridgest/datakit/bucketing.hpp"
#include "bridgest/datakit/manifest.hpp"
#include "bridgest/datakit/segment.hpp"
#include "bridgest/datakit/stats.hpp"
#include "bridgest/datakit/synth.hpp"
#include "bridgest/textkit/tokenize.hpp"

using namespace bridgest;
using namespace bridgest::data;

namespace {

UtteranceRecord rec(const std::string& id, const std::string& transcript, double dur = 1.0,
                    const std::string& dir = "en-hi") {
  UtteranceRecord r;
  r.id = id;
  r.audio_source = AudioFile{"audio/" + id + ".wav"};
  r.offset_s = 0.5;
  r.duration_s = dur;
  r.transcript = transcript;
  r.translation = "t";
  r.direction = Direction::parse(dir);
  return r;
}

std::string repeat_char(const std::string& c, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += c;
  return s;
}

}  // namespace

TEST(Direction, ParsesSeveralSpellings) {
  EXPECT_EQ(Direction::parse("en-hi").tag(), "en-hi");
  EXPECT_EQ(Direction::parse("en->ta").tag(), "en-ta");
  EXPECT_EQ(Direction::parse("bn→en").tag(), "bn-en");
  EXPECT_THROW(Direction::parse("en"), ValidationError);
  EXPECT_THROW(Direction::parse("-hi"), ValidationError);
}

TEST(Manifest, EmptyFileIsEmpty) {
  std::istringstream in("");
  EXPECT_TRUE(read_manifest(in).empty());
}

TEST(Manifest, TwoLinesInOrder) {
  std::ostringstream out;
  write_manifest(out, {rec("u1", "hello there"), rec("u2", "bye")});
  std::istringstream in(out.str());
  auto rs = read_manifest(in);
  ASSERT_EQ(rs.size(), 2u);
  EXPECT_EQ(rs[0].id, "u1");
  EXPECT_EQ(rs[1].id, "u2");
  EXPECT_EQ(rs[0].transcript, "hello there");
  EXPECT_EQ(std::get<AudioFile>(rs[0].audio_source).path, "audio/u1.wav");
  EXPECT_DOUBLE_EQ(rs[0].offset_s, 0.5);
  EXPECT_EQ(rs[1].direction.tag(), "en-hi");
}

TEST(Manifest, InlineFeaturesRoundTrip) {
  SynthSpec spec;
  spec.seed = 3;
  auto rs = synth_generate(spec, 3);
  std::ostringstream out;
  write_manifest(out, rs);
  std::istringstream in(out.str());
  auto back = read_manifest(in);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].features().shape, rs[i].features().shape);
    EXPECT_EQ(back[i].features().data, rs[i].features().data);
  }
}

TEST(Manifest, ZeroDurationCitesId) {
  std::istringstream in(
      "{\"id\":\"ok\",\"audio_source\":\"a.wav\",\"offset_s\":0,\"duration_s\":1,\"transcript\":\"x\",\"translation\":\"y\","
      "\"direction\":\"en-hi\"}\n"
      "{\"id\":\"bad-7\",\"audio_source\":\"a.wav\",\"offset_s\":0,\"duration_s\":0,\"transcript\":\"x\",\"translation\":"
      "\"y\",\"direction\":\"en-hi\"}\n");
  try {
    read_manifest(in);
    FAIL();
  } catch (const ValidationError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("bad-7"), std::string::npos);
    EXPECT_NE(m.find("duration_s"), std::string::npos);
    EXPECT_NE(m.find("line 2"), std::string::npos);
  }
}

TEST(Manifest, MalformedJsonReportsLine) {
  std::istringstream in("\n{not json}\n");
  try {
    read_manifest(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Manifest, UnknownKeyAndEmptyTextRejected) {
  std::istringstream a(
      "{\"id\":\"x\",\"audio_source\":\"a.wav\",\"offset_s\":0,\"duration_s\":1,\"transcript\":\"x\",\"translation\":\"y\","
      "\"direction\":\"en-hi\",\"extra\":1}\n");
  EXPECT_THROW(read_manifest(a), ParseError);
  std::istringstream b(
      "{\"id\":\"x\",\"audio_source\":\"a.wav\",\"offset_s\":0,\"duration_s\":1,\"transcript\":\"  \",\"translation\":\"y\","
      "\"direction\":\"en-hi\"}\n");
  EXPECT_THROW(read_manifest(b), ValidationError);
}

TEST(Manifest, FileRoundTrip) {
  const auto p = std::filesystem::temp_directory_path() / "bridgest_manifest_test.jsonl";
  save_manifest(p.string(), {rec("a", "x"), rec("b", "y")});
  EXPECT_EQ(load_manifest(p.string()).size(), 2u);
  std::filesystem::remove(p);
}

TEST(Segment, WorkedExamples) {
  EXPECT_EQ(extract_segment(2.0, 3.0, 16000), (SampleRange{32000, 80000}));
  EXPECT_EQ(extract_segment(0, 1.0, 16000), (SampleRange{0, 16000}));
  EXPECT_EQ(extract_segment(1.5, 0.25, 8000), (SampleRange{12000, 14000}));
}

TEST(Segment, Errors) {
  EXPECT_THROW(extract_segment(0, 1, 0), ArgumentError);
  EXPECT_THROW(extract_segment(1, 1, 16000, 20000), RangeError);
  EXPECT_NO_THROW(extract_segment(1, 0.25, 16000, 20000));
  EXPECT_THROW(extract_segment(0, 1e-9, 16000), RangeError);
}

TEST(Segment, Monotone) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 100), d(0.01, 10);
  for (int i = 0; i < 2000; ++i) {
    const double o = u(rng), dur = d(rng), step = u(rng) / 10;
    const auto a = extract_segment(o, dur, 16000), b = extract_segment(o + step, dur, 16000),
               c = extract_segment(o, dur + step, 16000);
    EXPECT_LE(a.start, b.start);
    EXPECT_LE(a.end, c.end);
  }
}

TEST(Bucketing, BoundaryAt400) {
  auto [s1, l1] = split_by_transcript_length({rec("a", repeat_char("x", 399))});
  EXPECT_EQ(s1.records.size(), 1u);
  EXPECT_TRUE(l1.records.empty());
  auto [s2, l2] = split_by_transcript_length({rec("a", repeat_char("x", 400))});
  EXPECT_TRUE(s2.records.empty());
  EXPECT_EQ(l2.records.size(), 1u);
  auto [s3, l3] = split_by_transcript_length({});
  EXPECT_TRUE(s3.records.empty());
  EXPECT_TRUE(l3.records.empty());
  EXPECT_EQ(s3.label, BucketLabel::kShort);
  EXPECT_EQ(l3.label, BucketLabel::kLong);
}

TEST(Bucketing, CountsUnicodeScalarsNotBytes) {
  // 300 Devanagari letters are 900 bytes but 300 characters.
  auto [s, l] = split_by_transcript_length({rec("a", repeat_char("क", 300))});
  EXPECT_EQ(s.records.size(), 1u);
}

TEST(Bucketing, BruteForceLengths0To800) {
  std::vector<UtteranceRecord> rs;
  for (std::size_t n = 0; n <= 800; ++n) rs.push_back(rec("r" + std::to_string(n), repeat_char(n % 2 ? "ñ" : "a", n)));
  auto [s, l] = split_by_transcript_length(rs);
  EXPECT_EQ(s.records.size() + l.records.size(), rs.size());
  EXPECT_EQ(s.records.size(), 400u);
  for (std::size_t i = 0; i < s.records.size(); ++i) EXPECT_EQ(s.records[i].id, "r" + std::to_string(i));
  for (std::size_t i = 0; i < l.records.size(); ++i) EXPECT_EQ(l.records[i].id, "r" + std::to_string(400 + i));
}

TEST(Bucketing, RandomPartitionDecidedByPredicateOnly) {
  std::mt19937_64 rng(5);
  std::vector<UtteranceRecord> rs;
  for (int i = 0; i < 300; ++i) rs.push_back(rec(std::to_string(i), repeat_char("z", rng() % 60)));
  auto [s, l] = split_by_transcript_length(rs, 30);
  std::size_t si = 0, li = 0;
  for (const auto& r : rs) {
    if (r.transcript.size() < 30) {
      EXPECT_EQ(s.records[si++].id, r.id);
    } else {
      EXPECT_EQ(l.records[li++].id, r.id);
    }
  }
  EXPECT_EQ(si, s.records.size());
  EXPECT_EQ(li, l.records.size());
}

TEST(Stats, HoursToOneDecimal) {
  std::vector<UtteranceRecord> train{rec("a", "x", 1800), rec("b", "y", 1800)}, dev, test{rec("c", "z", 360)};
  auto t = dataset_stats({{Split::kTrain, &train}, {Split::kDev, &dev}, {Split::kTest, &test}});
  ASSERT_EQ(t.rows.size(), 1u);
  auto j = t.to_json();
  EXPECT_EQ(j[0]["train"], 1.0);
  EXPECT_EQ(j[0]["dev"], 0.0);
  EXPECT_EQ(j[0]["test"], 0.1);
  EXPECT_EQ(j[0]["total"], 1.1);
  const auto text = t.to_text();
  for (const char* col : {"Direction", "Train", "Dev", "Test", "Total"}) EXPECT_NE(text.find(col), std::string::npos);
  EXPECT_LT(text.find("Train"), text.find("Dev"));
  EXPECT_LT(text.find("Test"), text.find("Total"));
}

TEST(Stats, RowRendersAllColumns) {
  std::vector<UtteranceRecord> tr{rec("a", "x", 680.9 * 3600, "en-bn")}, dv{rec("b", "x", 40.8 * 3600, "en-bn")},
      te{rec("c", "x", 93.2 * 3600, "en-bn")};
  auto t = dataset_stats({{Split::kTrain, &tr}, {Split::kDev, &dv}, {Split::kTest, &te}});
  EXPECT_NE(t.to_text().find("en-bn"), std::string::npos);
  EXPECT_NE(t.to_text().find("680.9"), std::string::npos);
  EXPECT_NE(t.to_text().find("814.9"), std::string::npos);
}

TEST(Stats, DeclaredDirectionWithNoRecordsIsZero) {
  std::vector<UtteranceRecord> none;
  auto t = dataset_stats({{Split::kTrain, &none}}, {"en-hi"});
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].total_h(), 0.0);
}

TEST(Synth, EmptyAndValidation) {
  SynthSpec spec;
  EXPECT_TRUE(synth_generate(spec, 0).empty());
  spec.vocab_size = 1;
  EXPECT_THROW(synth_generate(spec, 1), ConfigError);
  spec.vocab_size = 5;
  spec.mapping = {0, 1, 1, 3, 4};
  EXPECT_THROW(synth_generate(spec, 1), ConfigError);
  spec.mapping.clear();
  spec.min_len = 5;
  spec.max_len = 4;
  EXPECT_THROW(synth_generate(spec, 1), ConfigError);
}

TEST(Synth, NoiselessRunsAreBitIdentical) {
  SynthSpec spec;
  spec.seed = 11;
  spec.noise_std = 0;
  auto a = synth_generate(spec, 20), b = synth_generate(spec, 20);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(a[i].transcript, b[i].transcript);
    EXPECT_EQ(a[i].features().data, b[i].features().data);
  }
}

TEST(Synth, IdentityMappingCopiesTranscript) {
  SynthSpec spec;
  spec.seed = 2;
  for (const auto& r : synth_generate(spec, 50)) EXPECT_EQ(r.translation, r.transcript);
}

TEST(Synth, PermutationMappingIsTokenwiseBijection) {
  SynthSpec spec;
  spec.seed = 4;
  spec.vocab_size = 30;
  spec.mapping = permutation_mapping(30, 4);
  spec.validate();
  std::map<std::string, std::string> seen;
  for (const auto& r : synth_generate(spec, 200)) {
    auto s = text::tokenize(r.transcript), t = text::tokenize(r.translation);
    ASSERT_EQ(s.size(), t.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto [it, fresh] = seen.emplace(s[i], t[i]);
      EXPECT_EQ(it->second, t[i]);
    }
  }
}

TEST(Synth, PrefixProperty) {
  SynthSpec spec;
  spec.seed = 9;
  auto full = synth_generate(spec, 40);
  for (std::size_t k : {0u, 1u, 7u, 40u}) {
    auto pre = synth_generate(spec, k);
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_EQ(pre[i].id, full[i].id);
      EXPECT_EQ(pre[i].features().data, full[i].features().data);
    }
  }
  auto tail = synth_generate(spec, 10, 30);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(tail[i].features().data, full[30 + i].features().data);
}

TEST(Synth, FeaturesFollowCodebookAndLength) {
  SynthSpec spec;
  spec.seed = 1;
  spec.noise_std = 0;
  spec.frames_per_token = 3;
  auto rs = synth_generate(spec, 10);
  for (const auto& r : rs) {
    const auto n = text::tokenize(r.transcript).size();
    EXPECT_GE(n, spec.min_len);
    EXPECT_LE(n, spec.max_len);
    EXPECT_EQ(r.features().rows(), n * 3);
    EXPECT_EQ(r.features().cols(), spec.feature_dim);
    EXPECT_DOUBLE_EQ(r.duration_s, double(n * 3) * 0.02);
    for (std::size_t d = 0; d < spec.feature_dim; ++d) EXPECT_EQ(r.features()(0, d), r.features()(2, d));
    EXPECT_NO_THROW(validate(r));
  }
}
