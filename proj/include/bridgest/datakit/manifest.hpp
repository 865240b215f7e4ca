#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bridgest/datakit/utterance.hpp"

namespace bridgest::data {

using nlohmann::json;

inline json to_json(const UtteranceRecord& r) {
  json j;
  j["id"] = r.id;
  if (const auto* f = std::get_if<AudioFile>(&r.audio_source)) {
    j["audio_source"] = {{"path", f->path}};
  } else {
    const Tensor& t = std::get<InlineFeatures>(r.audio_source);
    json rows = json::array();
    for (std::size_t i = 0; i < t.rows(); ++i) {
      auto row = t.row(i);
      rows.push_back(std::vector<Real>(row.begin(), row.end()));
    }
    j["audio_source"] = {{"features", std::move(rows)}};
  }
  j["offset_s"] = r.offset_s;
  j["duration_s"] = r.duration_s;
  j["transcript"] = r.transcript;
  j["translation"] = r.translation;
  j["direction"] = r.direction.tag();
  return j;
}

namespace detail {

inline const json& require(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing field '") + key + "'", line);
  return *it;
}

inline Tensor features_from_json(const json& rows, std::size_t line) {
  if (!rows.is_array() || rows.empty()) throw ParseError("audio_source.features must be a non-empty array", line);
  const std::size_t dim = rows.front().is_array() ? rows.front().size() : 0;
  if (dim == 0) throw ParseError("audio_source.features rows must be non-empty arrays", line);
  Tensor t({rows.size(), dim});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_array() || rows[i].size() != dim) {
      throw ParseError("audio_source.features row " + std::to_string(i) + " has the wrong width", line);
    }
    for (std::size_t k = 0; k < dim; ++k) t(i, k) = rows[i][k].get<Real>();
  }
  return t;
}

}  // namespace detail

inline UtteranceRecord from_json(const json& j, std::size_t line = 0) {
  static const char* kKeys[] = {"id", "audio_source", "offset_s", "duration_s", "transcript", "translation", "direction"};
  if (!j.is_object()) throw ParseError("manifest line is not a JSON object", line);
  for (const auto& [k, _] : j.items()) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* s) { return k == s; }) == std::end(kKeys)) {
      throw ParseError("unknown field '" + k + "'", line);
    }
  }
  UtteranceRecord r;
  try {
    r.id = detail::require(j, "id", line).get<std::string>();
    const json& src = detail::require(j, "audio_source", line);
    if (src.is_string()) {
      r.audio_source = AudioFile{src.get<std::string>()};
    } else if (src.is_object() && src.contains("path")) {
      r.audio_source = AudioFile{src.at("path").get<std::string>()};
    } else if (src.is_object() && src.contains("features")) {
      r.audio_source = detail::features_from_json(src.at("features"), line);
    } else {
      throw ParseError("audio_source must hold 'path' or 'features'", line);
    }
    r.offset_s = detail::require(j, "offset_s", line).get<double>();
    r.duration_s = detail::require(j, "duration_s", line).get<double>();
    r.transcript = detail::require(j, "transcript", line).get<std::string>();
    r.translation = detail::require(j, "translation", line).get<std::string>();
    r.direction = Direction::parse(detail::require(j, "direction", line).get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad field type: ") + e.what(), line);
  }
  try {
    validate(r);
  } catch (const ValidationError& e) {
    throw ValidationError("line " + std::to_string(line) + ": " + e.what());
  }
  return r;
}

/// One JSON object per line; blank lines are skipped. Line numbers are 1-based.
inline std::vector<UtteranceRecord> read_manifest(std::istream& in) {
  std::vector<UtteranceRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    out.push_back(from_json(j, lineno));
  }
  return out;
}

inline std::vector<UtteranceRecord> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open manifest '" + path + "'");
  return read_manifest(in);
}

inline void write_manifest(std::ostream& out, const std::vector<UtteranceRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

inline void save_manifest(const std::string& path, const std::vector<UtteranceRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest '" + path + "'");
  write_manifest(out, records);
  if (!out) throw std::runtime_error("error writing manifest '" + path + "'");
}

}  // namespace bridgest::data
