#pragma once

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bridgest/datakit/utterance.hpp"

namespace bridgest::data {

enum class Split { kTrain, kDev, kTest };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

struct SplitRecords {
  Split split;
  const std::vector<UtteranceRecord>* records;
};

struct StatsRow {
  std::string direction;
  double train_h = 0, dev_h = 0, test_h = 0;
  double total_h() const { return train_h + dev_h + test_h; }
};

struct StatsTable {
  std::vector<StatsRow> rows;  // sorted by direction tag

  static double round1(double h) { return std::round(h * 10.0) / 10.0; }

  nlohmann::json to_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
      out.push_back({{"direction", r.direction},
                     {"train", round1(r.train_h)},
                     {"dev", round1(r.dev_h)},
                     {"test", round1(r.test_h)},
                     {"total", round1(r.total_h())}});
    }
    return out;
  }

  /// Aligned text table with Direction/Train/Dev/Test/Total columns, hours to one decimal.
  std::string to_text() const {
    std::ostringstream os;
    os << std::left << std::setw(12) << "Direction" << std::right << std::setw(10) << "Train" << std::setw(10) << "Dev"
       << std::setw(10) << "Test" << std::setw(10) << "Total" << '\n';
    os << std::fixed << std::setprecision(1);
    for (const auto& r : rows) {
      os << std::left << std::setw(12) << r.direction << std::right << std::setw(10) << round1(r.train_h)
         << std::setw(10) << round1(r.dev_h) << std::setw(10) << round1(r.test_h) << std::setw(10)
         << round1(r.total_h()) << '\n';
    }
    return os.str();
  }
};

/// Total speech hours per (direction, split). Directions with no records in a
/// split report 0.0 for that column. Tags in `directions` always get a row.
inline StatsTable dataset_stats(const std::vector<SplitRecords>& groups,
                                const std::vector<std::string>& directions = {}) {
  std::map<std::string, StatsRow> rows;
  for (const auto& d : directions) rows[d].direction = d;
  for (const auto& g : groups) {
    for (const auto& r : *g.records) {
      auto& row = rows[r.direction.tag()];
      row.direction = r.direction.tag();
      const double h = r.duration_s / 3600.0;
      switch (g.split) {
        case Split::kTrain: row.train_h += h; break;
        case Split::kDev: row.dev_h += h; break;
        case Split::kTest: row.test_h += h; break;
      }
    }
  }
  StatsTable t;
  for (auto& [_, r] : rows) t.rows.push_back(r);
  return t;
}

}  // namespace bridgest::data
