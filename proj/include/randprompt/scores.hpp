#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "randprompt/errors.hpp"

namespace randprompt {

enum class ScoreKind { s_pr, s_fnn, s_img, sum };

inline std::string_view to_string(ScoreKind k) {
  switch (k) {
    case ScoreKind::s_pr: return "s_pr";
    case ScoreKind::s_fnn: return "s_fnn";
    case ScoreKind::s_img: return "s_img";
    case ScoreKind::sum: return "sum";
  }
  return "?";
}

inline ScoreKind score_kind_from_string(std::string_view s) {
  if (s == "s_pr") return ScoreKind::s_pr;
  if (s == "s_fnn") return ScoreKind::s_fnn;
  if (s == "s_img") return ScoreKind::s_img;
  if (s == "sum") return ScoreKind::sum;
  throw ArgumentError("unknown score kind: " + std::string(s));
}

/// Per-sample anomaly scores. `sample_ids[i]` is the manifest row of values[i];
/// `components` counts how many unit-range scores were summed into it.
struct ScoreVector {
  std::vector<double> values;
  ScoreKind kind = ScoreKind::s_pr;
  std::vector<std::size_t> sample_ids;
  std::size_t components = 1;

  std::size_t size() const noexcept { return values.size(); }

  static ScoreVector identity_ids(std::vector<double> values, ScoreKind kind) {
    ScoreVector s;
    s.kind = kind;
    s.sample_ids.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) s.sample_ids[i] = i;
    s.values = std::move(values);
    return s;
  }
};

/// One row of a score CSV: `sample_id,category,label,score_kind,value`.
struct ScoreRecord {
  std::size_t sample_id = 0;
  std::string category;
  int label = 0;
  std::string score_kind;
  double value = 0.0;

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

inline constexpr std::string_view kScoreCsvHeader = "sample_id,category,label,score_kind,value";

/// Values are printed with 17 significant digits so the CSV round-trips exactly.
inline void write_score_csv(const std::filesystem::path& path, const std::vector<ScoreRecord>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << kScoreCsvHeader << '\n';
  out.precision(17);
  for (const auto& r : rows) {
    if (r.category.find(',') != std::string::npos) {
      throw DataError("category names must not contain commas: " + r.category);
    }
    out << r.sample_id << ',' << r.category << ',' << r.label << ',' << r.score_kind << ','
        << r.value << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

inline std::vector<ScoreRecord> read_score_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open score file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kScoreCsvHeader) {
    throw FormatError(path.string() + ": missing score CSV header");
  }
  std::vector<ScoreRecord> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 5) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 5 fields");
    }
    try {
      ScoreRecord r;
      r.sample_id = std::stoull(fields[0]);
      r.category = fields[1];
      r.label = std::stoi(fields[2]);
      r.score_kind = fields[3];
      r.value = std::stod(fields[4]);
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  return rows;
}

}  // namespace randprompt
