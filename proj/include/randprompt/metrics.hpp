#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "randprompt/errors.hpp"

namespace randprompt {

/// Scores with binary labels; anomaly (label 1) is the positive class.
struct LabeledScores {
  std::vector<double> scores;
  std::vector<int> labels;

  std::size_t positives() const { return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1)); }
  std::size_t negatives() const { return labels.size() - positives(); }

  void validate() const {
    if (scores.size() != labels.size()) throw ArgumentError("scores and labels differ in length");
    for (int y : labels) {
      if (y != 0 && y != 1) throw ArgumentError("labels must be 0 or 1");
    }
    for (double s : scores) {
      if (std::isnan(s)) throw ArgumentError("scores must not be NaN");
    }
  }
};

namespace detail {

/// Per distinct score, descending: (positives, negatives) in that tie group.
struct ThresholdGroup {
  double score;
  std::size_t pos;
  std::size_t neg;
};

inline std::vector<ThresholdGroup> descending_groups(const LabeledScores& d) {
  std::vector<std::size_t> order(d.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d.scores[a] > d.scores[b]; });
  std::vector<ThresholdGroup> groups;
  for (std::size_t i = 0; i < order.size();) {
    ThresholdGroup g{d.scores[order[i]], 0, 0};
    std::size_t j = i;
    while (j < order.size() && d.scores[order[j]] == g.score) {
      (d.labels[order[j]] == 1 ? g.pos : g.neg) += 1;
      ++j;
    }
    groups.push_back(g);
    i = j;
  }
  return groups;
}

inline void require_both_classes(const LabeledScores& d, const char* metric) {
  d.validate();
  if (d.positives() == 0 || d.negatives() == 0) {
    throw MetricError(std::string(metric) + " needs at least one positive and one negative sample");
  }
}

}  // namespace detail

/// Mann-Whitney form: (#{pos > neg} + 0.5 #{pos = neg}) / (P N).
inline double auroc(const LabeledScores& d) {
  detail::require_both_classes(d, "AUROC");
  const auto groups = detail::descending_groups(d);
  // Walk ascending so `neg_below` counts negatives strictly below the group.
  double wins = 0.0;
  double neg_below = 0.0;
  for (auto it = groups.rbegin(); it != groups.rend(); ++it) {
    wins += static_cast<double>(it->pos) * (neg_below + 0.5 * static_cast<double>(it->neg));
    neg_below += static_cast<double>(it->neg);
  }
  return wins / (static_cast<double>(d.positives()) * static_cast<double>(d.negatives()));
}

/// Average precision: sum over descending threshold groups of
/// (recall gain) x (precision at that threshold).
inline double aupr(const LabeledScores& d) {
  detail::require_both_classes(d, "AUPR");
  const double total_pos = static_cast<double>(d.positives());
  double tp = 0.0, fp = 0.0, ap = 0.0;
  for (const auto& g : detail::descending_groups(d)) {
    tp += static_cast<double>(g.pos);
    fp += static_cast<double>(g.neg);
    if (g.pos > 0) ap += (static_cast<double>(g.pos) / total_pos) * (tp / (tp + fp));
  }
  return ap;
}

/// Trapezoidal area under the precision-recall curve, starting from
/// (recall 0, precision of the top group).
inline double aupr_trapezoidal(const LabeledScores& d) {
  detail::require_both_classes(d, "AUPR");
  const double total_pos = static_cast<double>(d.positives());
  double tp = 0.0, fp = 0.0, area = 0.0;
  double prev_recall = 0.0;
  double prev_precision = -1.0;
  for (const auto& g : detail::descending_groups(d)) {
    tp += static_cast<double>(g.pos);
    fp += static_cast<double>(g.neg);
    const double recall = tp / total_pos;
    const double precision = tp / (tp + fp);
    if (prev_precision < 0.0) prev_precision = precision;
    area += (recall - prev_recall) * 0.5 * (precision + prev_precision);
    prev_recall = recall;
    prev_precision = precision;
  }
  return area;
}

struct F1Max {
  double f1 = 0.0;
  double threshold = std::numeric_limits<double>::infinity();
};

/// Best F1 over the rule `score >= t`, t ranging over the distinct scores and
/// +inf. Ties in F1 keep the highest threshold.
inline F1Max f1_max(const LabeledScores& d) {
  d.validate();
  const std::size_t total_pos = d.positives();
  if (total_pos == 0) throw MetricError("F1-max needs at least one positive sample");
  F1Max best;  // t = +inf predicts nothing: F1 = 0
  std::size_t tp = 0, fp = 0;
  for (const auto& g : detail::descending_groups(d)) {
    tp += g.pos;
    fp += g.neg;
    const double f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + (total_pos - tp));
    if (f1 > best.f1) best = {f1, g.score};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;

  friend bool operator==(const MeanStd&, const MeanStd&) = default;
};

struct MetricSet {
  MeanStd auroc;
  MeanStd aupr;
  MeanStd f1_max;

  friend bool operator==(const MetricSet&, const MetricSet&) = default;
};

/// Per-category metrics plus the category mean. A single evaluation has
/// runs = 1 and zero std; seed_statistics folds several runs together.
struct EvalReport {
  std::map<std::string, MetricSet> categories;
  MetricSet mean;
  std::size_t runs = 1;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// AUROC, AUPR and F1-max of one category.
inline MetricSet evaluate(const LabeledScores& d) {
  MetricSet m;
  m.auroc.mean = auroc(d);
  m.aupr.mean = aupr(d);
  m.f1_max.mean = f1_max(d).f1;
  return m;
}

/// Evaluates every category and averages across categories.
inline EvalReport evaluate_categories(const std::map<std::string, LabeledScores>& by_category) {
  if (by_category.empty()) throw MetricError("no categories to evaluate");
  EvalReport report;
  for (const auto& [name, data] : by_category) {
    try {
      report.categories[name] = evaluate(data);
    } catch (const MetricError& ex) {
      throw MetricError("category '" + name + "': " + ex.what());
    }
  }
  const double k = static_cast<double>(report.categories.size());
  for (const auto& [name, m] : report.categories) {
    report.mean.auroc.mean += m.auroc.mean / k;
    report.mean.aupr.mean += m.aupr.mean / k;
    report.mean.f1_max.mean += m.f1_max.mean / k;
  }
  return report;
}

namespace detail {

/// Welford accumulation; population standard deviation.
inline MeanStd mean_std(std::span<const double> xs) {
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (double x : xs) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  return {mean, n > 0 ? std::sqrt(std::max(m2, 0.0) / static_cast<double>(n)) : 0.0};
}

inline MetricSet fold(const std::vector<MetricSet>& runs) {
  std::vector<double> a, p, f;
  for (const auto& r : runs) {
    a.push_back(r.auroc.mean);
    p.push_back(r.aupr.mean);
    f.push_back(r.f1_max.mean);
  }
  return {mean_std(a), mean_std(p), mean_std(f)};
}

}  // namespace detail

/// Mean and population std across runs, per category and for the category mean.
inline EvalReport seed_statistics(std::span<const EvalReport> runs) {
  if (runs.empty()) throw ArgumentError("seed_statistics needs at least one run");
  const auto& first = runs.front();
  for (const auto& r : runs) {
    if (r.categories.size() != first.categories.size() ||
        !std::equal(r.categories.begin(), r.categories.end(), first.categories.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
      throw ArgumentError("runs do not cover the same categories");
    }
  }
  EvalReport out;
  out.runs = runs.size();
  for (const auto& [name, unused] : first.categories) {
    std::vector<MetricSet> per_run;
    for (const auto& r : runs) per_run.push_back(r.categories.at(name));
    out.categories[name] = detail::fold(per_run);
  }
  std::vector<MetricSet> means;
  for (const auto& r : runs) means.push_back(r.mean);
  out.mean = detail::fold(means);
  return out;
}

inline nlohmann::json to_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

inline nlohmann::json to_json(const MetricSet& m) {
  return {{"auroc", to_json(m.auroc)}, {"aupr", to_json(m.aupr)}, {"f1_max", to_json(m.f1_max)}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["runs"] = r.runs;
  j["mean"] = to_json(r.mean);
  j["categories"] = nlohmann::json::object();
  for (const auto& [name, m] : r.categories) j["categories"][name] = to_json(m);
  return j;
}

inline MeanStd mean_std_from_json(const nlohmann::json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }

inline MetricSet metric_set_from_json(const nlohmann::json& j) {
  return {mean_std_from_json(j.at("auroc")), mean_std_from_json(j.at("aupr")), mean_std_from_json(j.at("f1_max"))};
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.runs = j.at("runs").get<std::size_t>();
  r.mean = metric_set_from_json(j.at("mean"));
  for (const auto& [name, m] : j.at("categories").items()) r.categories[name] = metric_set_from_json(m);
  return r;
}

namespace detail {
inline std::string percent_cell(const MeanStd& m, std::size_t runs) {
  char buf[48];
  if (runs > 1) {
    std::snprintf(buf, sizeof buf, "%.1f±%.1f", 100.0 * m.mean, 100.0 * m.std);
  } else {
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * m.mean);
  }
  return buf;
}

inline std::string pad(const std::string& s, std::size_t width) {
  // Count UTF-8 code points so "±" occupies one column.
  std::size_t cols = 0;
  for (unsigned char c : s) cols += (c & 0xC0) != 0x80;
  return cols >= width ? s : std::string(width - cols, ' ') + s;
}
}  // namespace detail

/// Aligned text table in percent: one row per category plus a mean row,
/// columns AUROC, AUPR, F1-max.
inline std::string format_table(const EvalReport& r, const std::string& title = {}) {
  std::size_t name_width = 8;
  for (const auto& [name, m] : r.categories) name_width = std::max(name_width, name.size());
  const std::size_t cell = r.runs > 1 ? 12 : 7;
  std::string out;
  if (!title.empty()) out += title + "\n";
  auto line = [&](const std::string& name, const std::string& a, const std::string& b, const std::string& c) {
    out += name + std::string(name_width - std::min(name_width, name.size()), ' ');
    out += "  " + detail::pad(a, cell) + "  " + detail::pad(b, cell) + "  " + detail::pad(c, cell) + "\n";
  };
  line("Category", "AUROC", "AUPR", "F1-max");
  out += std::string(name_width + 3 * (cell + 2), '-') + "\n";
  auto row = [&](const std::string& name, const MetricSet& m) {
    line(name, detail::percent_cell(m.auroc, r.runs), detail::percent_cell(m.aupr, r.runs),
         detail::percent_cell(m.f1_max, r.runs));
  };
  for (const auto& [name, m] : r.categories) row(name, m);
  out += std::string(name_width + 3 * (cell + 2), '-') + "\n";
  row("Mean", r.mean);
  return out;
}

}  // namespace randprompt
