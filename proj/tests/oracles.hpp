#pragma once

// Independent reference computations used only by tests. Nothing here calls
// the code paths it checks.

#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <span>
#include <vector>

namespace randprompt::oracle {

/// O(P*N) pair counting with half credit for ties.
inline double auroc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) wins += 1.0;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

struct Confusion {
  double tp = 0, fp = 0, fn = 0;
};

inline Confusion confusion_at(const std::vector<double>& s, const std::vector<int>& y, double t) {
  Confusion c;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool predicted = s[i] >= t;
    if (predicted && y[i] == 1) c.tp += 1;
    if (predicted && y[i] == 0) c.fp += 1;
    if (!predicted && y[i] == 1) c.fn += 1;
  }
  return c;
}

/// Distinct thresholds in descending order.
inline std::vector<double> thresholds_desc(const std::vector<double>& s) {
  std::set<double> distinct(s.begin(), s.end());
  return {distinct.rbegin(), distinct.rend()};
}

/// Recomputes precision and recall from scratch at every distinct threshold and
/// sums recall increments times precision.
inline double average_precision_sweep(const std::vector<double>& s, const std::vector<int>& y) {
  double positives = 0;
  for (int v : y) positives += v;
  double ap = 0.0, prev_recall = 0.0;
  for (double t : thresholds_desc(s)) {
    const auto c = confusion_at(s, y, t);
    const double recall = c.tp / positives;
    const double precision = c.tp + c.fp > 0 ? c.tp / (c.tp + c.fp) : 1.0;
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

inline double f1_at(const std::vector<double>& s, const std::vector<int>& y, double t) {
  const auto c = confusion_at(s, y, t);
  const double denom = 2 * c.tp + c.fp + c.fn;
  return denom > 0 ? 2 * c.tp / denom : 0.0;
}

/// Exhaustive F1 over every distinct threshold and +inf.
inline double f1_max_sweep(const std::vector<double>& s, const std::vector<int>& y) {
  double best = f1_at(s, y, std::numeric_limits<double>::infinity());
  for (double t : thresholds_desc(s)) best = std::max(best, f1_at(s, y, t));
  return best;
}

/// Two-pass mean and population standard deviation.
inline std::pair<double, double> mean_std_two_pass(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size()))};
}

/// Pearson chi-squared statistic of observed counts against a uniform expectation.
inline double chi_squared_uniform(const std::vector<double>& counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  const double expected = total / static_cast<double>(counts.size());
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  return chi2;
}

/// Central difference of `f` with respect to `x[i]`.
template <typename F>
double central_difference(F&& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

inline double relative_error(double a, double b, double floor = 1e-7) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace randprompt::oracle
