#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "randprompt/embedding_store.hpp"
#include "randprompt/errors.hpp"
#include "randprompt/scores.hpp"

namespace randprompt {

/// Softmax temperature used for prompt-guided scoring.
struct TemperatureConfig {
  double T = 0.01;

  void validate() const {
    if (!(T > 0.0) || !std::isfinite(T)) throw ArgumentError("temperature must be > 0");
  }
};

namespace detail {

template <typename A, typename B>
double dot(std::span<A> a, std::span<B> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

template <typename A>
double norm(std::span<A> a) {
  return std::sqrt(dot(a, a));
}

template <typename A>
void require_unit(std::span<A> v, const char* what) {
  const double n = norm(v);
  if (!(std::abs(n - 1.0) <= 1e-4)) {
    throw ArgumentError(std::string(what) + " text embedding must be unit-norm (norm " + std::to_string(n) + ")");
  }
}

}  // namespace detail

/// Anomaly-class probability of a two-way softmax over cosine similarities:
/// exp(cos_a/T) / (exp(cos_n/T) + exp(cos_a/T)), evaluated after subtracting
/// the larger exponent.
template <typename Normal, typename Anomaly, typename Image>
double prompt_guided_score(std::span<Normal> normal_text, std::span<Anomaly> anomaly_text, std::span<Image> image,
                           double T) {
  if (!(T > 0.0)) throw ArgumentError("temperature must be > 0");
  if (normal_text.size() != image.size() || anomaly_text.size() != image.size()) {
    throw ArgumentError("text and image embeddings differ in dimension");
  }
  const double image_norm = detail::norm(image);
  if (!(image_norm > 0.0) || !std::isfinite(image_norm)) throw DataError("image embedding has zero norm");
  const double logit_n = detail::dot(normal_text, image) / image_norm / T;
  const double logit_a = detail::dot(anomaly_text, image) / image_norm / T;
  const double top = std::max(logit_n, logit_a);
  const double en = std::exp(logit_n - top);
  const double ea = std::exp(logit_a - top);
  return ea / (en + ea);
}

/// s_pr for every image row. Text vectors must already be unit-norm; image
/// rows are normalized internally.
template <typename Text>
ScoreVector score_prompt_guided(std::span<const Text> normal_text, std::span<const Text> anomaly_text,
                                const EmbeddingMatrix& images, double T = 0.01) {
  TemperatureConfig{T}.validate();
  if (normal_text.size() != images.dim() || anomaly_text.size() != images.dim()) {
    throw ArgumentError("text embeddings have dim " + std::to_string(normal_text.size()) + ", images have " +
                        std::to_string(images.dim()));
  }
  detail::require_unit(normal_text, "normal");
  detail::require_unit(anomaly_text, "anomaly");
  std::vector<double> values(images.count());
  for (std::size_t i = 0; i < images.count(); ++i) {
    try {
      values[i] = prompt_guided_score(normal_text, anomaly_text, images.row(i), T);
    } catch (const DataError&) {
      throw DataError("image row " + std::to_string(i) + " has zero norm");
    }
  }
  return ScoreVector::identity_ids(std::move(values), ScoreKind::s_pr);
}

inline ScoreVector score_prompt_guided(const EmbeddingMatrix& guide_normal, const EmbeddingMatrix& guide_anomaly,
                                       const EmbeddingMatrix& images, double T = 0.01) {
  if (guide_normal.count() != 1 || guide_anomaly.count() != 1) {
    throw ArgumentError("guide embeddings must hold exactly one row each");
  }
  return score_prompt_guided(guide_normal.row(0), guide_anomaly.row(0), images, T);
}

/// s_img = (1 - max_ref cos(image, ref)) / 2, clamped to [0, 1].
inline ScoreVector score_reference(const EmbeddingMatrix& images, const EmbeddingMatrix& refs) {
  if (refs.count() == 0) throw ArgumentError("score_reference needs at least one reference embedding");
  if (refs.dim() != images.dim()) throw ArgumentError("reference and image dims differ");
  std::vector<double> ref_norms(refs.count());
  for (std::size_t r = 0; r < refs.count(); ++r) {
    ref_norms[r] = detail::norm(refs.row(r));
    if (!(ref_norms[r] > 0.0)) throw DataError("reference row " + std::to_string(r) + " has zero norm");
  }
  std::vector<double> values(images.count());
  for (std::size_t i = 0; i < images.count(); ++i) {
    auto x = images.row(i);
    const double xn = detail::norm(x);
    if (!(xn > 0.0)) throw DataError("image row " + std::to_string(i) + " has zero norm");
    double best = -1.0;
    for (std::size_t r = 0; r < refs.count(); ++r) {
      best = std::max(best, detail::dot(x, refs.row(r)) / (xn * ref_norms[r]));
    }
    values[i] = std::clamp((1.0 - best) / 2.0, 0.0, 1.0);
  }
  return ScoreVector::identity_ids(std::move(values), ScoreKind::s_img);
}

/// Weighted elementwise sum; weights default to 1. A single input is
/// returned unchanged.
inline ScoreVector fuse(std::span<const ScoreVector> scores, std::span<const double> weights = {}) {
  if (scores.empty()) throw ArgumentError("fuse needs at least one score vector");
  if (!weights.empty() && weights.size() != scores.size()) throw ArgumentError("one weight per score vector");
  const bool unit_weights =
      weights.empty() || std::all_of(weights.begin(), weights.end(), [](double w) { return w == 1.0; });
  if (scores.size() == 1 && unit_weights) return scores.front();
  const auto& first = scores.front();
  for (const auto& s : scores) {
    if (s.values.size() != first.values.size() || s.sample_ids != first.sample_ids) {
      throw ArgumentError("fuse inputs are not aligned on sample ids");
    }
  }
  ScoreVector out;
  out.kind = ScoreKind::sum;
  out.sample_ids = first.sample_ids;
  out.values.assign(first.values.size(), 0.0);
  out.components = 0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const double w = weights.empty() ? 1.0 : weights[k];
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += w * scores[k].values[i];
    out.components += scores[k].components;
  }
  return out;
}

inline ScoreVector fuse(std::initializer_list<ScoreVector> scores) {
  std::vector<ScoreVector> v(scores);
  return fuse(std::span<const ScoreVector>(v));
}

}  // namespace randprompt
