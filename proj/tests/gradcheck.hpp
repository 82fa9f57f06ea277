#pragma once

// Central finite-difference check of the detector's analytic gradients. The
// loss is recomputed through forward() + bce_with_logits() with a copy of the
// same dropout RNG, so every evaluation sees identical masks.

#include <string>

#include "oracles.hpp"
#include "randprompt/mlp.hpp"

namespace randprompt::oracle {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

struct GradCheckProblem {
  MlpParams params;
  Matrix batch;
  std::vector<double> labels;
  Xoshiro256 dropout_rng;
};

inline GradCheckProblem random_problem(Xoshiro256& rng, std::size_t max_dim = 8, std::size_t max_batch = 16) {
  MlpArchitecture arch;
  arch.input_dim = 1 + rng.uniform_below(max_dim);
  for (auto& h : arch.hidden_dims) h = 1 + rng.uniform_below(max_dim);
  arch.dropout_rate = rng.uniform_below(2) ? 0.2 : 0.0;
  GradCheckProblem p{MlpParams::initialize(arch, rng.next()), Matrix(), {}, Xoshiro256(rng.next())};
  // Non-trivial gamma/beta so their gradients are exercised away from 1/0.
  for (auto& g : p.params.trainable.gamma) {
    for (auto& v : g) v = rng.uniform(0.5, 1.5);
  }
  for (auto& b : p.params.trainable.beta) {
    for (auto& v : b) v = rng.uniform(-0.5, 0.5);
  }
  const std::size_t n = 2 + 2 * rng.uniform_below(max_batch / 2);
  p.batch = Matrix(n, arch.input_dim);
  for (auto& v : p.batch.values) v = rng.normal();
  p.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.labels[i] = i < n / 2 ? 0.0 : 1.0;
  return p;
}

// The floor keeps exactly-zero gradients (pre-BN biases) from turning
// difference roundoff of ~1e-11 into a large relative error. A larger h
// would cut roundoff but starts crossing ReLU kinks.
inline GradCheckResult check_gradients(GradCheckProblem& p, double h = 1e-5, double floor = 1e-5) {
  auto loss = [&] {
    Xoshiro256 rng = p.dropout_rng;
    auto fwd = forward(p.params, p.batch, Mode::train, rng);
    return bce_with_logits(fwd.logits, p.labels).loss;
  };
  Xoshiro256 rng = p.dropout_rng;
  auto fwd = forward(p.params, p.batch, Mode::train, rng);
  auto lr = bce_with_logits(fwd.logits, p.labels);
  ParamSet grads = backward(p.params, *fwd.cache, lr.d_logits);

  GradCheckResult result;
  visit_tensors(
      [&](const std::string& name, bool, std::span<double> values, std::span<double> analytic) {
        for (std::size_t i = 0; i < values.size(); ++i) {
          const double numeric = central_difference(loss, values[i], h);
          const double err = relative_error(analytic[i], numeric, floor);
          ++result.checked;
          if (err > result.max_rel_error) {
            result.max_rel_error = err;
            result.worst = name + "[" + std::to_string(i) + "] analytic=" + std::to_string(analytic[i]) +
                           " numeric=" + std::to_string(numeric);
          }
        }
      },
      p.params.trainable, grads);
  return result;
}

}  // namespace randprompt::oracle
