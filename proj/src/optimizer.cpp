#include "polytuplet/optimizer.hpp"

#include <cmath>

#include "polytuplet/error.hpp"

namespace polytuplet {

void sgd_step(std::span<double> params, std::span<const double> grads, double learning_rate) {
  if (params.size() != grads.size()) throw ShapeError("sgd_step: shape mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) params[k] -= learning_rate * grads[k];
}

void adam_step(std::span<double> params, std::span<const double> grads, std::span<double> m,
               std::span<double> v, std::uint64_t step, double learning_rate,
               const AdamHyper& hyper) {
  if (params.size() != grads.size() || m.size() != params.size() || v.size() != params.size()) {
    throw ShapeError("adam_step: shape mismatch");
  }
  if (step == 0) throw ConfigError("adam_step: step count is 1-based");
  const double t = static_cast<double>(step);
  const double m_correction = 1.0 - std::pow(hyper.beta1, t);
  const double v_correction = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * g;
    v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * g * g;
    const double m_hat = m[k] / m_correction;
    const double v_hat = v[k] / v_correction;
    params[k] -= learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

AdamState make_adam_state(const std::vector<std::span<double>>& tensors) {
  AdamState state;
  for (const auto t : tensors) {
    state.m.emplace_back(t.size(), 0.0);
    state.v.emplace_back(t.size(), 0.0);
  }
  return state;
}

void sgd_update(const std::vector<std::span<double>>& params,
                const std::vector<std::span<const double>>& grads, double learning_rate) {
  if (params.size() != grads.size()) throw ShapeError("sgd_update: tensor count mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) sgd_step(params[t], grads[t], learning_rate);
}

void adam_update(const std::vector<std::span<double>>& params,
                 const std::vector<std::span<const double>>& grads, AdamState& state,
                 double learning_rate, const AdamHyper& hyper) {
  if (params.size() != grads.size() || state.m.size() != params.size()) {
    throw ShapeError("adam_update: tensor count mismatch");
  }
  ++state.step;
  for (std::size_t t = 0; t < params.size(); ++t) {
    adam_step(params[t], grads[t], state.m[t], state.v[t], state.step, learning_rate, hyper);
  }
}

}  // namespace polytuplet
