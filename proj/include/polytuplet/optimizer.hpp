#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace polytuplet {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool operator==(const AdamHyper&) const = default;
};

// Per-tensor first/second moments and the shared step count.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

// p <- p - lr * g
void sgd_step(std::span<double> params, std::span<const double> grads, double learning_rate);

// One bias-corrected Adam update. `step` is the 1-based count after this update.
void adam_step(std::span<double> params, std::span<const double> grads, std::span<double> m,
               std::span<double> v, std::uint64_t step, double learning_rate,
               const AdamHyper& hyper);

AdamState make_adam_state(const std::vector<std::span<double>>& tensors);

// Applies one update over matching tensor lists.
void sgd_update(const std::vector<std::span<double>>& params,
                const std::vector<std::span<const double>>& grads, double learning_rate);
void adam_update(const std::vector<std::span<double>>& params,
                 const std::vector<std::span<const double>>& grads, AdamState& state,
                 double learning_rate, const AdamHyper& hyper);

}  // namespace polytuplet
