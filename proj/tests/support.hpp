#pragma once

// Test-only oracles: plain scalar re-implementations and a finite-difference
// driver, kept independent of the library's batched code paths.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "polytuplet/manifold.hpp"
#include "polytuplet/rng.hpp"

namespace testing_support {

using polytuplet::EmbeddingBatch;
using polytuplet::Matrix;
using polytuplet::Rng;

inline std::vector<double> random_vector(Rng& rng, std::size_t d, double scale = 1.0) {
  std::vector<double> x(d);
  for (auto& v : x) v = rng.uniform(-scale, scale);
  return x;
}

inline std::vector<double> random_unit(Rng& rng, std::size_t d) {
  for (;;) {
    auto x = random_vector(rng, d);
    double n = 0.0;
    for (const double v : x) n += v * v;
    n = std::sqrt(n);
    if (n < 1e-3) continue;
    for (auto& v : x) v /= n;
    return x;
  }
}

inline EmbeddingBatch random_batch(Rng& rng, std::size_t b, std::size_t n, std::size_t d) {
  EmbeddingBatch batch;
  batch.n_answers = n;
  batch.context = Matrix(b, d);
  batch.results = Matrix(b * n, d);
  for (std::size_t i = 0; i < b; ++i) {
    const auto a = random_unit(rng, d);
    for (std::size_t k = 0; k < d; ++k) batch.context(i, k) = a[k];
    for (std::size_t j = 0; j < n; ++j) {
      const auto r = random_unit(rng, d);
      for (std::size_t k = 0; k < d; ++k) batch.results(i * n + j, k) = r[k];
    }
    batch.labels.push_back(rng.below(n));
  }
  return batch;
}

inline double naive_sq_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

// 0 = hard, 1 = semi-hard, 2 = easy, written straight from the inequalities.
inline int naive_category(double d_pos, double d_neg, double margin) {
  if (d_pos >= d_neg) return 0;
  if (d_neg - d_pos <= margin) return 1;
  return 2;
}

// Un-normalized polytuplet sum for one sample, by explicit loops.
inline double naive_polytuplet_sample(const EmbeddingBatch& batch, std::size_t i, double margin,
                                      double w_hard, double w_semi) {
  const std::size_t y = batch.labels[i];
  const double d_pos = naive_sq_distance(batch.context.row(i), batch.result(i, y));
  double total = 0.0;
  for (std::size_t j = 0; j < batch.n_answers; ++j) {
    if (j == y) continue;
    const double d_neg = naive_sq_distance(batch.context.row(i), batch.result(i, j));
    const double hinge = std::max(0.0, d_pos - d_neg + margin);
    const int cat = naive_category(d_pos, d_neg, margin);
    total += (cat == 0 ? w_hard : cat == 1 ? w_semi : 1.0) * hinge;
  }
  return total;
}

// Central differences over every coordinate of `values`.
inline std::vector<double> central_differences(std::span<double> values, double step,
                                               const std::function<double()>& f) {
  std::vector<double> out(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double saved = values[k];
    values[k] = saved + step;
    const double up = f();
    values[k] = saved - step;
    const double down = f();
    values[k] = saved;
    out[k] = (up - down) / (2.0 * step);
  }
  return out;
}

inline double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    diff += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
    na += analytic[k] * analytic[k];
    nn += numeric[k] * numeric[k];
  }
  const double denom = std::sqrt(na) + std::sqrt(nn);
  return denom < 1e-12 ? 0.0 : std::sqrt(diff) / denom;
}

// Smallest distance of any polytuplet hinge (or mining boundary) to its kink.
inline double kink_distance(const EmbeddingBatch& batch, double margin) {
  double closest = 1e300;
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    const std::size_t y = batch.labels[i];
    const double d_pos = naive_sq_distance(batch.context.row(i), batch.result(i, y));
    for (std::size_t j = 0; j < batch.n_answers; ++j) {
      if (j == y) continue;
      const double gap = d_pos - naive_sq_distance(batch.context.row(i), batch.result(i, j));
      closest = std::min({closest, std::abs(gap), std::abs(gap + margin)});
    }
  }
  return closest;
}

inline std::vector<double> concat(const Matrix& a, const Matrix& b) {
  std::vector<double> out(a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  return out;
}

}  // namespace testing_support
