#include "polytuplet/loss.hpp"

#include <algorithm>
#include <cmath>

#include "polytuplet/error.hpp"

namespace polytuplet {

void PolytupletConfig::validate() const {
  const auto finite_non_negative = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!finite_non_negative(margin)) throw ConfigError("margin must be finite and >= 0");
  if (!finite_non_negative(w_hard) || !finite_non_negative(w_semi)) {
    throw ConfigError("mining weights must be finite and >= 0");
  }
  if (!finite_non_negative(lambda_poly) || !finite_non_negative(lambda_cce)) {
    throw ConfigError("loss weights must be finite and >= 0");
  }
  if (!(lambda_poly + lambda_cce > 0.0)) {
    throw ConfigError("lambda_poly + lambda_cce must be positive");
  }
  if (!(std::isfinite(temperature) && temperature > 0.0)) {
    throw ConfigError("temperature must be finite and > 0");
  }
}

TripletOutput triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                           std::span<const double> negative, const TripletConfig& cfg) {
  if (!(std::isfinite(cfg.alpha) && cfg.alpha >= 0.0)) {
    throw ConfigError("triplet margin must be finite and >= 0");
  }
  const double hinge = sq_distance(anchor, positive) - sq_distance(anchor, negative) + cfg.alpha;
  const std::size_t d = anchor.size();
  if (negative.size() != d) throw ShapeError("triplet_loss: dimension mismatch");

  TripletOutput out;
  out.grad_anchor.assign(d, 0.0);
  out.grad_positive.assign(d, 0.0);
  out.grad_negative.assign(d, 0.0);
  if (!(hinge > 0.0)) return out;

  out.value = hinge;
  for (std::size_t k = 0; k < d; ++k) {
    const double to_pos = 2.0 * (anchor[k] - positive[k]);
    const double to_neg = 2.0 * (anchor[k] - negative[k]);
    out.grad_anchor[k] = to_pos - to_neg;
    out.grad_positive[k] = -to_pos;
    out.grad_negative[k] = to_neg;
  }
  return out;
}

namespace {

struct PolytupletTerms {
  double value = 0.0;
  std::vector<double> per_sample;
  Matrix grad_distances;  // dL/dD, already divided by B
};

PolytupletTerms polytuplet_terms(const Matrix& distances, const std::vector<std::size_t>& labels,
                                 const MiningReport& mining, const PolytupletConfig& cfg) {
  const std::size_t b = distances.rows();
  const std::size_t n = distances.cols();
  const Matrix weights = mining_weights(mining, cfg.w_hard, cfg.w_semi);
  const double inv_b = 1.0 / static_cast<double>(b);

  PolytupletTerms out;
  out.per_sample.assign(b, 0.0);
  out.grad_distances = Matrix(b, n);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t y = labels[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == y) continue;
      const double hinge = distances(i, y) - distances(i, j) + cfg.margin;
      if (!(hinge > 0.0)) continue;
      const double w = weights(i, j);
      out.per_sample[i] += w * hinge;
      out.grad_distances(i, y) += w * inv_b;
      out.grad_distances(i, j) -= w * inv_b;
    }
    out.value += out.per_sample[i];
  }
  out.value *= inv_b;
  return out;
}

double log_sum_exp(std::span<const double> x) {
  const double peak = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (const double v : x) sum += std::exp(v - peak);
  return peak + std::log(sum);
}

}  // namespace

LossOutput polytuplet_loss(const EmbeddingBatch& batch, const PolytupletConfig& cfg) {
  cfg.validate();
  batch.validate(true);
  const Matrix distances = distance_matrix(batch);
  const MiningReport mining = classify_distances(distances, batch.labels, cfg.margin);
  auto terms = polytuplet_terms(distances, batch.labels, mining, cfg);

  LossOutput out;
  out.value = terms.value;
  out.per_sample = std::move(terms.per_sample);
  distance_backward(batch, terms.grad_distances, out.grad_context, out.grad_results);
  return out;
}

std::vector<double> distances_to_logits(std::span<const double> distances, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  std::vector<double> logits(distances.size());
  for (std::size_t j = 0; j < distances.size(); ++j) logits[j] = -distances[j] / temperature;
  return logits;
}

Matrix distances_to_logits(const Matrix& distances, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  Matrix logits(distances.rows(), distances.cols());
  for (std::size_t k = 0; k < distances.size(); ++k) {
    logits.values()[k] = -distances.values()[k] / temperature;
  }
  return logits;
}

CceOutput cce_loss(const Matrix& logits, const std::vector<std::size_t>& labels) {
  const std::size_t b = logits.rows();
  if (b == 0) throw ShapeError("cce_loss: empty batch");
  if (labels.size() != b) throw ShapeError("cce_loss: one label per row required");
  const double inv_b = 1.0 / static_cast<double>(b);

  CceOutput out;
  out.grad_logits = Matrix(b, logits.cols());
  for (std::size_t i = 0; i < b; ++i) {
    const auto row = logits.row(i);
    if (labels[i] >= row.size()) throw ShapeError("cce_loss: label out of range");
    const double lse = log_sum_exp(row);
    out.value += lse - row[labels[i]];
    auto grad = out.grad_logits.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      grad[j] = (std::exp(row[j] - lse) - (j == labels[i] ? 1.0 : 0.0)) * inv_b;
    }
  }
  out.value *= inv_b;
  return out;
}

HybridOutput hybrid_loss(const EmbeddingBatch& batch, const PolytupletConfig& cfg) {
  cfg.validate();
  batch.validate(true);
  const std::size_t b = batch.batch_size();
  const std::size_t n = batch.n_answers;

  HybridOutput out;
  out.distances = distance_matrix(batch);
  out.mining = classify_distances(out.distances, batch.labels, cfg.margin);

  Matrix grad_distances(b, n);

  if (cfg.lambda_poly > 0.0) {
    const auto poly = polytuplet_terms(out.distances, batch.labels, out.mining, cfg);
    out.polytuplet = poly.value;
    for (std::size_t k = 0; k < grad_distances.size(); ++k) {
      grad_distances.values()[k] += cfg.lambda_poly * poly.grad_distances.values()[k];
    }
  }
  if (cfg.lambda_cce > 0.0) {
    const auto cce = cce_loss(distances_to_logits(out.distances, cfg.temperature), batch.labels);
    out.cce = cce.value;
    // logits = -D / T
    const double scale = -cfg.lambda_cce / cfg.temperature;
    for (std::size_t k = 0; k < grad_distances.size(); ++k) {
      grad_distances.values()[k] += scale * cce.grad_logits.values()[k];
    }
  }
  out.total.value = cfg.lambda_poly * out.polytuplet + cfg.lambda_cce * out.cce;
  distance_backward(batch, grad_distances, out.total.grad_context, out.total.grad_results);
  return out;
}

}  // namespace polytuplet
