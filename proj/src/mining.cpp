#include "polytuplet/mining.hpp"

#include "polytuplet/error.hpp"

namespace polytuplet {

NegativeCategory classify_gap(double gap, double margin) noexcept {
  if (gap >= 0.0) return NegativeCategory::hard;
  if (-gap <= margin) return NegativeCategory::semi_hard;
  return NegativeCategory::easy;
}

MiningReport classify_distances(const Matrix& distances, const std::vector<std::size_t>& labels,
                                double margin) {
  if (margin < 0.0) throw ConfigError("margin must be non-negative");
  if (labels.size() != distances.rows()) throw ShapeError("one label per sample required");
  MiningReport report;
  report.n_answers = distances.cols();
  report.mask.resize(distances.size());
  for (std::size_t i = 0; i < distances.rows(); ++i) {
    const std::size_t y = labels[i];
    for (std::size_t j = 0; j < distances.cols(); ++j) {
      auto& tag = report.mask[i * report.n_answers + j];
      if (j == y) {
        tag = NegativeCategory::positive;
        continue;
      }
      tag = classify_gap(distances(i, y) - distances(i, j), margin);
      switch (tag) {
        case NegativeCategory::hard: ++report.counts.hard; break;
        case NegativeCategory::semi_hard: ++report.counts.semi_hard; break;
        default: ++report.counts.easy; break;
      }
    }
  }
  return report;
}

MiningReport classify_negatives(const EmbeddingBatch& batch, double margin) {
  batch.validate(true);
  return classify_distances(distance_matrix(batch), batch.labels, margin);
}

Matrix mining_weights(const MiningReport& report, double w_hard, double w_semi) {
  if (w_hard < 0.0 || w_semi < 0.0) throw ConfigError("mining weights must be non-negative");
  const std::size_t n = report.n_answers;
  const std::size_t b = n == 0 ? 0 : report.mask.size() / n;
  Matrix weights(b, n);
  for (std::size_t k = 0; k < report.mask.size(); ++k) {
    double w = 1.0;
    switch (report.mask[k]) {
      case NegativeCategory::hard: w = w_hard; break;
      case NegativeCategory::semi_hard: w = w_semi; break;
      case NegativeCategory::easy: w = 1.0; break;
      case NegativeCategory::positive: w = 0.0; break;
    }
    weights.values()[k] = w;
  }
  return weights;
}

}  // namespace polytuplet
