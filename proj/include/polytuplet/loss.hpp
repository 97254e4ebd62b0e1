#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "polytuplet/manifold.hpp"
#include "polytuplet/matrix.hpp"
#include "polytuplet/mining.hpp"

namespace polytuplet {

struct TripletConfig {
  double alpha = 0.0;
};

struct PolytupletConfig {
  double margin = 1.0;
  double w_hard = 1.0;
  double w_semi = 1.0;
  double lambda_poly = 1.0;
  double lambda_cce = 1.0;
  double temperature = 1.0;

  // Throws ConfigError.
  void validate() const;
  bool operator==(const PolytupletConfig&) const = default;
};

// Loss value plus gradients shaped like the EmbeddingBatch it came from.
// per_sample holds each sample's un-normalized contribution.
struct LossOutput {
  double value = 0.0;
  std::vector<double> per_sample;
  Matrix grad_context;
  Matrix grad_results;
};

struct TripletOutput {
  double value = 0.0;
  std::vector<double> grad_anchor;
  std::vector<double> grad_positive;
  std::vector<double> grad_negative;
};

struct CceOutput {
  double value = 0.0;
  Matrix grad_logits;
};

struct HybridOutput {
  LossOutput total;
  double polytuplet = 0.0;
  double cce = 0.0;
  Matrix distances;
  MiningReport mining;
};

// max(0, d(a,p) - d(a,n) + alpha). The hinge at exactly 0 is inactive.
TripletOutput triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                           std::span<const double> negative, const TripletConfig& cfg);

// (1/B) sum_i sum_{j != y_i} w_ij * max(0, d(a_i, y_i) - d(a_i, j) + m), with
// w_ij from the hard/semi-hard classification.
LossOutput polytuplet_loss(const EmbeddingBatch& batch, const PolytupletConfig& cfg);

std::vector<double> distances_to_logits(std::span<const double> distances, double temperature);
Matrix distances_to_logits(const Matrix& distances, double temperature);

// Mean over rows of -log softmax(logits)[y]; gradient (softmax - onehot) / B.
CceOutput cce_loss(const Matrix& logits, const std::vector<std::size_t>& labels);

// lambda_poly * polytuplet + lambda_cce * cce(-distances / T). The CCE
// gradient flows back through the distances to both embedding paths.
HybridOutput hybrid_loss(const EmbeddingBatch& batch, const PolytupletConfig& cfg);

}  // namespace polytuplet
