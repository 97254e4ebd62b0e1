#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "polytuplet/matrix.hpp"

namespace polytuplet {

// Inputs with L2 norm below this cannot be projected onto the sphere.
inline constexpr double kMinProjectableNorm = 1e-12;

// Context embeddings E^a (B x d), result embeddings E^j flattened row-major
// as (B*N) x d, and the correct index per sample. `labels` may be empty for
// unlabeled (prediction-only) batches.
struct EmbeddingBatch {
  Matrix context;
  Matrix results;
  std::vector<std::size_t> labels;
  std::size_t n_answers = 0;

  std::size_t batch_size() const noexcept { return context.rows(); }
  std::size_t dim() const noexcept { return context.cols(); }
  bool labeled() const noexcept { return !labels.empty(); }

  std::span<const double> result(std::size_t sample, std::size_t answer) const {
    return results.row(sample * n_answers + answer);
  }
  std::span<double> result(std::size_t sample, std::size_t answer) {
    return results.row(sample * n_answers + answer);
  }

  // Throws ShapeError on inconsistent dimensions or out-of-range labels.
  void validate(bool require_labels) const;
};

std::vector<double> project_to_sphere(std::span<const double> raw);

// Vector-Jacobian product of x -> x/|x|: (I - u u^T) g / |x|.
std::vector<double> project_to_sphere_backward(std::span<const double> raw,
                                               std::span<const double> upstream_grad);

double dot(std::span<const double> a, std::span<const double> b);
double sq_distance(std::span<const double> a, std::span<const double> b);

// Entry (i, j) is sq_distance(context_i, result_i^j). OpenMP over samples.
Matrix distance_matrix(const EmbeddingBatch& batch);

// Scatters dLoss/dDistance back onto the embeddings:
//   grad_context_i  += sum_j G_ij * 2 (a_i - r_ij)
//   grad_result_ij  += -G_ij * 2 (a_i - r_ij)
// Outputs are overwritten.
void distance_backward(const EmbeddingBatch& batch, const Matrix& grad_distances,
                       Matrix& grad_context, Matrix& grad_results);

}  // namespace polytuplet
