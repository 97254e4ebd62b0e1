#pragma once

// Batch kernels used by the manifold, loss and encoder modules.
//
// Every kernel exists twice: an OpenMP version in `polytuplet::kernels` and a
// plain loop in `polytuplet::kernels::reference`. Parallel loops split over
// independent output rows (or output units for weight gradients) and each
// output element is accumulated in the same sequential order as the
// reference, so both produce bit-identical results for any thread count.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "polytuplet/matrix.hpp"

namespace polytuplet {

// Sparse non-negative feature vector (sorted, unique indices).
struct SparseVector {
  std::size_t dim = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;

  bool operator==(const SparseVector&) const = default;
};

namespace kernels {

// out(r, j) = |context_r - results_{r*n+j}|^2, out is rows x n_answers.
void distance_rows(const Matrix& context, const Matrix& results, std::size_t n_answers,
                   Matrix& out);

// out_r = W x_r + b for sparse inputs. W is out_dim x in_dim.
void sparse_affine(std::span<const SparseVector> inputs, const Matrix& weights,
                   std::span<const double> bias, Matrix& out);

// out_r = W x_r + b for dense rows.
void dense_affine(const Matrix& inputs, const Matrix& weights, std::span<const double> bias,
                  Matrix& out);

// grad_w(i, :) += sum_r grad_out(r, i) * x_r; grad_b(i) += sum_r grad_out(r, i).
void sparse_affine_backward(std::span<const SparseVector> inputs, const Matrix& grad_out,
                            Matrix& grad_weights, std::span<double> grad_bias);
void dense_affine_backward(const Matrix& inputs, const Matrix& grad_out, Matrix& grad_weights,
                           std::span<double> grad_bias);

// grad_in_r = W^T grad_out_r.
void dense_input_grad(const Matrix& weights, const Matrix& grad_out, Matrix& grad_in);

namespace reference {

void distance_rows(const Matrix& context, const Matrix& results, std::size_t n_answers,
                   Matrix& out);
void sparse_affine(std::span<const SparseVector> inputs, const Matrix& weights,
                   std::span<const double> bias, Matrix& out);
void dense_affine(const Matrix& inputs, const Matrix& weights, std::span<const double> bias,
                  Matrix& out);
void sparse_affine_backward(std::span<const SparseVector> inputs, const Matrix& grad_out,
                            Matrix& grad_weights, std::span<double> grad_bias);
void dense_affine_backward(const Matrix& inputs, const Matrix& grad_out, Matrix& grad_weights,
                           std::span<double> grad_bias);
void dense_input_grad(const Matrix& weights, const Matrix& grad_out, Matrix& grad_in);

}  // namespace reference
}  // namespace kernels
}  // namespace polytuplet
