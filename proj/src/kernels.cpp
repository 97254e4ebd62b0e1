#include "polytuplet/kernels.hpp"

#include <cstdint>

namespace polytuplet::kernels {

namespace {

using Index = std::int64_t;

inline double row_sq_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    sum += diff * diff;
  }
  return sum;
}

inline void sparse_row(const SparseVector& x, const Matrix& w, std::span<const double> bias,
                       std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto w_row = w.row(i);
    double sum = bias[i];
    for (const auto& [k, v] : x.entries) sum += w_row[k] * v;
    out[i] = sum;
  }
}

inline void dense_row(std::span<const double> x, const Matrix& w, std::span<const double> bias,
                      std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto w_row = w.row(i);
    double sum = bias[i];
    for (std::size_t k = 0; k < x.size(); ++k) sum += w_row[k] * x[k];
    out[i] = sum;
  }
}

// One output unit's weight-gradient row, accumulated over rows in order.
inline void sparse_unit_grad(std::span<const SparseVector> inputs, const Matrix& grad_out,
                             std::size_t unit, std::span<double> grad_w_row, double& grad_b) {
  for (std::size_t r = 0; r < inputs.size(); ++r) {
    const double g = grad_out(r, unit);
    if (g == 0.0) continue;
    for (const auto& [k, v] : inputs[r].entries) grad_w_row[k] += g * v;
    grad_b += g;
  }
}

inline void dense_unit_grad(const Matrix& inputs, const Matrix& grad_out, std::size_t unit,
                            std::span<double> grad_w_row, double& grad_b) {
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    const double g = grad_out(r, unit);
    if (g == 0.0) continue;
    const auto x = inputs.row(r);
    for (std::size_t k = 0; k < x.size(); ++k) grad_w_row[k] += g * x[k];
    grad_b += g;
  }
}

inline void input_grad_row(const Matrix& w, std::span<const double> grad_out,
                           std::span<double> grad_in) {
  for (std::size_t k = 0; k < grad_in.size(); ++k) grad_in[k] = 0.0;
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const double g = grad_out[i];
    const auto w_row = w.row(i);
    for (std::size_t k = 0; k < grad_in.size(); ++k) grad_in[k] += g * w_row[k];
  }
}

}  // namespace

void distance_rows(const Matrix& context, const Matrix& results, std::size_t n_answers,
                   Matrix& out) {
  out = Matrix(context.rows(), n_answers);
  const auto rows = static_cast<Index>(context.rows());
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < rows; ++r) {
    const auto a = context.row(static_cast<std::size_t>(r));
    for (std::size_t j = 0; j < n_answers; ++j) {
      out(static_cast<std::size_t>(r), j) =
          row_sq_distance(a, results.row(static_cast<std::size_t>(r) * n_answers + j));
    }
  }
}

void sparse_affine(std::span<const SparseVector> inputs, const Matrix& weights,
                   std::span<const double> bias, Matrix& out) {
  out = Matrix(inputs.size(), weights.rows());
  const auto rows = static_cast<Index>(inputs.size());
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < rows; ++r) {
    sparse_row(inputs[static_cast<std::size_t>(r)], weights, bias,
               out.row(static_cast<std::size_t>(r)));
  }
}

void dense_affine(const Matrix& inputs, const Matrix& weights, std::span<const double> bias,
                  Matrix& out) {
  out = Matrix(inputs.rows(), weights.rows());
  const auto rows = static_cast<Index>(inputs.rows());
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < rows; ++r) {
    dense_row(inputs.row(static_cast<std::size_t>(r)), weights, bias,
              out.row(static_cast<std::size_t>(r)));
  }
}

void sparse_affine_backward(std::span<const SparseVector> inputs, const Matrix& grad_out,
                            Matrix& grad_weights, std::span<double> grad_bias) {
  const auto units = static_cast<Index>(grad_weights.rows());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < units; ++i) {
    const auto u = static_cast<std::size_t>(i);
    sparse_unit_grad(inputs, grad_out, u, grad_weights.row(u), grad_bias[u]);
  }
}

void dense_affine_backward(const Matrix& inputs, const Matrix& grad_out, Matrix& grad_weights,
                           std::span<double> grad_bias) {
  const auto units = static_cast<Index>(grad_weights.rows());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < units; ++i) {
    const auto u = static_cast<std::size_t>(i);
    dense_unit_grad(inputs, grad_out, u, grad_weights.row(u), grad_bias[u]);
  }
}

void dense_input_grad(const Matrix& weights, const Matrix& grad_out, Matrix& grad_in) {
  grad_in = Matrix(grad_out.rows(), weights.cols());
  const auto rows = static_cast<Index>(grad_out.rows());
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < rows; ++r) {
    input_grad_row(weights, grad_out.row(static_cast<std::size_t>(r)),
                   grad_in.row(static_cast<std::size_t>(r)));
  }
}

namespace reference {

void distance_rows(const Matrix& context, const Matrix& results, std::size_t n_answers,
                   Matrix& out) {
  out = Matrix(context.rows(), n_answers);
  for (std::size_t r = 0; r < context.rows(); ++r) {
    for (std::size_t j = 0; j < n_answers; ++j) {
      out(r, j) = row_sq_distance(context.row(r), results.row(r * n_answers + j));
    }
  }
}

void sparse_affine(std::span<const SparseVector> inputs, const Matrix& weights,
                   std::span<const double> bias, Matrix& out) {
  out = Matrix(inputs.size(), weights.rows());
  for (std::size_t r = 0; r < inputs.size(); ++r) {
    sparse_row(inputs[r], weights, bias, out.row(r));
  }
}

void dense_affine(const Matrix& inputs, const Matrix& weights, std::span<const double> bias,
                  Matrix& out) {
  out = Matrix(inputs.rows(), weights.rows());
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    dense_row(inputs.row(r), weights, bias, out.row(r));
  }
}

// Row-outer loop order; each element still sums over rows in increasing order.
void sparse_affine_backward(std::span<const SparseVector> inputs, const Matrix& grad_out,
                            Matrix& grad_weights, std::span<double> grad_bias) {
  for (std::size_t r = 0; r < inputs.size(); ++r) {
    for (std::size_t i = 0; i < grad_weights.rows(); ++i) {
      const double g = grad_out(r, i);
      if (g == 0.0) continue;
      for (const auto& [k, v] : inputs[r].entries) grad_weights(i, k) += g * v;
      grad_bias[i] += g;
    }
  }
}

void dense_affine_backward(const Matrix& inputs, const Matrix& grad_out, Matrix& grad_weights,
                           std::span<double> grad_bias) {
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    for (std::size_t i = 0; i < grad_weights.rows(); ++i) {
      const double g = grad_out(r, i);
      if (g == 0.0) continue;
      for (std::size_t k = 0; k < inputs.cols(); ++k) grad_weights(i, k) += g * inputs(r, k);
      grad_bias[i] += g;
    }
  }
}

void dense_input_grad(const Matrix& weights, const Matrix& grad_out, Matrix& grad_in) {
  grad_in = Matrix(grad_out.rows(), weights.cols());
  for (std::size_t r = 0; r < grad_out.rows(); ++r) {
    input_grad_row(weights, grad_out.row(r), grad_in.row(r));
  }
}

}  // namespace reference
}  // namespace polytuplet::kernels
