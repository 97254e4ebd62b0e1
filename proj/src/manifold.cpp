#include "polytuplet/manifold.hpp"

#include <cmath>
#include <cstdint>
#include <string>

#include "polytuplet/error.hpp"
#include "polytuplet/kernels.hpp"

namespace polytuplet {

void EmbeddingBatch::validate(bool require_labels) const {
  const std::size_t b = batch_size();
  if (b == 0) throw ShapeError("embedding batch is empty");
  if (n_answers < 2) throw ShapeError("embedding batch needs at least 2 answers per sample");
  if (results.rows() != b * n_answers) {
    throw ShapeError("results has " + std::to_string(results.rows()) + " rows, expected " +
                     std::to_string(b * n_answers));
  }
  if (results.cols() != context.cols()) {
    throw ShapeError("context dim " + std::to_string(context.cols()) + " != result dim " +
                     std::to_string(results.cols()));
  }
  if (require_labels && labels.size() != b) {
    throw ShapeError("batch needs one label per sample");
  }
  if (!labels.empty()) {
    if (labels.size() != b) throw ShapeError("label count does not match batch size");
    for (const auto y : labels) {
      if (y >= n_answers) throw ShapeError("label " + std::to_string(y) + " out of range");
    }
  }
}

namespace {

double norm_of(std::span<const double> x) {
  double sum = 0.0;
  for (const double v : x) sum += v * v;
  return std::sqrt(sum);
}

}  // namespace

std::vector<double> project_to_sphere(std::span<const double> raw) {
  const double norm = norm_of(raw);
  if (!(norm >= kMinProjectableNorm)) {
    throw DegenerateInputError("cannot project vector with norm " + std::to_string(norm) +
                               " onto the unit sphere");
  }
  std::vector<double> out(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) out[k] = raw[k] / norm;
  return out;
}

std::vector<double> project_to_sphere_backward(std::span<const double> raw,
                                               std::span<const double> upstream_grad) {
  if (raw.size() != upstream_grad.size()) {
    throw ShapeError("project_to_sphere_backward: dimension mismatch");
  }
  const double norm = norm_of(raw);
  if (!(norm >= kMinProjectableNorm)) {
    throw DegenerateInputError("cannot differentiate projection at norm " +
                               std::to_string(norm));
  }
  double radial = 0.0;
  for (std::size_t k = 0; k < raw.size(); ++k) radial += raw[k] / norm * upstream_grad[k];
  std::vector<double> out(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    out[k] = (upstream_grad[k] - radial * raw[k] / norm) / norm;
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: dimension mismatch");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += a[k] * b[k];
  return sum;
}

double sq_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("sq_distance: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    sum += diff * diff;
  }
  return sum;
}

Matrix distance_matrix(const EmbeddingBatch& batch) {
  batch.validate(false);
  Matrix out;
  kernels::distance_rows(batch.context, batch.results, batch.n_answers, out);
  return out;
}

void distance_backward(const EmbeddingBatch& batch, const Matrix& grad_distances,
                       Matrix& grad_context, Matrix& grad_results) {
  const std::size_t b = batch.batch_size();
  const std::size_t n = batch.n_answers;
  const std::size_t d = batch.dim();
  if (grad_distances.rows() != b || grad_distances.cols() != n) {
    throw ShapeError("distance gradient shape does not match batch");
  }
  grad_context = Matrix(b, d);
  grad_results = Matrix(b * n, d);
  const auto rows = static_cast<std::int64_t>(b);
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < rows; ++s) {
    const auto i = static_cast<std::size_t>(s);
    const auto a = batch.context.row(i);
    auto ga = grad_context.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double g = grad_distances(i, j);
      if (g == 0.0) continue;
      const auto r = batch.result(i, j);
      auto gr = grad_results.row(i * n + j);
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = 2.0 * (a[k] - r[k]);
        ga[k] += g * diff;
        gr[k] -= g * diff;
      }
    }
  }
}

}  // namespace polytuplet
