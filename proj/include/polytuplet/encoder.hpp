#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "polytuplet/data.hpp"
#include "polytuplet/error.hpp"
#include "polytuplet/kernels.hpp"
#include "polytuplet/manifold.hpp"
#include "polytuplet/matrix.hpp"

namespace polytuplet {

enum class Mode { train, eval };

struct ModelConfig {
  std::size_t vocab_dim = 1024;  // hashed feature buckets (V)
  std::size_t n_gram = 1;        // 1 = unigrams, 2 = unigrams + bigrams
  std::size_t hidden = 128;      // h
  std::size_t embed_dim = 64;    // d
  double dropout_rate = 0.1;
  bool normalize_features = false;  // L2-normalize hashed counts

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// One V -> h -> d feedforward path. w1 is h x V, w2 is d x h.
struct PathWeights {
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;

  static PathWeights zeros(const ModelConfig& config);
  std::array<std::span<double>, 4> tensors();
  std::array<std::span<const double>, 4> tensors() const;
  bool operator==(const PathWeights&) const = default;
};

// Two independently trained paths: context+question -> E^a and
// context+question+answer -> E^j.
struct EncoderParams {
  ModelConfig config;
  PathWeights context;
  PathWeights result;

  // Uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static EncoderParams initialize(const ModelConfig& config, std::uint64_t seed);

  // Flat view of all 8 tensors, context path first.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::size_t parameter_count() const;
  bool operator==(const EncoderParams&) const = default;
};

// Gradients with the same layout as EncoderParams.
struct ParamGrads {
  PathWeights context;
  PathWeights result;

  static ParamGrads zeros(const ModelConfig& config);
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

// Stable 64-bit FNV-1a; no seed, identical on every platform.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::uint32_t token_bucket(std::string_view token, std::size_t vocab_dim) noexcept;

// Hashed bag of words (plus bigrams when n_gram == 2). Empty text gives the zero vector.
SparseVector tokenize(std::string_view text, std::size_t vocab_dim, std::size_t n_gram,
                      bool normalize = false);

struct FlatShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool operator==(const FlatShape&) const = default;
};

template <typename T>
struct Flattened {
  std::vector<T> items;
  FlatShape shape;
};

// Row-major (B x N) -> B*N. Each answer becomes an independent row, so nothing
// downstream can see which position it came from.
template <typename T>
Flattened<T> flatten_index_blind(const std::vector<std::vector<T>>& nested) {
  Flattened<T> out;
  out.shape.rows = nested.size();
  out.shape.cols = nested.empty() ? 0 : nested.front().size();
  out.items.reserve(out.shape.rows * out.shape.cols);
  for (const auto& row : nested) {
    if (row.size() != out.shape.cols) throw ShapeError("flatten_index_blind: ragged input");
    out.items.insert(out.items.end(), row.begin(), row.end());
  }
  return out;
}

template <typename T>
std::vector<std::vector<T>> unflatten(std::span<const T> items, FlatShape shape) {
  if (items.size() != shape.rows * shape.cols) throw ShapeError("unflatten: size mismatch");
  std::vector<std::vector<T>> out(shape.rows);
  for (std::size_t r = 0; r < shape.rows; ++r) {
    out[r].assign(items.begin() + static_cast<std::ptrdiff_t>(r * shape.cols),
                  items.begin() + static_cast<std::ptrdiff_t>((r + 1) * shape.cols));
  }
  return out;
}

struct DropoutResult {
  std::vector<double> output;
  std::vector<double> mask;  // per-unit multiplier: 0 or 1 / (1 - rate)
};

// Inverted dropout; eval mode is the identity with an all-ones mask.
DropoutResult dropout(std::span<const double> activations, double rate, std::uint64_t seed,
                      Mode mode);

// Tokenized inputs for one batch: context rows (B) and flattened result rows (B*N).
struct BatchFeatures {
  std::vector<SparseVector> context;
  std::vector<SparseVector> results;
  FlatShape result_shape;
  std::vector<std::size_t> labels;  // empty when any instance is unlabeled
};

BatchFeatures featurize(std::span<const McqaInstance> instances, const ModelConfig& config);

struct PathTrace {
  std::vector<SparseVector> inputs;
  Matrix pre;     // hidden pre-activations
  Matrix mask;    // dropout multipliers; empty when dropout was not applied
  Matrix hidden;  // post-activation, post-dropout
  Matrix raw;     // output before sphere projection
};

struct ForwardTrace {
  PathTrace context;
  PathTrace result;
  std::size_t batch_size = 0;
  std::size_t n_answers = 0;
};

struct EncodeResult {
  EmbeddingBatch batch;
  ForwardTrace trace;
};

EncodeResult encode_features(BatchFeatures features, const EncoderParams& params, Mode mode,
                             std::uint64_t seed);

// Deterministic in (params, instances, mode, seed). Train mode requires labels.
EncodeResult encode_batch(std::span<const McqaInstance> instances, const EncoderParams& params,
                          Mode mode, std::uint64_t seed);

// Exact backpropagation from embedding gradients to every parameter. The
// trace is consumed.
ParamGrads encode_backward(ForwardTrace&& trace, const Matrix& grad_context,
                           const Matrix& grad_results, const EncoderParams& params);

// Versioned little-endian binary container; round trip is lossless.
void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params);
EncoderParams load_checkpoint(const std::filesystem::path& path);

}  // namespace polytuplet
