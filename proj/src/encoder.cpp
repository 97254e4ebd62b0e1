#include "polytuplet/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "polytuplet/rng.hpp"
#include "polytuplet/text.hpp"

namespace polytuplet {

void ModelConfig::validate() const {
  if (vocab_dim < 8) throw ConfigError("vocab_dim must be at least 8");
  if (vocab_dim > UINT32_MAX) throw ConfigError("vocab_dim too large");
  if (n_gram != 1 && n_gram != 2) throw ConfigError("n_gram must be 1 or 2");
  if (hidden < 1) throw ConfigError("hidden width must be at least 1");
  if (embed_dim < 1) throw ConfigError("embedding dimension must be at least 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout_rate must lie in [0, 1)");
  }
}

PathWeights PathWeights::zeros(const ModelConfig& config) {
  PathWeights w;
  w.w1 = Matrix(config.hidden, config.vocab_dim);
  w.b1.assign(config.hidden, 0.0);
  w.w2 = Matrix(config.embed_dim, config.hidden);
  w.b2.assign(config.embed_dim, 0.0);
  return w;
}

std::array<std::span<double>, 4> PathWeights::tensors() {
  return {w1.values(), std::span<double>(b1), w2.values(), std::span<double>(b2)};
}

std::array<std::span<const double>, 4> PathWeights::tensors() const {
  return {w1.values(), std::span<const double>(b1), w2.values(), std::span<const double>(b2)};
}

namespace {

template <typename Span, typename Path>
std::vector<Span> both_paths(Path& context, Path& result) {
  std::vector<Span> out;
  for (auto t : context.tensors()) out.push_back(t);
  for (auto t : result.tensors()) out.push_back(t);
  return out;
}

void fill_uniform(std::span<double> values, double limit, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& v : values) v = rng.uniform(-limit, limit);
}

PathWeights init_path(const ModelConfig& config, std::uint64_t seed) {
  auto w = PathWeights::zeros(config);
  const auto v = static_cast<double>(config.vocab_dim);
  const auto h = static_cast<double>(config.hidden);
  const auto d = static_cast<double>(config.embed_dim);
  fill_uniform(w.w1.values(), std::sqrt(6.0 / (v + h)), derive_seed(seed, 1));
  fill_uniform(w.w2.values(), std::sqrt(6.0 / (h + d)), derive_seed(seed, 2));
  // A non-zero output bias keeps rows whose hidden units are all inactive (or
  // all dropped) projectable onto the sphere.
  fill_uniform(w.b2, std::sqrt(6.0 / (h + d)), derive_seed(seed, 3));
  return w;
}

}  // namespace

EncoderParams EncoderParams::initialize(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  EncoderParams params;
  params.config = config;
  params.context = init_path(config, derive_seed(seed, 0xC0));
  params.result = init_path(config, derive_seed(seed, 0xE5));
  return params;
}

std::vector<std::span<double>> EncoderParams::tensors() {
  return both_paths<std::span<double>>(context, result);
}

std::vector<std::span<const double>> EncoderParams::tensors() const {
  return both_paths<std::span<const double>>(context, result);
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto t : tensors()) n += t.size();
  return n;
}

ParamGrads ParamGrads::zeros(const ModelConfig& config) {
  return {PathWeights::zeros(config), PathWeights::zeros(config)};
}

std::vector<std::span<double>> ParamGrads::tensors() {
  return both_paths<std::span<double>>(context, result);
}

std::vector<std::span<const double>> ParamGrads::tensors() const {
  return both_paths<std::span<const double>>(context, result);
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint32_t token_bucket(std::string_view token, std::size_t vocab_dim) noexcept {
  return static_cast<std::uint32_t>(fnv1a64(token) % vocab_dim);
}

SparseVector tokenize(std::string_view text, std::size_t vocab_dim, std::size_t n_gram,
                      bool normalize) {
  if (vocab_dim < 8) throw ConfigError("tokenize: vocab_dim must be at least 8");
  if (n_gram != 1 && n_gram != 2) throw ConfigError("tokenize: n_gram must be 1 or 2");
  const auto words = split_words(text);

  std::vector<std::uint32_t> buckets;
  buckets.reserve(words.size() * n_gram);
  for (const auto& w : words) buckets.push_back(token_bucket(w, vocab_dim));
  if (n_gram == 2) {
    for (std::size_t i = 1; i < words.size(); ++i) {
      // Unit separator keeps "ab c" and "a bc" apart.
      buckets.push_back(token_bucket(words[i - 1] + '\x1f' + words[i], vocab_dim));
    }
  }
  std::sort(buckets.begin(), buckets.end());

  SparseVector out;
  out.dim = vocab_dim;
  for (const auto b : buckets) {
    if (!out.entries.empty() && out.entries.back().first == b) {
      out.entries.back().second += 1.0;
    } else {
      out.entries.emplace_back(b, 1.0);
    }
  }
  if (normalize && !out.entries.empty()) {
    double sum = 0.0;
    for (const auto& [k, v] : out.entries) sum += v * v;
    const double norm = std::sqrt(sum);
    for (auto& [k, v] : out.entries) v /= norm;
  }
  return out;
}

DropoutResult dropout(std::span<const double> activations, double rate, std::uint64_t seed,
                      Mode mode) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  DropoutResult out;
  out.output.assign(activations.begin(), activations.end());
  out.mask.assign(activations.size(), 1.0);
  if (mode == Mode::eval || rate == 0.0) return out;

  const double keep_scale = 1.0 / (1.0 - rate);
  Rng rng(seed);
  for (std::size_t k = 0; k < activations.size(); ++k) {
    out.mask[k] = rng.uniform() < rate ? 0.0 : keep_scale;
    out.output[k] = activations[k] * out.mask[k];
  }
  return out;
}

BatchFeatures featurize(std::span<const McqaInstance> instances, const ModelConfig& config) {
  if (instances.empty()) throw ValidationError("cannot encode an empty batch");
  BatchFeatures features;
  std::vector<std::vector<SparseVector>> nested;
  nested.reserve(instances.size());
  bool labeled = true;
  for (const auto& instance : instances) {
    const std::string prompt = instance.context + " " + instance.question;
    features.context.push_back(
        tokenize(prompt, config.vocab_dim, config.n_gram, config.normalize_features));
    auto& row = nested.emplace_back();
    for (const auto& answer : instance.answers) {
      row.push_back(tokenize(prompt + " " + answer, config.vocab_dim, config.n_gram,
                             config.normalize_features));
    }
    labeled = labeled && instance.label.has_value();
  }
  auto flat = flatten_index_blind(nested);
  features.results = std::move(flat.items);
  features.result_shape = flat.shape;
  if (labeled) {
    for (const auto& instance : instances) features.labels.push_back(*instance.label);
  }
  return features;
}

namespace {

constexpr std::uint64_t kContextStream = 1;
constexpr std::uint64_t kResultStream = 2;

// Forward through one path; returns the projected embeddings.
Matrix path_forward(const PathWeights& w, const ModelConfig& config, PathTrace& trace, Mode mode,
                    std::uint64_t seed) {
  kernels::sparse_affine(trace.inputs, w.w1, w.b1, trace.pre);
  const std::size_t rows = trace.pre.rows();
  const std::size_t h = trace.pre.cols();
  trace.hidden = Matrix(rows, h);
  const bool drop = mode == Mode::train && config.dropout_rate > 0.0;
  if (drop) trace.mask = Matrix(rows, h);

  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < n; ++s) {
    const auto r = static_cast<std::size_t>(s);
    auto hidden = trace.hidden.row(r);
    const auto pre = trace.pre.row(r);
    for (std::size_t k = 0; k < h; ++k) hidden[k] = pre[k] > 0.0 ? pre[k] : 0.0;
    if (drop) {
      auto result = dropout(hidden, config.dropout_rate, derive_seed(seed, r), Mode::train);
      std::copy(result.output.begin(), result.output.end(), hidden.begin());
      std::copy(result.mask.begin(), result.mask.end(), trace.mask.row(r).begin());
    }
  }

  kernels::dense_affine(trace.hidden, w.w2, w.b2, trace.raw);
  Matrix embeddings(rows, config.embed_dim);
  // Sequential so a degenerate row throws from the calling thread.
  for (std::size_t r = 0; r < rows; ++r) {
    const auto unit = project_to_sphere(trace.raw.row(r));
    std::copy(unit.begin(), unit.end(), embeddings.row(r).begin());
  }
  return embeddings;
}

void path_backward(PathTrace& trace, const Matrix& grad_embeddings, const PathWeights& w,
                   PathWeights& grads) {
  const std::size_t rows = trace.raw.rows();
  if (grad_embeddings.rows() != rows || grad_embeddings.cols() != trace.raw.cols()) {
    throw ShapeError("encode_backward: gradient shape does not match trace");
  }
  Matrix grad_raw(rows, trace.raw.cols());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto g = project_to_sphere_backward(trace.raw.row(r), grad_embeddings.row(r));
    std::copy(g.begin(), g.end(), grad_raw.row(r).begin());
  }
  kernels::dense_affine_backward(trace.hidden, grad_raw, grads.w2, grads.b2);

  Matrix grad_pre;
  kernels::dense_input_grad(w.w2, grad_raw, grad_pre);
  const bool masked = !trace.mask.empty();
  for (std::size_t k = 0; k < grad_pre.size(); ++k) {
    double g = grad_pre.values()[k];
    if (masked) g *= trace.mask.values()[k];
    grad_pre.values()[k] = trace.pre.values()[k] > 0.0 ? g : 0.0;
  }
  kernels::sparse_affine_backward(trace.inputs, grad_pre, grads.w1, grads.b1);
}

}  // namespace

EncodeResult encode_features(BatchFeatures features, const EncoderParams& params, Mode mode,
                             std::uint64_t seed) {
  params.config.validate();
  const std::size_t b = features.context.size();
  const std::size_t n = features.result_shape.cols;
  if (b == 0 || features.result_shape.rows != b || features.results.size() != b * n) {
    throw ShapeError("encode: inconsistent feature shapes");
  }
  if (mode == Mode::train && features.labels.size() != b) {
    throw ValidationError("training batches must be fully labeled");
  }
  for (const auto* group : {&features.context, &features.results}) {
    for (const auto& x : *group) {
      if (x.dim != params.config.vocab_dim) {
        throw ShapeError("feature dim " + std::to_string(x.dim) + " != model vocab_dim " +
                         std::to_string(params.config.vocab_dim));
      }
    }
  }

  EncodeResult out;
  out.trace.batch_size = b;
  out.trace.n_answers = n;
  out.trace.context.inputs = std::move(features.context);
  out.trace.result.inputs = std::move(features.results);
  out.batch.n_answers = n;
  out.batch.labels = std::move(features.labels);
  out.batch.context = path_forward(params.context, params.config, out.trace.context, mode,
                                   derive_seed(seed, kContextStream));
  out.batch.results = path_forward(params.result, params.config, out.trace.result, mode,
                                   derive_seed(seed, kResultStream));
  return out;
}

EncodeResult encode_batch(std::span<const McqaInstance> instances, const EncoderParams& params,
                          Mode mode, std::uint64_t seed) {
  return encode_features(featurize(instances, params.config), params, mode, seed);
}

ParamGrads encode_backward(ForwardTrace&& trace, const Matrix& grad_context,
                           const Matrix& grad_results, const EncoderParams& params) {
  ForwardTrace consumed = std::move(trace);
  auto grads = ParamGrads::zeros(params.config);
  path_backward(consumed.context, grad_context, params.context, grads.context);
  path_backward(consumed.result, grad_results, params.result, grads.result);
  return grads;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'P', 'O', 'L', 'Y', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ValidationError("checkpoint truncated");
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
  const auto& c = params.config;
  out.write(kMagic, sizeof kMagic);
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint64_t>(out, c.vocab_dim);
  write_pod<std::uint64_t>(out, c.n_gram);
  write_pod<std::uint64_t>(out, c.hidden);
  write_pod<std::uint64_t>(out, c.embed_dim);
  write_pod<double>(out, c.dropout_rate);
  write_pod<std::uint8_t>(out, c.normalize_features ? 1 : 0);
  for (const auto t : params.tensors()) {
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw Error("write failed for checkpoint '" + path.string() + "'");
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ValidationError("'" + path.string() + "' is not a polytuplet checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  c.vocab_dim = read_pod<std::uint64_t>(in);
  c.n_gram = read_pod<std::uint64_t>(in);
  c.hidden = read_pod<std::uint64_t>(in);
  c.embed_dim = read_pod<std::uint64_t>(in);
  c.dropout_rate = read_pod<double>(in);
  c.normalize_features = read_pod<std::uint8_t>(in) != 0;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ValidationError(std::string("checkpoint header invalid: ") + e.what());
  }

  EncoderParams params;
  params.config = c;
  params.context = PathWeights::zeros(c);
  params.result = PathWeights::zeros(c);
  for (auto t : params.tensors()) {
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw ValidationError("checkpoint truncated");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ValidationError("checkpoint has trailing bytes");
  }
  return params;
}

}  // namespace polytuplet
