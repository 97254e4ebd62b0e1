#include "polytuplet/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "polytuplet/rng.hpp"

namespace polytuplet {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kDropoutStream = 3;
constexpr std::size_t kEvalChunk = 512;

std::size_t common_answer_count(std::span<const McqaInstance> dataset, const char* name) {
  if (dataset.empty()) throw ValidationError(std::string(name) + " set is empty");
  const std::size_t n = dataset.front().n_answers();
  for (const auto& instance : dataset) {
    if (instance.n_answers() != n) {
      throw ValidationError("record '" + instance.id + "' has " +
                            std::to_string(instance.n_answers()) + " answers, expected " +
                            std::to_string(n));
    }
    if (!instance.label) {
      throw ValidationError(std::string(name) + " record '" + instance.id + "' is unlabeled");
    }
  }
  return n;
}

BatchFeatures gather(const BatchFeatures& all, std::span<const std::size_t> rows) {
  const std::size_t n = all.result_shape.cols;
  BatchFeatures out;
  out.result_shape = {rows.size(), n};
  out.context.reserve(rows.size());
  out.results.reserve(rows.size() * n);
  for (const auto r : rows) {
    out.context.push_back(all.context[r]);
    for (std::size_t j = 0; j < n; ++j) out.results.push_back(all.results[r * n + j]);
    if (!all.labels.empty()) out.labels.push_back(all.labels[r]);
  }
  return out;
}

std::vector<Prediction> predict_features(const BatchFeatures& features,
                                         const EncoderParams& params) {
  const std::size_t total = features.context.size();
  std::vector<Prediction> out;
  out.reserve(total);
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < total; start += kEvalChunk) {
    rows.resize(std::min(kEvalChunk, total - start));
    std::iota(rows.begin(), rows.end(), start);
    const auto encoded = encode_features(gather(features, rows), params, Mode::eval, 0);
    const Matrix distances = distance_matrix(encoded.batch);
    for (std::size_t i = 0; i < distances.rows(); ++i) {
      const auto row = distances.row(i);
      out.push_back({argmin_distance(row), {row.begin(), row.end()}});
    }
  }
  return out;
}

double accuracy_of(const BatchFeatures& features, const EncoderParams& params) {
  const auto predictions = predict_features(features, params);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    correct += predictions[i].index == features.labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

std::string format_rate(double lr) {
  std::ostringstream out;
  out << lr;
  return out.str();
}

bool all_finite(const EncoderParams& params) {
  for (const auto t : params.tensors()) {
    for (const double v : t) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

// Once parameters have been updated, an embedding that cannot be projected
// means the weights overflowed; report that as divergence, not bad input.
template <typename F>
auto guard_divergence(std::size_t epoch, std::uint64_t step, double learning_rate, F&& body) {
  try {
    return body();
  } catch (const DegenerateInputError& e) {
    if (step == 0) throw;
    throw DivergenceError("non-finite embeddings at epoch " + std::to_string(epoch) + ", step " +
                          std::to_string(step) + " (learning rate " + format_rate(learning_rate) +
                          "): " + e.what());
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(std::isfinite(learning_rate) && learning_rate >= 0.0)) {
    throw ConfigError("learning_rate must be finite and >= 0");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 &&
        adam.epsilon > 0.0)) {
    throw ConfigError("Adam hyperparameters need beta in [0, 1) and epsilon > 0");
  }
  model.validate();
  effective_loss().validate();
}

PolytupletConfig TrainConfig::effective_loss() const {
  PolytupletConfig out = loss;
  if (mode == TrainMode::cce_only) out.lambda_poly = 0.0;
  return out;
}

std::size_t argmin_distance(std::span<const double> distances) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < distances.size(); ++j) {
    if (distances[j] < distances[best]) best = j;
  }
  return best;
}

Prediction predict(const McqaInstance& instance, const EncoderParams& params) {
  validate_instance(instance);
  const auto encoded = encode_batch(std::span(&instance, 1), params, Mode::eval, 0);
  const Matrix distances = distance_matrix(encoded.batch);
  const auto row = distances.row(0);
  return {argmin_distance(row), {row.begin(), row.end()}};
}

std::vector<Prediction> predict_all(std::span<const McqaInstance> dataset,
                                    const EncoderParams& params) {
  if (dataset.empty()) return {};
  const std::size_t n = dataset.front().n_answers();
  for (const auto& instance : dataset) {
    validate_instance(instance, n);
  }
  return predict_features(featurize(dataset, params.config), params);
}

double evaluate(std::span<const McqaInstance> dataset, const EncoderParams& params) {
  common_answer_count(dataset, "evaluation");
  return accuracy_of(featurize(dataset, params.config), params);
}

TrainResult train(std::span<const McqaInstance> train_set, std::span<const McqaInstance> test_set,
                  const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t n_answers = common_answer_count(train_set, "training");
  if (common_answer_count(test_set, "test") != n_answers) {
    throw ValidationError("train and test sets have different answer counts");
  }
  const auto start = std::chrono::steady_clock::now();
  const PolytupletConfig loss_cfg = cfg.effective_loss();

  TrainResult result;
  result.params = EncoderParams::initialize(cfg.model, derive_seed(cfg.seed, kInitStream));
  result.report.mode = cfg.mode;
  auto& params = result.params;
  AdamState adam = make_adam_state(params.tensors());

  const BatchFeatures train_features = featurize(train_set, cfg.model);
  const BatchFeatures test_features = featurize(test_set, cfg.model);
  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::uint64_t global_step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng(derive_seed(cfg.seed, kShuffleStream, epoch)).shuffle(std::span(order));

    EpochStats stats;
    stats.epoch = epoch;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size, ++global_step) {
      const std::span<const std::size_t> rows(order.data() + begin,
                                              std::min(cfg.batch_size, n - begin));
      auto encoded = guard_divergence(epoch, global_step, cfg.learning_rate, [&] {
        return encode_features(gather(train_features, rows), params, Mode::train,
                               derive_seed(cfg.seed, kDropoutStream, global_step));
      });
      const auto loss = hybrid_loss(encoded.batch, loss_cfg);
      if (!std::isfinite(loss.total.value)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(global_step) + " (learning rate " +
                              format_rate(cfg.learning_rate) + ")");
      }
      const auto weight = static_cast<double>(rows.size());
      stats.loss += loss.total.value * weight;
      stats.polytuplet_loss += loss.polytuplet * weight;
      stats.cce_loss += loss.cce * weight;
      stats.mining += loss.mining.counts;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        correct += argmin_distance(loss.distances.row(i)) == encoded.batch.labels[i] ? 1 : 0;
      }

      const auto grads = encode_backward(std::move(encoded.trace), loss.total.grad_context,
                                         loss.total.grad_results, params);
      if (cfg.optimizer == OptimizerKind::sgd) {
        sgd_update(params.tensors(), grads.tensors(), cfg.learning_rate);
      } else {
        adam_update(params.tensors(), grads.tensors(), adam, cfg.learning_rate, cfg.adam);
      }
      if (!all_finite(params)) {
        throw DivergenceError("non-finite parameters after epoch " + std::to_string(epoch) +
                              ", step " + std::to_string(global_step) + " (learning rate " +
                              format_rate(cfg.learning_rate) + ")");
      }
    }
    const auto total = static_cast<double>(n);
    stats.loss /= total;
    stats.polytuplet_loss /= total;
    stats.cce_loss /= total;
    stats.train_accuracy = static_cast<double>(correct) / total;
    stats.test_accuracy = guard_divergence(epoch, global_step, cfg.learning_rate,
                                           [&] { return accuracy_of(test_features, params); });
    if (epoch == 1 || stats.test_accuracy > result.report.best_test_accuracy) {
      result.report.best_test_accuracy = stats.test_accuracy;
      result.report.best_epoch = epoch;
    }
    result.report.epochs.push_back(stats);
  }
  result.report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

ModeComparison compare_modes(std::span<const McqaInstance> train_set,
                             std::span<const McqaInstance> test_set, const TrainConfig& cfg) {
  ModeComparison out;
  TrainConfig baseline = cfg;
  baseline.mode = TrainMode::cce_only;
  TrainConfig hybrid = cfg;
  hybrid.mode = TrainMode::hybrid;
  out.cce_only = train(train_set, test_set, baseline).report;
  out.hybrid = train(train_set, test_set, hybrid).report;
  out.accuracy_delta = out.hybrid.best_test_accuracy - out.cce_only.best_test_accuracy;
  out.relative_improvement = out.cce_only.best_test_accuracy > 0.0
                                 ? 100.0 * out.accuracy_delta / out.cce_only.best_test_accuracy
                                 : 0.0;
  return out;
}

std::string_view to_string(TrainMode mode) {
  return mode == TrainMode::hybrid ? "hybrid" : "cce_only";
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "sgd";
}

std::optional<TrainMode> parse_train_mode(std::string_view name) {
  if (name == "hybrid") return TrainMode::hybrid;
  if (name == "cce_only") return TrainMode::cce_only;
  return std::nullopt;
}

std::optional<OptimizerKind> parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  return std::nullopt;
}

}  // namespace polytuplet
