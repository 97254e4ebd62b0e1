#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "polytuplet/data.hpp"
#include "polytuplet/encoder.hpp"
#include "polytuplet/loss.hpp"
#include "polytuplet/mining.hpp"
#include "polytuplet/optimizer.hpp"

namespace polytuplet {

enum class OptimizerKind { sgd, adam };

// cce_only is the cross-entropy baseline: the polytuplet weight is forced to 0.
enum class TrainMode { hybrid, cce_only };

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  AdamHyper adam;
  std::uint64_t seed = 0;
  PolytupletConfig loss;
  ModelConfig model;
  TrainMode mode = TrainMode::hybrid;

  void validate() const;
  // Loss weights actually used, after applying the mode.
  PolytupletConfig effective_loss() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double polytuplet_loss = 0.0;
  double cce_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  MiningCounts mining;
};

struct TrainReport {
  TrainMode mode = TrainMode::hybrid;
  std::vector<EpochStats> epochs;
  double best_test_accuracy = 0.0;
  std::size_t best_epoch = 0;
  double wall_clock_seconds = 0.0;
};

struct TrainResult {
  EncoderParams params;
  TrainReport report;
};

struct Prediction {
  std::size_t index = 0;
  std::vector<double> distances;
};

// argmin over squared distances; ties go to the lowest index.
std::size_t argmin_distance(std::span<const double> distances);

Prediction predict(const McqaInstance& instance, const EncoderParams& params);
std::vector<Prediction> predict_all(std::span<const McqaInstance> dataset,
                                    const EncoderParams& params);

// Fraction of correct predictions. Throws on an empty or unlabeled dataset.
double evaluate(std::span<const McqaInstance> dataset, const EncoderParams& params);

// Mini-batch training with per-epoch test evaluation. Deterministic for a
// fixed config. Throws DivergenceError on a non-finite loss.
TrainResult train(std::span<const McqaInstance> train_set, std::span<const McqaInstance> test_set,
                  const TrainConfig& cfg);

struct ModeComparison {
  TrainReport cce_only;
  TrainReport hybrid;
  double accuracy_delta = 0.0;        // hybrid - cce_only, best test accuracy
  double relative_improvement = 0.0;  // percent of the cce_only accuracy
};

// Trains both modes with the same seed and data.
ModeComparison compare_modes(std::span<const McqaInstance> train_set,
                             std::span<const McqaInstance> test_set, const TrainConfig& cfg);

std::string_view to_string(TrainMode mode);
std::string_view to_string(OptimizerKind kind);
std::optional<TrainMode> parse_train_mode(std::string_view name);
std::optional<OptimizerKind> parse_optimizer(std::string_view name);

}  // namespace polytuplet
