#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "polytuplet/data.hpp"
#include "polytuplet/rng.hpp"
#include "polytuplet/training.hpp"

namespace polytuplet {

enum class HyperParam {
  margin,
  dropout_rate,
  learning_rate,
  w_hard,
  w_semi,
  lambda_poly,
  lambda_cce,
  temperature,
};

// Either a discrete set of choices or a continuous [lo, hi] interval,
// optionally sampled log-uniformly.
struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
  bool log_scale = false;
  std::vector<double> choices;

  double sample(Rng& rng) const;
};

struct SearchSpace {
  std::vector<std::pair<HyperParam, ParamRange>> ranges;

  // Draws every range in order and applies it on top of `base`.
  TrainConfig sample(const TrainConfig& base, Rng& rng) const;
};

struct TuneOptions {
  std::size_t n_configs = 9;  // k
  std::size_t budget = 9;     // epochs for the final survivor
  double eta = 3.0;
  std::uint64_t seed = 0;
};

struct LeaderboardEntry {
  std::size_t rung = 0;
  std::size_t trial = 0;
  std::size_t epochs = 0;
  TrainConfig config;
  double test_accuracy = 0.0;
  bool diverged = false;
};

struct TuneResult {
  TrainConfig best;
  std::size_t best_trial = 0;
  std::vector<std::vector<std::size_t>> rungs;  // trial ids per rung
  std::vector<LeaderboardEntry> leaderboard;
};

// Rung sizes k, ceil(k/eta), ... down to 1.
std::vector<std::size_t> rung_sizes(std::size_t n_configs, double eta);

// Epochs per rung: floor(budget / eta^(rungs-1-r)). Throws ConfigError when
// the first rung would get less than one epoch.
std::vector<std::size_t> rung_epochs(std::size_t n_configs, std::size_t budget, double eta);

// Successive halving. Every trial retrains from scratch at each rung with a
// seed derived from (seed, trial). Trials inside a rung run concurrently.
TuneResult tune(std::span<const McqaInstance> train_set, std::span<const McqaInstance> test_set,
                const TrainConfig& base, const SearchSpace& space, const TuneOptions& options);

std::string_view to_string(HyperParam param);
std::optional<HyperParam> parse_hyper_param(std::string_view name);

}  // namespace polytuplet
