#include "polytuplet/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "polytuplet/rng.hpp"

namespace polytuplet {

namespace {

constexpr std::uint64_t kSampleStream = 0x7A;
constexpr std::uint64_t kTrialStream = 0x7B;

void set_param(TrainConfig& cfg, HyperParam param, double value) {
  switch (param) {
    case HyperParam::margin: cfg.loss.margin = value; break;
    case HyperParam::dropout_rate: cfg.model.dropout_rate = value; break;
    case HyperParam::learning_rate: cfg.learning_rate = value; break;
    case HyperParam::w_hard: cfg.loss.w_hard = value; break;
    case HyperParam::w_semi: cfg.loss.w_semi = value; break;
    case HyperParam::lambda_poly: cfg.loss.lambda_poly = value; break;
    case HyperParam::lambda_cce: cfg.loss.lambda_cce = value; break;
    case HyperParam::temperature: cfg.loss.temperature = value; break;
  }
}

}  // namespace

double ParamRange::sample(Rng& rng) const {
  if (!choices.empty()) return choices[rng.below(choices.size())];
  if (log_scale) {
    if (!(lo > 0.0 && hi > 0.0)) throw ConfigError("log-scale range needs positive bounds");
    return std::exp(rng.uniform(std::log(lo), std::log(hi)));
  }
  return rng.uniform(lo, hi);
}

TrainConfig SearchSpace::sample(const TrainConfig& base, Rng& rng) const {
  TrainConfig cfg = base;
  for (const auto& [param, range] : ranges) {
    if (range.choices.empty() && !(range.lo <= range.hi)) {
      throw ConfigError("empty range for " + std::string(to_string(param)));
    }
    set_param(cfg, param, range.sample(rng));
  }
  return cfg;
}

std::vector<std::size_t> rung_sizes(std::size_t n_configs, double eta) {
  if (n_configs < 1) throw ConfigError("tune needs at least one config");
  if (!(eta > 1.0)) throw ConfigError("eta must be greater than 1");
  std::vector<std::size_t> sizes{n_configs};
  while (sizes.back() > 1) {
    const auto next = static_cast<std::size_t>(std::ceil(static_cast<double>(sizes.back()) / eta));
    sizes.push_back(std::min(next, sizes.back() - 1));
  }
  return sizes;
}

std::vector<std::size_t> rung_epochs(std::size_t n_configs, std::size_t budget, double eta) {
  const auto sizes = rung_sizes(n_configs, eta);
  if (static_cast<double>(budget) < eta) {
    throw ConfigError("budget (" + std::to_string(budget) + ") must be at least eta");
  }
  std::vector<std::size_t> epochs(sizes.size());
  for (std::size_t r = 0; r < sizes.size(); ++r) {
    const double divisor = std::pow(eta, static_cast<double>(sizes.size() - 1 - r));
    epochs[r] = static_cast<std::size_t>(std::floor(static_cast<double>(budget) / divisor + 1e-9));
  }
  if (epochs.front() < 1) {
    throw ConfigError("budget " + std::to_string(budget) + " is too small for " +
                      std::to_string(sizes.size()) + " rungs at eta " + std::to_string(eta));
  }
  return epochs;
}

TuneResult tune(std::span<const McqaInstance> train_set, std::span<const McqaInstance> test_set,
                const TrainConfig& base, const SearchSpace& space, const TuneOptions& options) {
  const auto sizes = rung_sizes(options.n_configs, options.eta);
  const auto epochs = rung_epochs(options.n_configs, options.budget, options.eta);

  std::vector<TrainConfig> configs;
  Rng sampler(derive_seed(options.seed, kSampleStream));
  for (std::size_t t = 0; t < options.n_configs; ++t) {
    TrainConfig cfg = space.sample(base, sampler);
    cfg.seed = derive_seed(options.seed, kTrialStream, t);
    cfg.validate();
    configs.push_back(cfg);
  }

  TuneResult result;
  std::vector<std::size_t> alive(options.n_configs);
  for (std::size_t t = 0; t < alive.size(); ++t) alive[t] = t;

  for (std::size_t rung = 0; rung < sizes.size(); ++rung) {
    result.rungs.push_back(alive);
    std::vector<LeaderboardEntry> entries(alive.size());
    std::vector<std::exception_ptr> errors(alive.size());
    const auto count = static_cast<std::int64_t>(alive.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t s = 0; s < count; ++s) {
      const auto slot = static_cast<std::size_t>(s);
      auto& entry = entries[slot];
      entry.rung = rung;
      entry.trial = alive[slot];
      entry.epochs = epochs[rung];
      entry.config = configs[entry.trial];
      entry.config.epochs = epochs[rung];
      try {
        entry.test_accuracy =
            train(train_set, test_set, entry.config).report.best_test_accuracy;
      } catch (const DivergenceError&) {
        entry.diverged = true;
        entry.test_accuracy = 0.0;
      } catch (...) {
        errors[slot] = std::current_exception();
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }

    std::stable_sort(entries.begin(), entries.end(),
                     [](const LeaderboardEntry& a, const LeaderboardEntry& b) {
                       if (a.test_accuracy != b.test_accuracy) {
                         return a.test_accuracy > b.test_accuracy;
                       }
                       return a.trial < b.trial;
                     });
    const std::size_t keep = rung + 1 < sizes.size() ? sizes[rung + 1] : 1;
    alive.clear();
    for (std::size_t i = 0; i < keep; ++i) alive.push_back(entries[i].trial);
    result.leaderboard.insert(result.leaderboard.end(), entries.begin(), entries.end());
  }

  result.best_trial = alive.front();
  result.best = configs[result.best_trial];
  result.best.epochs = options.budget;
  return result;
}

std::string_view to_string(HyperParam param) {
  switch (param) {
    case HyperParam::margin: return "margin";
    case HyperParam::dropout_rate: return "dropout";
    case HyperParam::learning_rate: return "lr";
    case HyperParam::w_hard: return "w_hard";
    case HyperParam::w_semi: return "w_semi";
    case HyperParam::lambda_poly: return "lambda_poly";
    case HyperParam::lambda_cce: return "lambda_cce";
    case HyperParam::temperature: return "temperature";
  }
  return "?";
}

std::optional<HyperParam> parse_hyper_param(std::string_view name) {
  for (const auto p : {HyperParam::margin, HyperParam::dropout_rate, HyperParam::learning_rate,
                       HyperParam::w_hard, HyperParam::w_semi, HyperParam::lambda_poly,
                       HyperParam::lambda_cce, HyperParam::temperature}) {
    if (to_string(p) == name) return p;
  }
  return std::nullopt;
}

}  // namespace polytuplet
