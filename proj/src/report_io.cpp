#include "polytuplet/report_io.hpp"

#include <functional>
#include <map>

namespace polytuplet {

using nlohmann::json;

json config_to_json(const TrainConfig& cfg) {
  return {
      {"epochs", cfg.epochs},
      {"batch_size", cfg.batch_size},
      {"lr", cfg.learning_rate},
      {"optimizer", std::string(to_string(cfg.optimizer))},
      {"adam_beta1", cfg.adam.beta1},
      {"adam_beta2", cfg.adam.beta2},
      {"adam_epsilon", cfg.adam.epsilon},
      {"seed", cfg.seed},
      {"mode", std::string(to_string(cfg.mode))},
      {"margin", cfg.loss.margin},
      {"w_hard", cfg.loss.w_hard},
      {"w_semi", cfg.loss.w_semi},
      {"lambda_poly", cfg.loss.lambda_poly},
      {"lambda_cce", cfg.loss.lambda_cce},
      {"temperature", cfg.loss.temperature},
      {"vocab_dim", cfg.model.vocab_dim},
      {"ngram", cfg.model.n_gram},
      {"hidden", cfg.model.hidden},
      {"embed_dim", cfg.model.embed_dim},
      {"dropout", cfg.model.dropout_rate},
      {"normalize_features", cfg.model.normalize_features},
  };
}

namespace {

template <typename T>
T typed(const json& value, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!value.is_number_unsigned()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!value.is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!value.is_boolean()) throw ConfigError("");
    } else {
      if (!value.is_string()) throw ConfigError("");
    }
    return value.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace

void apply_config_json(const json& overlay, TrainConfig& cfg) {
  if (!overlay.is_object()) throw ConfigError("config file must hold a JSON object");
  using Setter = std::function<void(const json&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"epochs", [&](const json& v, const std::string& k) { cfg.epochs = typed<std::size_t>(v, k); }},
      {"batch_size", [&](const json& v, const std::string& k) { cfg.batch_size = typed<std::size_t>(v, k); }},
      {"lr", [&](const json& v, const std::string& k) { cfg.learning_rate = typed<double>(v, k); }},
      {"optimizer",
       [&](const json& v, const std::string& k) {
         const auto kind = parse_optimizer(typed<std::string>(v, k));
         if (!kind) throw ConfigError("config key 'optimizer' must be adam or sgd");
         cfg.optimizer = *kind;
       }},
      {"adam_beta1", [&](const json& v, const std::string& k) { cfg.adam.beta1 = typed<double>(v, k); }},
      {"adam_beta2", [&](const json& v, const std::string& k) { cfg.adam.beta2 = typed<double>(v, k); }},
      {"adam_epsilon", [&](const json& v, const std::string& k) { cfg.adam.epsilon = typed<double>(v, k); }},
      {"seed", [&](const json& v, const std::string& k) { cfg.seed = typed<std::uint64_t>(v, k); }},
      {"mode",
       [&](const json& v, const std::string& k) {
         const auto mode = parse_train_mode(typed<std::string>(v, k));
         if (!mode) throw ConfigError("config key 'mode' must be hybrid or cce_only");
         cfg.mode = *mode;
       }},
      {"margin", [&](const json& v, const std::string& k) { cfg.loss.margin = typed<double>(v, k); }},
      {"w_hard", [&](const json& v, const std::string& k) { cfg.loss.w_hard = typed<double>(v, k); }},
      {"w_semi", [&](const json& v, const std::string& k) { cfg.loss.w_semi = typed<double>(v, k); }},
      {"lambda_poly", [&](const json& v, const std::string& k) { cfg.loss.lambda_poly = typed<double>(v, k); }},
      {"lambda_cce", [&](const json& v, const std::string& k) { cfg.loss.lambda_cce = typed<double>(v, k); }},
      {"temperature", [&](const json& v, const std::string& k) { cfg.loss.temperature = typed<double>(v, k); }},
      {"vocab_dim", [&](const json& v, const std::string& k) { cfg.model.vocab_dim = typed<std::size_t>(v, k); }},
      {"ngram", [&](const json& v, const std::string& k) { cfg.model.n_gram = typed<std::size_t>(v, k); }},
      {"hidden", [&](const json& v, const std::string& k) { cfg.model.hidden = typed<std::size_t>(v, k); }},
      {"embed_dim", [&](const json& v, const std::string& k) { cfg.model.embed_dim = typed<std::size_t>(v, k); }},
      {"dropout", [&](const json& v, const std::string& k) { cfg.model.dropout_rate = typed<double>(v, k); }},
      {"normalize_features",
       [&](const json& v, const std::string& k) { cfg.model.normalize_features = typed<bool>(v, k); }},
  };
  for (const auto& [key, value] : overlay.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(value, key);
  }
}

json epoch_to_json(const EpochStats& stats) {
  return {
      {"epoch", stats.epoch},
      {"loss", stats.loss},
      {"polytuplet_loss", stats.polytuplet_loss},
      {"cce_loss", stats.cce_loss},
      {"train_accuracy", stats.train_accuracy},
      {"test_accuracy", stats.test_accuracy},
      {"mining",
       {{"hard", stats.mining.hard},
        {"semi_hard", stats.mining.semi_hard},
        {"easy", stats.mining.easy}}},
  };
}

json summary_to_json(const TrainReport& report, const TrainConfig& cfg) {
  json out = {
      {"mode", std::string(to_string(report.mode))},
      {"epochs", report.epochs.size()},
      {"best_test_accuracy", report.best_test_accuracy},
      {"best_epoch", report.best_epoch},
      {"config", config_to_json(cfg)},
  };
  if (!report.epochs.empty()) {
    const auto& last = report.epochs.back();
    out["final"] = {
        {"loss", last.loss},
        {"polytuplet_loss", last.polytuplet_loss},
        {"cce_loss", last.cce_loss},
        {"train_accuracy", last.train_accuracy},
        {"test_accuracy", last.test_accuracy},
    };
  }
  return out;
}

std::string report_to_jsonl(const TrainReport& report) {
  std::string out;
  for (const auto& stats : report.epochs) {
    out += epoch_to_json(stats).dump();
    out += '\n';
  }
  return out;
}

}  // namespace polytuplet
