// Command-line front end: synthetic data generation, dataset splitting,
// training, evaluation, CCE-vs-hybrid comparison, gradient checking and
// hyperparameter tuning.
//
// Exit codes: 0 success, 1 gradient check failed, 2 usage error,
// 3 data/validation error, 4 numerical divergence.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "polytuplet/data.hpp"
#include "polytuplet/encoder.hpp"
#include "polytuplet/error.hpp"
#include "polytuplet/gradcheck.hpp"
#include "polytuplet/report_io.hpp"
#include "polytuplet/training.hpp"
#include "polytuplet/tuner.hpp"

namespace {

using namespace polytuplet;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path + "'");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw ParseError("malformed JSON in '" + path + "' at byte " + std::to_string(e.byte), e.byte);
  }
}

// Training flags. Unset flags fall back to the config file, then to defaults.
struct TrainFlags {
  std::optional<std::string> config_file;
  std::optional<std::string> mode;
  std::optional<double> margin;
  std::optional<double> dropout;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<std::string> optimizer;
  std::optional<std::uint64_t> seed;
  std::optional<double> w_hard;
  std::optional<double> w_semi;
  std::optional<double> lambda_poly;
  std::optional<double> lambda_cce;
  std::optional<double> temperature;
  std::optional<std::size_t> vocab_dim;
  std::optional<std::size_t> ngram;
  std::optional<std::size_t> hidden;
  std::optional<std::size_t> embed_dim;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "JSON config overlay (flags take precedence)");
    app->add_option("--mode", mode, "hybrid | cce_only")->check(CLI::IsMember({"hybrid", "cce_only"}));
    app->add_option("--margin", margin, "Polytuplet margin m");
    app->add_option("--dropout", dropout, "Dropout rate in [0, 1)");
    app->add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
    app->add_option("--batch-size", batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
    app->add_option("--lr", lr, "Learning rate");
    app->add_option("--optimizer", optimizer, "adam | sgd")->check(CLI::IsMember({"adam", "sgd"}));
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--w-hard", w_hard, "Weight on hard-negative terms");
    app->add_option("--w-semi", w_semi, "Weight on semi-hard-negative terms");
    app->add_option("--lambda-poly", lambda_poly, "Hybrid weight on polytuplet loss");
    app->add_option("--lambda-cce", lambda_cce, "Hybrid weight on cross-entropy loss");
    app->add_option("--temperature", temperature, "Distance-to-logit temperature");
    app->add_option("--vocab-dim", vocab_dim, "Hashed feature dimension");
    app->add_option("--ngram", ngram, "1 or 2")->check(CLI::IsMember({1, 2}));
    app->add_option("--hidden", hidden, "Hidden width");
    app->add_option("--embed-dim", embed_dim, "Embedding dimension");
  }

  TrainConfig resolve() const {
    TrainConfig cfg;
    if (config_file) apply_config_json(read_json_file(*config_file), cfg);
    if (mode) cfg.mode = *parse_train_mode(*mode);
    if (margin) cfg.loss.margin = *margin;
    if (dropout) cfg.model.dropout_rate = *dropout;
    if (epochs) cfg.epochs = *epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    if (lr) cfg.learning_rate = *lr;
    if (optimizer) cfg.optimizer = *parse_optimizer(*optimizer);
    if (seed) cfg.seed = *seed;
    if (w_hard) cfg.loss.w_hard = *w_hard;
    if (w_semi) cfg.loss.w_semi = *w_semi;
    if (lambda_poly) cfg.loss.lambda_poly = *lambda_poly;
    if (lambda_cce) cfg.loss.lambda_cce = *lambda_cce;
    if (temperature) cfg.loss.temperature = *temperature;
    if (vocab_dim) cfg.model.vocab_dim = *vocab_dim;
    if (ngram) cfg.model.n_gram = *ngram;
    if (hidden) cfg.model.hidden = *hidden;
    if (embed_dim) cfg.model.embed_dim = *embed_dim;
    cfg.validate();
    return cfg;
  }
};

struct DataFlags {
  std::string train_path;
  std::string test_path;
  std::size_t answers = 4;

  void attach(CLI::App* app) {
    app->add_option("--train", train_path, "Training set (JSON)")->required();
    app->add_option("--test", test_path, "Test set (JSON)")->required();
    app->add_option("--answers", answers, "Answers per record")->check(CLI::Range(2, 1 << 20));
  }
};

int cmd_gen_data(const std::string& out, std::size_t n, const std::string& difficulty,
                 std::uint64_t seed, std::size_t vocab, std::size_t answers) {
  const auto data = generate_synthetic(n, vocab, answers, *parse_difficulty(difficulty), seed);
  save_reclor_json(out, data);
  std::cout << json{{"out", out}, {"n", data.size()}, {"difficulty", difficulty}, {"seed", seed}}.dump()
            << "\n";
  return kExitOk;
}

int cmd_split(const std::string& data_path, double fraction, std::uint64_t seed,
              const std::string& train_out, const std::string& test_out, std::size_t answers) {
  const auto corpus = load_reclor_json(data_path, answers);
  const auto split = split_dataset(corpus, fraction, seed);
  save_reclor_json(train_out, split.train);
  save_reclor_json(test_out, split.test);
  std::cout << json{{"train", split.train.size()}, {"test", split.test.size()}, {"seed", seed}}.dump()
            << "\n";
  return kExitOk;
}

int cmd_train(const DataFlags& data, const TrainFlags& flags, const std::string& checkpoint,
              const std::string& report_path, const std::string& summary_path) {
  const TrainConfig cfg = flags.resolve();
  const auto train_set = load_reclor_json(data.train_path, data.answers);
  const auto test_set = load_reclor_json(data.test_path, data.answers);
  const auto result = train(train_set, test_set, cfg);

  if (!checkpoint.empty()) save_checkpoint(checkpoint, result.params);
  if (!report_path.empty()) write_text(report_path, report_to_jsonl(result.report));
  const json summary = summary_to_json(result.report, cfg);
  if (!summary_path.empty()) write_text(summary_path, summary.dump(2) + "\n");

  json printed = summary;
  printed["wall_clock_seconds"] = result.report.wall_clock_seconds;
  std::cout << printed.dump() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& data_path, const std::string& checkpoint,
             const std::string& oracle, std::optional<std::size_t> vocab_dim, std::size_t answers,
             const std::string& predictions_path) {
  const auto dataset = load_reclor_json(data_path, answers);
  std::vector<std::size_t> predicted;
  std::vector<std::vector<double>> scores;
  if (!oracle.empty()) {
    for (const auto& instance : dataset) predicted.push_back(token_overlap_predict(instance));
  } else {
    const auto params = load_checkpoint(checkpoint);
    if (vocab_dim && *vocab_dim != params.config.vocab_dim) {
      throw ValidationError("checkpoint vocab_dim " + std::to_string(params.config.vocab_dim) +
                            " does not match data vocab_dim " + std::to_string(*vocab_dim));
    }
    for (auto& p : predict_all(dataset, params)) {
      predicted.push_back(p.index);
      scores.push_back(std::move(p.distances));
    }
  }

  std::string lines;
  std::size_t correct = 0;
  bool labeled = true;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    json line = {{"id", dataset[i].id}, {"prediction", predicted[i]}};
    if (!scores.empty()) line["distances"] = scores[i];
    if (dataset[i].label) {
      line["label"] = *dataset[i].label;
      correct += predicted[i] == *dataset[i].label ? 1 : 0;
    } else {
      labeled = false;
    }
    lines += line.dump() + "\n";
  }
  json summary = {{"n", dataset.size()}};
  summary["accuracy"] = labeled && !dataset.empty()
                            ? json(static_cast<double>(correct) / static_cast<double>(dataset.size()))
                            : json(nullptr);
  if (predictions_path.empty()) {
    std::cout << lines;
  } else {
    write_text(predictions_path, lines);
  }
  std::cout << summary.dump() << "\n";
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t trials, double tolerance) {
  GradcheckOptions options;
  options.seed = seed;
  options.trials = trials;
  options.tolerance = tolerance;
  bool all_passed = true;
  for (const auto& c : run_gradcheck(options)) {
    std::printf("%-18s %s  max_rel_error=%.3e  trials=%zu  skipped=%zu\n", c.name.c_str(),
                c.passed ? "PASS" : "FAIL", c.max_rel_error, c.trials, c.skipped);
    all_passed = all_passed && c.passed;
  }
  return all_passed ? kExitOk : kExitCheckFailed;
}

SearchSpace default_space() {
  SearchSpace space;
  space.ranges = {
      {HyperParam::margin, {0.25, 2.0, false, {}}},
      {HyperParam::dropout_rate, {0.0, 0.4, false, {}}},
      {HyperParam::learning_rate, {1e-4, 1e-2, true, {}}},
  };
  return space;
}

SearchSpace load_space(const std::string& path) {
  const json root = read_json_file(path);
  if (!root.is_object()) throw ConfigError("search space must be a JSON object");
  SearchSpace space;
  for (const auto& [key, spec] : root.items()) {
    const auto param = parse_hyper_param(key);
    if (!param) throw ConfigError("unknown search-space key '" + key + "'");
    ParamRange range;
    if (spec.contains("choices")) {
      range.choices = spec["choices"].get<std::vector<double>>();
      if (range.choices.empty()) throw ConfigError("empty choices for '" + key + "'");
    } else {
      if (!spec.contains("lo") || !spec.contains("hi")) {
        throw ConfigError("range for '" + key + "' needs lo/hi or choices");
      }
      range.lo = spec["lo"].get<double>();
      range.hi = spec["hi"].get<double>();
      range.log_scale = spec.value("log", false);
    }
    space.ranges.emplace_back(*param, range);
  }
  return space;
}

int cmd_tune(const DataFlags& data, const TrainFlags& flags, const TuneOptions& options,
             const std::string& space_path, const std::string& best_out,
             const std::string& leaderboard_out) {
  const TrainConfig base = flags.resolve();
  const SearchSpace space = space_path.empty() ? default_space() : load_space(space_path);
  const auto train_set = load_reclor_json(data.train_path, data.answers);
  const auto test_set = load_reclor_json(data.test_path, data.answers);
  const auto result = tune(train_set, test_set, base, space, options);

  std::string board;
  for (const auto& e : result.leaderboard) {
    board += json{{"rung", e.rung},
                  {"trial", e.trial},
                  {"epochs", e.epochs},
                  {"test_accuracy", e.test_accuracy},
                  {"diverged", e.diverged},
                  {"config", config_to_json(e.config)}}
                 .dump() +
             "\n";
  }
  const json best = {{"trial", result.best_trial}, {"config", config_to_json(result.best)}};
  if (!leaderboard_out.empty()) write_text(leaderboard_out, board);
  if (!best_out.empty()) write_text(best_out, best["config"].dump(2) + "\n");
  if (leaderboard_out.empty()) std::cout << board;
  std::cout << best.dump() << "\n";
  return kExitOk;
}

int cmd_compare(const DataFlags& data, const TrainFlags& flags, const std::string& out_path) {
  const TrainConfig cfg = flags.resolve();
  const auto train_set = load_reclor_json(data.train_path, data.answers);
  const auto test_set = load_reclor_json(data.test_path, data.answers);
  const auto cmp = compare_modes(train_set, test_set, cfg);

  std::printf("%-16s %10s\n", "", "accuracy");
  std::printf("%-16s %10.4f\n", "Acc. (CCE)", cmp.cce_only.best_test_accuracy);
  std::printf("%-16s %10.4f\n", "Acc. (CCE + P)", cmp.hybrid.best_test_accuracy);
  std::printf("%-16s %+10.2f\n", "% Improvement", cmp.relative_improvement);
  const json table = {{"cce_only", summary_to_json(cmp.cce_only, cfg)},
                      {"hybrid", summary_to_json(cmp.hybrid, cfg)},
                      {"accuracy_delta", cmp.accuracy_delta},
                      {"relative_improvement_percent", cmp.relative_improvement}};
  if (!out_path.empty()) write_text(out_path, table.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polytuplet-loss metric learning for multiple-choice QA"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic MCQA dataset");
  std::string gen_out;
  std::size_t gen_n = 1000;
  std::string gen_difficulty = "separable";
  std::uint64_t gen_seed = 0;
  std::size_t gen_vocab = 32;
  std::size_t gen_answers = 4;
  gen->add_option("--out", gen_out, "Output JSON path")->required();
  gen->add_option("--n", gen_n, "Number of instances")->check(CLI::PositiveNumber);
  gen->add_option("--difficulty", gen_difficulty, "separable | noisy")
      ->check(CLI::IsMember({"separable", "noisy"}));
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--vocab", gen_vocab, "Synthetic vocabulary size")->check(CLI::Range(8, 1 << 24));
  gen->add_option("--answers", gen_answers, "Answers per instance")->check(CLI::Range(2, 1 << 20));

  // split
  auto* split = app.add_subcommand("split", "Stratified train/test split of a dataset");
  std::string split_data, split_train, split_test;
  double split_fraction = 0.1;
  std::uint64_t split_seed = 0;
  std::size_t split_answers = 4;
  split->add_option("--data", split_data, "Input JSON")->required();
  split->add_option("--test-fraction", split_fraction, "Test fraction in (0, 1)");
  split->add_option("--seed", split_seed, "Random seed");
  split->add_option("--train-out", split_train, "Train output JSON")->required();
  split->add_option("--test-out", split_test, "Test output JSON")->required();
  split->add_option("--answers", split_answers, "Answers per record")->check(CLI::Range(2, 1 << 20));

  // train
  auto* train_cmd = app.add_subcommand("train", "Train an encoder");
  DataFlags train_data;
  TrainFlags train_flags;
  std::string train_ckpt, train_report, train_summary;
  train_data.attach(train_cmd);
  train_flags.attach(train_cmd);
  train_cmd->add_option("--out", train_ckpt, "Checkpoint output path");
  train_cmd->add_option("--report", train_report, "Per-epoch report (JSON lines)");
  train_cmd->add_option("--summary", train_summary, "Final summary (JSON)");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint or the token-overlap oracle");
  std::string eval_data, eval_ckpt, eval_oracle, eval_predictions;
  std::optional<std::size_t> eval_vocab;
  std::size_t eval_answers = 4;
  eval->add_option("--data", eval_data, "Dataset JSON")->required();
  auto* ckpt_opt = eval->add_option("--checkpoint", eval_ckpt, "Checkpoint path");
  auto* oracle_opt = eval->add_option("--oracle", eval_oracle, "Baseline predictor instead of a checkpoint")
                         ->check(CLI::IsMember({"token-overlap"}));
  ckpt_opt->excludes(oracle_opt);
  eval->add_option("--vocab-dim", eval_vocab, "Expected checkpoint vocab_dim");
  eval->add_option("--answers", eval_answers, "Answers per record")->check(CLI::Range(2, 1 << 20));
  eval->add_option("--predictions", eval_predictions, "Write per-instance JSON lines here");

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  std::uint64_t grad_seed = 0;
  std::size_t grad_trials = 100;
  double grad_tol = 1e-4;
  grad->add_option("--seed", grad_seed, "Random seed");
  grad->add_option("--trials", grad_trials, "Trials per component")->check(CLI::PositiveNumber);
  grad->add_option("--tolerance", grad_tol, "Maximum relative error")->check(CLI::PositiveNumber);

  // tune
  auto* tune_cmd = app.add_subcommand("tune", "Successive-halving hyperparameter search");
  DataFlags tune_data;
  TrainFlags tune_flags;
  TuneOptions tune_options;
  std::string tune_space, tune_best, tune_board;
  tune_data.attach(tune_cmd);
  tune_flags.attach(tune_cmd);
  tune_cmd->add_option("--budget", tune_options.budget, "Epochs for the final survivor")
      ->check(CLI::PositiveNumber);
  tune_cmd->add_option("--eta", tune_options.eta, "Halving rate (> 1)");
  tune_cmd->add_option("--configs", tune_options.n_configs, "Number of sampled configs (k)")
      ->check(CLI::PositiveNumber);
  tune_cmd->add_option("--tune-seed", tune_options.seed, "Search seed");
  tune_cmd->add_option("--space", tune_space, "Search space JSON");
  tune_cmd->add_option("--best-out", tune_best, "Best config JSON");
  tune_cmd->add_option("--leaderboard", tune_board, "Leaderboard JSON lines");

  // compare
  auto* cmp = app.add_subcommand("compare", "Train CCE-only and hybrid on the same data and seed");
  DataFlags cmp_data;
  TrainFlags cmp_flags;
  std::string cmp_out;
  cmp_data.attach(cmp);
  cmp_flags.attach(cmp);
  cmp->add_option("--out", cmp_out, "Comparison JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(gen_out, gen_n, gen_difficulty, gen_seed, gen_vocab, gen_answers);
    if (*split) {
      return cmd_split(split_data, split_fraction, split_seed, split_train, split_test,
                       split_answers);
    }
    if (*train_cmd) {
      return cmd_train(train_data, train_flags, train_ckpt, train_report, train_summary);
    }
    if (*eval) {
      if (eval_ckpt.empty() && eval_oracle.empty()) {
        std::cerr << "eval: one of --checkpoint or --oracle is required\n";
        return kExitUsage;
      }
      return cmd_eval(eval_data, eval_ckpt, eval_oracle, eval_vocab, eval_answers,
                      eval_predictions);
    }
    if (*grad) return cmd_gradcheck(grad_seed, grad_trials, grad_tol);
    if (*tune_cmd) {
      if (tune_flags.seed) tune_options.seed = *tune_flags.seed;
      return cmd_tune(tune_data, tune_flags, tune_options, tune_space, tune_best, tune_board);
    }
    if (*cmp) return cmd_compare(cmp_data, cmp_flags, cmp_out);
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
