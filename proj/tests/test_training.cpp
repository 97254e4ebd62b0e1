#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "polytuplet/error.hpp"
#include "polytuplet/optimizer.hpp"
#include "polytuplet/report_io.hpp"
#include "polytuplet/training.hpp"
#include "polytuplet/tuner.hpp"

using namespace polytuplet;

namespace {

TrainConfig fast_config() {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.learning_rate = 5e-3;
  cfg.seed = 4;
  cfg.model.vocab_dim = 128;
  cfg.model.hidden = 16;
  cfg.model.embed_dim = 8;
  return cfg;
}

struct Corpus {
  std::vector<McqaInstance> train = generate_synthetic(160, 32, 4, Difficulty::separable, 1);
  std::vector<McqaInstance> test = generate_synthetic(80, 32, 4, Difficulty::separable, 2);
};

}  // namespace

TEST_CASE("sgd_step examples") {
  std::vector<double> p{1.0};
  sgd_step(p, std::vector<double>{1.0}, 0.1);
  CHECK(p[0] == doctest::Approx(0.9));
  sgd_step(p, std::vector<double>{0.0}, 0.1);
  CHECK(p[0] == doctest::Approx(0.9));
}

TEST_CASE("adam first step has magnitude lr") {
  for (const double g : {1e-3, 0.5, -7.0}) {
    std::vector<double> p{2.0}, m{0.0}, v{0.0};
    adam_step(p, std::vector<double>{g}, m, v, 1, 1e-3, {});
    // m_hat = g, v_hat = g^2  =>  update = lr * g / (|g| + eps).
    const double expected = 2.0 - 1e-3 * g / (std::abs(g) + 1e-8);
    CHECK(p[0] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(std::abs(2.0 - p[0]) == doctest::Approx(1e-3).epsilon(1e-4));
  }
}

TEST_CASE("adam_update tracks the step count across tensors") {
  std::vector<double> a{1.0, 2.0}, b{3.0};
  std::vector<std::span<double>> params{a, b};
  auto state = make_adam_state(params);
  const std::vector<double> ga{1.0, -1.0}, gb{0.5};
  std::vector<std::span<const double>> grads{ga, gb};
  adam_update(params, grads, state, 0.01, {});
  adam_update(params, grads, state, 0.01, {});
  CHECK(state.step == 2);
  CHECK(a[0] == doctest::Approx(0.98).epsilon(1e-6));
  CHECK(a[1] == doctest::Approx(2.02).epsilon(1e-6));
  CHECK(b[0] == doctest::Approx(2.98).epsilon(1e-6));
}

TEST_CASE("argmin_distance") {
  CHECK(argmin_distance(std::vector<double>{0.1, 2.0, 3.0, 3.5}) == 0);
  CHECK(argmin_distance(std::vector<double>{3.0, 1.0, 1.0, 2.0}) == 1);
}

TEST_CASE("evaluate: random params are at chance; errors on bad input") {
  ModelConfig model;
  model.vocab_dim = 256;
  model.hidden = 32;
  model.embed_dim = 16;
  const auto params = EncoderParams::initialize(model, 3);
  const auto data = generate_synthetic(2000, 32, 4, Difficulty::noisy, 6);
  const double acc = evaluate(data, params);
  CHECK(acc > 0.20);
  CHECK(acc < 0.30);

  CHECK_THROWS_AS(evaluate(std::vector<McqaInstance>{}, params), ValidationError);
  auto unlabeled = data;
  unlabeled[5].label.reset();
  CHECK_THROWS_AS(evaluate(unlabeled, params), ValidationError);
}

TEST_CASE("predict maps through an answer permutation") {
  ModelConfig model;
  model.vocab_dim = 128;
  model.hidden = 16;
  model.embed_dim = 8;
  const auto params = EncoderParams::initialize(model, 9);
  const auto data = generate_synthetic(20, 32, 4, Difficulty::noisy, 1);
  for (const auto& inst : data) {
    const auto base = predict(inst, params);
    auto permuted = inst;
    std::rotate(permuted.answers.begin(), permuted.answers.begin() + 1, permuted.answers.end());
    const auto moved = predict(permuted, params);
    CHECK(moved.index == (base.index + 3) % 4);
    CHECK(predict_all(std::vector<McqaInstance>{inst}, params)[0].distances == base.distances);
  }
}

TEST_CASE("train: learning rate zero leaves the initialization untouched") {
  Corpus c;
  auto cfg = fast_config();
  cfg.learning_rate = 0.0;
  cfg.epochs = 2;
  const auto result = train(c.train, c.test, cfg);
  CHECK(result.params == EncoderParams::initialize(cfg.model, derive_seed(cfg.seed, 1)));
  CHECK(result.report.epochs.size() == 2);
  CHECK(result.report.epochs[0].loss > 0.0);
}

TEST_CASE("train is deterministic and improves on separable data") {
  Corpus c;
  auto cfg = fast_config();
  cfg.epochs = 6;
  const auto a = train(c.train, c.test, cfg);
  const auto b = train(c.train, c.test, cfg);
  CHECK(a.params == b.params);
  CHECK(report_to_jsonl(a.report) == report_to_jsonl(b.report));
  CHECK(summary_to_json(a.report, cfg).dump() == summary_to_json(b.report, cfg).dump());
  CHECK(a.report.epochs.back().loss < a.report.epochs.front().loss);
  CHECK(a.report.best_test_accuracy > 0.5);
  const auto& mining = a.report.epochs.front().mining;
  CHECK(mining.total() == c.train.size() * 3);
}

TEST_CASE("cce_only mode carries no polytuplet signal") {
  Corpus c;
  auto cfg = fast_config();
  cfg.mode = TrainMode::cce_only;
  cfg.loss.lambda_poly = 5.0;
  CHECK(cfg.effective_loss().lambda_poly == 0.0);
  const auto result = train(c.train, c.test, cfg);
  for (const auto& e : result.report.epochs) {
    CHECK(e.polytuplet_loss == 0.0);
    CHECK(e.loss == doctest::Approx(e.cce_loss));
  }
}

TEST_CASE("train reports divergence with the step and learning rate") {
  Corpus c;
  auto cfg = fast_config();
  cfg.optimizer = OptimizerKind::sgd;
  cfg.learning_rate = 1e308;
  cfg.epochs = 5;
  try {
    train(c.train, c.test, cfg);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    const std::string what = e.what();
    CHECK(what.find("step") != std::string::npos);
    CHECK(what.find("learning rate") != std::string::npos);
  }
}

TEST_CASE("train rejects invalid configs and mismatched data") {
  Corpus c;
  auto cfg = fast_config();
  cfg.epochs = 0;
  CHECK_THROWS_AS(train(c.train, c.test, cfg), ConfigError);
  const auto three = generate_synthetic(10, 32, 3, Difficulty::separable, 1);
  CHECK_THROWS_AS(train(c.train, three, fast_config()), ValidationError);
}

TEST_CASE("compare_modes trains both modes on the same data") {
  Corpus c;
  const auto cmp = compare_modes(c.train, c.test, fast_config());
  CHECK(cmp.cce_only.mode == TrainMode::cce_only);
  CHECK(cmp.hybrid.mode == TrainMode::hybrid);
  CHECK(cmp.accuracy_delta ==
        doctest::Approx(cmp.hybrid.best_test_accuracy - cmp.cce_only.best_test_accuracy));
}

TEST_CASE("rung arithmetic") {
  CHECK(rung_sizes(9, 3) == std::vector<std::size_t>{9, 3, 1});
  CHECK(rung_sizes(1, 3) == std::vector<std::size_t>{1});
  CHECK(rung_sizes(10, 2) == std::vector<std::size_t>{10, 5, 3, 2, 1});
  CHECK(rung_epochs(9, 9, 3) == std::vector<std::size_t>{1, 3, 9});
  CHECK(rung_epochs(1, 5, 3) == std::vector<std::size_t>{5});
  CHECK_THROWS_AS(rung_epochs(9, 2, 3), ConfigError);
  CHECK_THROWS_AS(rung_epochs(27, 3, 3), ConfigError);
  CHECK_THROWS_AS(rung_sizes(9, 1.0), ConfigError);
}

TEST_CASE("tune: single config gets the full budget") {
  Corpus c;
  SearchSpace space;
  space.ranges.push_back({HyperParam::margin, {0.5, 1.5}});
  TuneOptions opts;
  opts.n_configs = 1;
  opts.budget = 3;
  const auto result = tune(c.train, c.test, fast_config(), space, opts);
  REQUIRE(result.leaderboard.size() == 1);
  CHECK(result.leaderboard[0].epochs == 3);
  CHECK(result.best.epochs == 3);
  CHECK(result.best_trial == 0);
}

TEST_CASE("tune: zero learning rate loses to a working one") {
  Corpus c;
  SearchSpace space;
  ParamRange lr;
  lr.choices = {0.0, 1e-2};
  space.ranges.push_back({HyperParam::learning_rate, lr});
  TuneOptions opts;
  opts.n_configs = 4;
  opts.budget = 4;
  opts.eta = 2;
  opts.seed = 3;
  const auto result = tune(c.train, c.test, fast_config(), space, opts);
  CHECK(result.best.learning_rate == 1e-2);
}

TEST_CASE("search space sampling stays inside the ranges") {
  SearchSpace space;
  space.ranges.push_back({HyperParam::learning_rate, {1e-4, 1e-1, true}});
  space.ranges.push_back({HyperParam::dropout_rate, {0.0, 0.5}});
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto cfg = space.sample(TrainConfig{}, rng);
    CHECK(cfg.learning_rate >= 1e-4);
    CHECK(cfg.learning_rate <= 1e-1);
    CHECK(cfg.model.dropout_rate >= 0.0);
    CHECK(cfg.model.dropout_rate <= 0.5);
  }
  CHECK(parse_hyper_param("lr") == HyperParam::learning_rate);
  CHECK_FALSE(parse_hyper_param("momentum").has_value());
}

TEST_CASE("config JSON round trip and strictness") {
  auto cfg = fast_config();
  cfg.mode = TrainMode::cce_only;
  cfg.optimizer = OptimizerKind::sgd;
  cfg.loss.temperature = 0.25;
  cfg.model.n_gram = 2;
  TrainConfig back;
  apply_config_json(config_to_json(cfg), back);
  CHECK(back == cfg);

  CHECK_THROWS_AS(apply_config_json({{"bogus", 1}}, back), ConfigError);
  CHECK_THROWS_AS(apply_config_json({{"epochs", "ten"}}, back), ConfigError);
  CHECK_THROWS_AS(apply_config_json({{"mode", "triplet"}}, back), ConfigError);
}

TEST_CASE("report JSON has one line per epoch and no timing") {
  TrainReport report;
  report.wall_clock_seconds = 12.5;
  report.epochs.resize(3);
  for (std::size_t i = 0; i < 3; ++i) report.epochs[i].epoch = i + 1;
  const auto text = report_to_jsonl(report);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  const auto summary = summary_to_json(report, TrainConfig{});
  CHECK_FALSE(summary.dump().find("wall") != std::string::npos);
  CHECK(summary.at("mode") == "hybrid");
}
