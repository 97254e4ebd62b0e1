#include "doctest.h"
#include "polytuplet/error.hpp"
#include "polytuplet/mining.hpp"
#include "support.hpp"

using namespace polytuplet;
using namespace testing_support;

namespace {

EmbeddingBatch two_d_batch(std::vector<std::vector<double>> results, std::vector<double> context,
                           std::size_t label) {
  EmbeddingBatch batch;
  batch.n_answers = results.size();
  batch.context = Matrix(1, 2);
  batch.context(0, 0) = context[0];
  batch.context(0, 1) = context[1];
  batch.results = Matrix(results.size(), 2);
  for (std::size_t j = 0; j < results.size(); ++j) {
    batch.results(j, 0) = results[j][0];
    batch.results(j, 1) = results[j][1];
  }
  batch.labels = {label};
  return batch;
}

NegativeCategory from_naive(int c) {
  return c == 0 ? NegativeCategory::hard
                : c == 1 ? NegativeCategory::semi_hard : NegativeCategory::easy;
}

}  // namespace

TEST_CASE("classify_negatives examples") {
  const auto semi = classify_negatives(two_d_batch({{0.6, 0.8}, {0, 1}}, {1, 0}, 0), 1.5);
  CHECK(semi.at(0, 0) == NegativeCategory::positive);
  CHECK(semi.at(0, 1) == NegativeCategory::semi_hard);

  const auto tie = classify_negatives(two_d_batch({{0, 1}, {0, 1}}, {1, 0}, 0), 1.0);
  CHECK(tie.at(0, 1) == NegativeCategory::hard);

  const auto easy = classify_negatives(two_d_batch({{1, 0}, {-1, 0}}, {1, 0}, 0), 1.0);
  CHECK(easy.at(0, 1) == NegativeCategory::easy);
}

TEST_CASE("classify_gap boundaries") {
  CHECK(classify_gap(0.0, 1.0) == NegativeCategory::hard);
  CHECK(classify_gap(-1e-15, 1.0) == NegativeCategory::semi_hard);
  CHECK(classify_gap(-1.0, 1.0) == NegativeCategory::semi_hard);
  CHECK(classify_gap(-1.0 - 1e-12, 1.0) == NegativeCategory::easy);
}

TEST_CASE("classify_negatives agrees with the naive loop and counts sum to B(N-1)") {
  Rng rng(21);
  for (int t = 0; t < 200; ++t) {
    const std::size_t b = 1 + rng.below(16), n = 2 + rng.below(4);
    const auto batch = random_batch(rng, b, n, 1 + rng.below(8));
    const double m = rng.uniform(0.0, 2.0);
    const auto report = classify_negatives(batch, m);
    CHECK(report.counts.total() == b * (n - 1));
    for (std::size_t i = 0; i < b; ++i) {
      const double dp = naive_sq_distance(batch.context.row(i), batch.result(i, batch.labels[i]));
      for (std::size_t j = 0; j < n; ++j) {
        if (j == batch.labels[i]) {
          CHECK(report.at(i, j) == NegativeCategory::positive);
          continue;
        }
        const double dn = naive_sq_distance(batch.context.row(i), batch.result(i, j));
        CHECK(report.at(i, j) == from_naive(naive_category(dp, dn, m)));
      }
    }
  }
}

TEST_CASE("mining category is invariant under a joint rotation") {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    auto batch = random_batch(rng, 4, 4, 2);
    const auto before = classify_negatives(batch, 0.7);
    const double theta = rng.uniform(0.0, 6.283185307179586);
    const double c = std::cos(theta), s = std::sin(theta);
    auto rotate = [&](Matrix& m) {
      for (std::size_t r = 0; r < m.rows(); ++r) {
        const double x = m(r, 0), y = m(r, 1);
        m(r, 0) = c * x - s * y;
        m(r, 1) = s * x + c * y;
      }
    };
    rotate(batch.context);
    rotate(batch.results);
    if (kink_distance(batch, 0.7) < 1e-9) continue;
    CHECK(classify_negatives(batch, 0.7).mask == before.mask);
  }
}

TEST_CASE("mining_weights") {
  MiningReport report;
  report.n_answers = 4;
  report.mask = {NegativeCategory::hard, NegativeCategory::semi_hard, NegativeCategory::easy,
                 NegativeCategory::positive};
  const auto w = mining_weights(report, 2.0, 0.5);
  CHECK(w(0, 0) == 2.0);
  CHECK(w(0, 1) == 0.5);
  CHECK(w(0, 2) == 1.0);
  CHECK(w(0, 3) == 0.0);

  Rng rng(2);
  const auto batch = random_batch(rng, 10, 4, 3);
  const auto neutral = mining_weights(classify_negatives(batch, 1.0), 1.0, 1.0);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(neutral(i, j) == (j == batch.labels[i] ? 0.0 : 1.0));
  }
}

TEST_CASE("classify_negatives rejects invalid batches") {
  Rng rng(1);
  auto batch = random_batch(rng, 2, 3, 2);
  batch.labels.clear();
  CHECK_THROWS_AS(classify_negatives(batch, 1.0), ShapeError);
}
