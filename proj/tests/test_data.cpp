#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "polytuplet/data.hpp"
#include "polytuplet/error.hpp"
#include "polytuplet/text.hpp"

using namespace polytuplet;

namespace {

std::vector<McqaInstance> labeled_corpus(std::size_t per_label, std::size_t n_labels) {
  std::vector<McqaInstance> out;
  for (std::size_t y = 0; y < n_labels; ++y) {
    for (std::size_t k = 0; k < per_label; ++k) {
      McqaInstance inst;
      inst.id = "r" + std::to_string(y) + "-" + std::to_string(k);
      inst.context = "ctx";
      inst.question = "q";
      inst.answers = {"a", "b", "c", "d"};
      inst.label = y;
      out.push_back(inst);
    }
  }
  return out;
}

std::set<std::string> word_set(const std::string& text) {
  const auto words = split_words(text);
  return {words.begin(), words.end()};
}

std::size_t overlap(const std::string& a, const std::string& b) {
  const auto sa = word_set(a);
  std::size_t n = 0;
  for (const auto& w : word_set(b)) n += sa.count(w);
  return n;
}

}  // namespace

TEST_CASE("load_reclor_json keeps file order and answer order") {
  const std::string text = R"([
    {"context": "C1", "question": "Q1", "answers": ["a","b","c","d"], "label": 2, "id_string": "train_0"},
    {"context": "C2", "question": "Q2", "answers": ["e","f","g","h"], "id_string": "test_1"}
  ])";
  const auto data = parse_reclor_json(text);
  REQUIRE(data.size() == 2);
  CHECK(data[0].id == "train_0");
  CHECK(data[0].answers == std::vector<std::string>{"a", "b", "c", "d"});
  CHECK(data[0].label == std::optional<std::size_t>(2));
  CHECK(data[1].id == "test_1");
  CHECK_FALSE(data[1].label.has_value());
}

TEST_CASE("load_reclor_json rejects a record with three answers, naming it") {
  const std::string text = R"([{"context": "C", "question": "Q", "answers": ["a","b","c"], "label": 0, "id_string": "bad_7"}])";
  try {
    parse_reclor_json(text);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("bad_7") != std::string::npos);
  }
}

TEST_CASE("load_reclor_json rejects out-of-range labels and empty text") {
  CHECK_THROWS_AS(parse_reclor_json(R"([{"context":"C","question":"Q","answers":["a","b","c","d"],"label":4,"id_string":"x"}])"),
                  ValidationError);
  CHECK_THROWS_AS(parse_reclor_json(R"([{"context":"C","question":"Q","answers":["a","b","c","d"],"label":-1,"id_string":"x"}])"),
                  ValidationError);
  CHECK_THROWS_AS(parse_reclor_json(R"([{"context":"   ","question":"Q","answers":["a","b","c","d"],"id_string":"x"}])"),
                  ValidationError);
}

TEST_CASE("malformed JSON reports the byte offset") {
  const std::string text = R"([{"context": "C",, }])";
  try {
    parse_reclor_json(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.byte_offset() == 18);
  }
}

TEST_CASE("serialize then reload is field-by-field identical") {
  auto data = generate_synthetic(25, 32, 4, Difficulty::noisy, 11);
  data[3].label.reset();
  data[4].context = "Quotes \" and unicode é survive";
  const auto reloaded = parse_reclor_json(to_reclor_json(data));
  CHECK(reloaded == data);

  const auto path = std::filesystem::temp_directory_path() / "polytuplet_roundtrip.json";
  save_reclor_json(path, data);
  CHECK(load_reclor_json(path) == data);
  std::filesystem::remove(path);
}

TEST_CASE("split_dataset: 100 instances, fraction 0.1") {
  const auto corpus = labeled_corpus(25, 4);
  const auto a = split_dataset(corpus, 0.1, 7);
  const auto b = split_dataset(corpus, 0.1, 7);
  CHECK(a.train.size() == 90);
  CHECK(a.test.size() == 10);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(to_reclor_json(a.test) == to_reclor_json(b.test));

  std::set<std::string> ids;
  for (const auto& x : a.train) ids.insert(x.id);
  for (const auto& x : a.test) CHECK(ids.insert(x.id).second);
  CHECK(ids.size() == corpus.size());
}

TEST_CASE("split_dataset is stratified: 10 per label at 0.2 gives 2 of each") {
  const auto split = split_dataset(labeled_corpus(10, 4), 0.2, 123);
  CHECK(label_histogram(split.test, 4) == std::vector<std::size_t>{2, 2, 2, 2});
  CHECK(label_histogram(split.train, 4) == std::vector<std::size_t>{8, 8, 8, 8});
}

TEST_CASE("split_dataset reproduces the 4638 / 500 proportions") {
  // Same label counts as the full ReClor train+val corpus.
  std::vector<McqaInstance> corpus;
  const std::size_t counts[] = {1299, 1288, 1283, 1268};
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t k = 0; k < counts[y]; ++k) {
      corpus.push_back({"id" + std::to_string(corpus.size()), "c", "q", {"a", "b", "c", "d"}, y});
    }
  }
  REQUIRE(corpus.size() == 5138);
  const auto split = split_dataset(corpus, 500.0 / 5138.0, 1);
  CHECK(split.train.size() == 4638);
  CHECK(split.test.size() == 500);
  const auto hist = label_histogram(split.test, 4);
  for (std::size_t y = 0; y < 4; ++y) {
    const double expected = 500.0 * static_cast<double>(counts[y]) / 5138.0;
    CHECK(std::abs(static_cast<double>(hist[y]) - expected) < 1.0);
  }
}

TEST_CASE("split_dataset errors") {
  CHECK_THROWS_AS(split_dataset({}, 0.1, 0), ValidationError);
  const auto corpus = labeled_corpus(1, 4);
  CHECK_THROWS_AS(split_dataset(corpus, 0.1, 0), ConfigError);  // 0.4 < 1
  CHECK_THROWS_AS(split_dataset(corpus, 1.0, 0), ConfigError);
}

TEST_CASE("generate_synthetic: single separable instance") {
  const auto data = generate_synthetic(1, 32, 4, Difficulty::separable, 5);
  REQUIRE(data.size() == 1);
  const auto& inst = data[0];
  REQUIRE(inst.label.has_value());
  for (std::size_t j = 0; j < inst.answers.size(); ++j) {
    if (j == *inst.label) {
      CHECK(overlap(inst.context, inst.answers[j]) > 0);
    } else {
      CHECK(overlap(inst.context, inst.answers[j]) == 0);
    }
  }
}

TEST_CASE("generate_synthetic: label histogram near uniform") {
  const auto data = generate_synthetic(1000, 32, 4, Difficulty::separable, 3);
  for (const auto c : label_histogram(data, 4)) {
    CHECK(c >= 238);  // 250 +- 5%
    CHECK(c <= 262);
  }
}

TEST_CASE("generate_synthetic: noisy distractors share context tokens") {
  const auto data = generate_synthetic(100, 32, 4, Difficulty::noisy, 9);
  for (const auto& inst : data) {
    bool shared = false;
    for (std::size_t j = 0; j < inst.answers.size(); ++j) {
      if (j != *inst.label && overlap(inst.context, inst.answers[j]) >= 1) shared = true;
    }
    CHECK(shared);
  }
}

TEST_CASE("separable data admits a perfect token-overlap classifier") {
  for (const std::size_t vocab : {8, 32, 200}) {
    const auto data = generate_synthetic(300, vocab, 4, Difficulty::separable, vocab);
    for (const auto& inst : data) {
      // Brute force: argmax of distinct shared words.
      std::size_t best = 0, best_overlap = 0;
      for (std::size_t j = 0; j < inst.answers.size(); ++j) {
        const auto o = overlap(inst.context, inst.answers[j]);
        if (o > best_overlap) best = j, best_overlap = o;
      }
      CHECK(best == *inst.label);
      CHECK(token_overlap_predict(inst) == *inst.label);
    }
  }
}

TEST_CASE("generate_synthetic is deterministic and validates inputs") {
  CHECK(generate_synthetic(50, 16, 3, Difficulty::noisy, 4) ==
        generate_synthetic(50, 16, 3, Difficulty::noisy, 4));
  CHECK(generate_synthetic(50, 16, 3, Difficulty::noisy, 4) !=
        generate_synthetic(50, 16, 3, Difficulty::noisy, 5));
  CHECK_THROWS_AS(generate_synthetic(0, 32, 4, Difficulty::separable, 0), ConfigError);
  CHECK_THROWS_AS(generate_synthetic(1, 7, 4, Difficulty::separable, 0), ConfigError);
  CHECK_THROWS_AS(generate_synthetic(1, 32, 1, Difficulty::separable, 0), ConfigError);
}
