#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace polytuplet {

// One multiple-choice sample: a passage, a question, N ordered answers and
// (for labeled data) the index of the correct answer.
struct McqaInstance {
  std::string id;
  std::string context;
  std::string question;
  std::vector<std::string> answers;
  std::optional<std::size_t> label;

  std::size_t n_answers() const noexcept { return answers.size(); }
  bool operator==(const McqaInstance&) const = default;
};

struct DatasetSplit {
  std::vector<McqaInstance> train;
  std::vector<McqaInstance> test;
  std::uint64_t seed = 0;
};

enum class Difficulty { separable, noisy };

// Throws ValidationError naming the instance id. expected_answers == 0 accepts any N >= 2.
void validate_instance(const McqaInstance& instance, std::size_t expected_answers = 0);

// Reads a JSON array of ReClor-style records (`context`, `question`,
// `answers`, `label`, `id_string`). Throws ParseError (with byte offset) on
// malformed JSON and ValidationError on a bad record.
std::vector<McqaInstance> load_reclor_json(const std::filesystem::path& path,
                                           std::size_t expected_answers = 4);
std::vector<McqaInstance> parse_reclor_json(const std::string& text,
                                            std::size_t expected_answers = 4);

// Serializes with the same schema; unlabeled instances omit `label`.
std::string to_reclor_json(std::span<const McqaInstance> instances);
void save_reclor_json(const std::filesystem::path& path, std::span<const McqaInstance> instances);

// Label-stratified, seeded split. The test set has round(test_fraction * n)
// items, apportioned across labels by largest remainder. Both halves keep the
// corpus order.
DatasetSplit split_dataset(std::span<const McqaInstance> corpus, double test_fraction,
                           std::uint64_t seed);

// Synthetic MCQA with planted lexical overlap between the context and the
// correct answer. In `separable` mode distractors share no token with the
// context; in `noisy` mode every distractor shares exactly one planted token.
std::vector<McqaInstance> generate_synthetic(std::size_t n, std::size_t vocab_size,
                                             std::size_t n_answers, Difficulty difficulty,
                                             std::uint64_t seed);

// Baseline predictor: the answer sharing the most distinct words with the
// context wins, lowest index on ties.
std::size_t token_overlap_predict(const McqaInstance& instance);

std::vector<std::size_t> label_histogram(std::span<const McqaInstance> instances,
                                         std::size_t n_answers);

std::optional<Difficulty> parse_difficulty(std::string_view name);

}  // namespace polytuplet
