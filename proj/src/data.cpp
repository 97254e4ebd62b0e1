#include "polytuplet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "polytuplet/error.hpp"
#include "polytuplet/rng.hpp"
#include "polytuplet/text.hpp"

namespace polytuplet {

using nlohmann::json;

void validate_instance(const McqaInstance& instance, std::size_t expected_answers) {
  const auto fail = [&](const std::string& why) {
    throw ValidationError("record '" + instance.id + "': " + why);
  };
  if (instance.answers.size() < 2) {
    fail("needs at least 2 answers, got " + std::to_string(instance.answers.size()));
  }
  if (expected_answers != 0 && instance.answers.size() != expected_answers) {
    fail("expected " + std::to_string(expected_answers) + " answers, got " +
         std::to_string(instance.answers.size()));
  }
  if (instance.label && *instance.label >= instance.answers.size()) {
    fail("label " + std::to_string(*instance.label) + " out of range [0, " +
         std::to_string(instance.answers.size()) + ")");
  }
  if (trim(instance.context).empty()) fail("empty context");
  if (trim(instance.question).empty()) fail("empty question");
}

namespace {

McqaInstance instance_from_json(const json& record, std::size_t index) {
  if (!record.is_object()) {
    throw ValidationError("record #" + std::to_string(index) + " is not an object");
  }
  McqaInstance out;
  out.id = record.contains("id_string") && record["id_string"].is_string()
               ? record["id_string"].get<std::string>()
               : "#" + std::to_string(index);

  const auto require_string = [&](const char* key) {
    if (!record.contains(key) || !record[key].is_string()) {
      throw ValidationError("record '" + out.id + "': missing string field '" + key + "'");
    }
    return record[key].get<std::string>();
  };
  out.context = require_string("context");
  out.question = require_string("question");

  if (!record.contains("answers") || !record["answers"].is_array()) {
    throw ValidationError("record '" + out.id + "': missing array field 'answers'");
  }
  for (const auto& answer : record["answers"]) {
    if (!answer.is_string()) {
      throw ValidationError("record '" + out.id + "': non-string answer");
    }
    out.answers.push_back(answer.get<std::string>());
  }

  if (record.contains("label") && !record["label"].is_null()) {
    const auto& label = record["label"];
    if (!label.is_number_integer()) {
      throw ValidationError("record '" + out.id + "': label is not an integer");
    }
    const auto value = label.get<std::int64_t>();
    if (value < 0) {
      throw ValidationError("record '" + out.id + "': label " + std::to_string(value) +
                            " out of range");
    }
    out.label = static_cast<std::size_t>(value);
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

std::vector<McqaInstance> parse_reclor_json(const std::string& text,
                                            std::size_t expected_answers) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what(),
                     e.byte);
  }
  if (!root.is_array()) throw ParseError("top-level JSON value must be an array", 0);

  std::vector<McqaInstance> out;
  out.reserve(root.size());
  for (std::size_t i = 0; i < root.size(); ++i) {
    out.push_back(instance_from_json(root[i], i));
    validate_instance(out.back(), expected_answers);
  }
  return out;
}

std::vector<McqaInstance> load_reclor_json(const std::filesystem::path& path,
                                           std::size_t expected_answers) {
  return parse_reclor_json(read_file(path), expected_answers);
}

std::string to_reclor_json(std::span<const McqaInstance> instances) {
  json root = json::array();
  for (const auto& instance : instances) {
    json record;
    record["context"] = instance.context;
    record["question"] = instance.question;
    record["answers"] = instance.answers;
    if (instance.label) record["label"] = *instance.label;
    record["id_string"] = instance.id;
    root.push_back(std::move(record));
  }
  return root.dump(1) + "\n";
}

void save_reclor_json(const std::filesystem::path& path,
                      std::span<const McqaInstance> instances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << to_reclor_json(instances);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

DatasetSplit split_dataset(std::span<const McqaInstance> corpus, double test_fraction,
                           std::uint64_t seed) {
  if (corpus.empty()) throw ValidationError("cannot split an empty corpus");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in (0, 1)");
  }
  const double n = static_cast<double>(corpus.size());
  if (test_fraction * n < 1.0) {
    throw ConfigError("test_fraction * corpus size must be at least 1");
  }
  const auto test_size = static_cast<std::size_t>(std::llround(test_fraction * n));

  // Unlabeled records form their own stratum, keyed after every real label.
  constexpr std::size_t kUnlabeled = static_cast<std::size_t>(-1);
  std::map<std::size_t, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    strata[corpus[i].label.value_or(kUnlabeled)].push_back(i);
  }

  struct Quota {
    std::size_t key;
    std::size_t count;
    double remainder;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (const auto& [key, members] : strata) {
    const double exact = test_fraction * static_cast<double>(members.size());
    const auto whole = static_cast<std::size_t>(std::floor(exact));
    quotas.push_back({key, whole, exact - static_cast<double>(whole)});
    assigned += whole;
  }
  std::vector<std::size_t> order(quotas.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return quotas[a].remainder > quotas[b].remainder;
  });
  for (std::size_t k = 0; assigned < test_size; k = (k + 1) % order.size()) {
    auto& q = quotas[order[k]];
    if (q.count < strata[q.key].size()) {
      ++q.count;
      ++assigned;
    }
  }

  std::vector<bool> in_test(corpus.size(), false);
  std::size_t stream = 0;
  for (const auto& q : quotas) {
    auto members = strata[q.key];
    Rng rng(derive_seed(seed, stream++));
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t i = 0; i < q.count; ++i) in_test[members[i]] = true;
  }

  DatasetSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    (in_test[i] ? split.test : split.train).push_back(corpus[i]);
  }
  return split;
}

namespace {

std::string synthetic_word(std::size_t index) { return "t" + std::to_string(index); }

// Draws `count` distinct items from `pool` without replacement.
std::vector<std::size_t> draw_distinct(Rng& rng, std::vector<std::size_t> pool,
                                       std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  }
  pool.resize(count);
  return pool;
}

std::string join_words(const std::vector<std::size_t>& tokens) {
  std::string out;
  for (const auto t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += synthetic_word(t);
  }
  return out;
}

}  // namespace

std::vector<McqaInstance> generate_synthetic(std::size_t n, std::size_t vocab_size,
                                             std::size_t n_answers, Difficulty difficulty,
                                             std::uint64_t seed) {
  if (n < 1) throw ConfigError("generate_synthetic: n must be at least 1");
  if (vocab_size < 8) throw ConfigError("generate_synthetic: vocab_size must be at least 8");
  if (n_answers < 2) throw ConfigError("generate_synthetic: n_answers must be at least 2");

  const std::size_t context_len = std::clamp<std::size_t>(vocab_size / 4, 2, 8);
  const std::size_t planted_len = std::max<std::size_t>(1, context_len / 2);
  const std::size_t answer_len = std::clamp<std::size_t>(vocab_size / 8, 2, 4);
  const std::size_t correct_shared = std::min<std::size_t>(2, planted_len);

  std::vector<McqaInstance> out;
  out.reserve(n);
  Rng rng(seed);
  std::vector<std::size_t> vocab(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) vocab[i] = i;

  for (std::size_t s = 0; s < n; ++s) {
    const auto context_tokens = draw_distinct(rng, vocab, context_len);
    // The first planted_len context tokens are the planted keyword set.
    const std::vector<std::size_t> planted(context_tokens.begin(),
                                           context_tokens.begin() + planted_len);
    std::vector<std::size_t> outside;
    for (const auto t : vocab) {
      if (std::find(context_tokens.begin(), context_tokens.end(), t) == context_tokens.end()) {
        outside.push_back(t);
      }
    }

    McqaInstance instance;
    char id[32];
    std::snprintf(id, sizeof id, "syn-%06zu", s);
    instance.id = id;
    auto shuffled_context = context_tokens;
    rng.shuffle(std::span<std::size_t>(shuffled_context));
    instance.context = join_words(shuffled_context) + ".";
    instance.question = "Which option is supported by the passage?";

    const std::size_t label = rng.below(n_answers);
    instance.label = label;
    instance.answers.resize(n_answers);
    for (std::size_t j = 0; j < n_answers; ++j) {
      std::vector<std::size_t> tokens;
      if (j == label) {
        tokens = draw_distinct(rng, planted, correct_shared);
      } else if (difficulty == Difficulty::noisy) {
        tokens = draw_distinct(rng, planted, 1);
      }
      const auto filler = draw_distinct(rng, outside, answer_len - tokens.size());
      tokens.insert(tokens.end(), filler.begin(), filler.end());
      rng.shuffle(std::span<std::size_t>(tokens));
      instance.answers[j] = join_words(tokens);
    }
    out.push_back(std::move(instance));
  }
  return out;
}

std::size_t token_overlap_predict(const McqaInstance& instance) {
  const auto context_words = split_words(instance.context);
  const std::set<std::string> context_set(context_words.begin(), context_words.end());
  std::size_t best = 0;
  std::size_t best_overlap = 0;
  for (std::size_t j = 0; j < instance.answers.size(); ++j) {
    const auto words = split_words(instance.answers[j]);
    const std::set<std::string> answer_set(words.begin(), words.end());
    std::size_t overlap = 0;
    for (const auto& w : answer_set) overlap += context_set.count(w);
    if (j == 0 || overlap > best_overlap) {
      best = j;
      best_overlap = overlap;
    }
  }
  return best;
}

std::vector<std::size_t> label_histogram(std::span<const McqaInstance> instances,
                                         std::size_t n_answers) {
  std::vector<std::size_t> counts(n_answers, 0);
  for (const auto& instance : instances) {
    if (instance.label && *instance.label < n_answers) ++counts[*instance.label];
  }
  return counts;
}

std::optional<Difficulty> parse_difficulty(std::string_view name) {
  if (name == "separable") return Difficulty::separable;
  if (name == "noisy") return Difficulty::noisy;
  return std::nullopt;
}

}  // namespace polytuplet
