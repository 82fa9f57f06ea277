#include <gtest/gtest.h>

#include <filesystem>
#include <regex>
#include <set>

#include "oracles.hpp"
#include "randprompt/prompts.hpp"
#include "randprompt/rng.hpp"

namespace randprompt {
namespace {

TEST(Xoshiro256, ReferenceOutputForZeroSeed) {
  // splitmix64 stream from 0 seeds the state; first outputs frozen here so any
  // change to either generator shows up.
  Xoshiro256 a(0), b(0);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  std::uint64_t sm = 0;
  EXPECT_EQ(splitmix64(sm), 0xE220A8397B1DCDAFULL);
}

TEST(Xoshiro256, UniformBelowStaysInRange) {
  Xoshiro256 rng(3);
  for (std::uint64_t bound : {1ULL, 2ULL, 7ULL, 36ULL, 1000003ULL}) {
    for (int i = 0; i < 2000; ++i) EXPECT_LT(rng.uniform_below(bound), bound);
  }
  for (int i = 0; i < 1000; ++i) {
    const auto v = rng.uniform_int(5, 10);
    EXPECT_GE(v, 5);
    EXPECT_LE(v, 10);
  }
}

TEST(RandomWordConfig, RejectsInvalidBounds) {
  EXPECT_THROW(RandomWordConfig(0, 3), ArgumentError);
  EXPECT_THROW(RandomWordConfig(6, 5), ArgumentError);
  EXPECT_THROW(RandomWordConfig(1, 2, ""), ArgumentError);
  EXPECT_THROW(RandomWordConfig(1, 2, "abca"), ArgumentError);
  EXPECT_THROW(RandomWordConfig(1, 2, "ab c"), ArgumentError);
  EXPECT_NO_THROW(RandomWordConfig(1, 1, "a"));
}

TEST(GenerateRandomWord, LengthsWithinBoundsAndAllLengthsReached) {
  RandomWordConfig cfg(5, 10, std::string(kDefaultAlphabet), 1);
  Xoshiro256 rng(cfg.seed());
  std::set<std::size_t> lengths;
  const std::regex word_re("[a-z0-9]{5,10}");
  for (int i = 0; i < 5000; ++i) {
    const auto w = generate_random_word(cfg, rng);
    EXPECT_TRUE(std::regex_match(w, word_re)) << w;
    lengths.insert(w.size());
  }
  EXPECT_EQ(lengths, (std::set<std::size_t>{5, 6, 7, 8, 9, 10}));
}

TEST(GenerateRandomWord, DegenerateAlphabet) {
  RandomWordConfig cfg(1, 1, "a");
  Xoshiro256 rng(cfg.seed());
  EXPECT_EQ(generate_random_word(cfg, rng), "a");
}

TEST(GenerateRandomWord, CharacterFrequenciesAreUniform) {
  RandomWordConfig cfg(5, 10, std::string(kDefaultAlphabet), 42);
  Xoshiro256 rng(cfg.seed());
  std::vector<double> counts(cfg.alphabet().size(), 0.0);
  std::vector<double> length_counts(6, 0.0);
  double total = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto w = generate_random_word(cfg, rng);
    length_counts[w.size() - 5] += 1.0;
    for (char c : w) {
      counts[cfg.alphabet().find(c)] += 1.0;
      total += 1.0;
    }
  }
  const double p = 1.0 / static_cast<double>(counts.size());
  const double sigma = std::sqrt(total * p * (1.0 - p));
  for (std::size_t i = 0; i < counts.size(); ++i) {
    EXPECT_LE(std::abs(counts[i] - total * p), 3.0 * sigma) << "character " << cfg.alphabet()[i];
  }
  // 35 degrees of freedom, p = 0.001 critical value.
  EXPECT_LT(oracle::chi_squared_uniform(counts), 66.62);
  // 5 degrees of freedom, p = 0.001 critical value.
  EXPECT_LT(oracle::chi_squared_uniform(length_counts), 20.52);
}

std::vector<std::string> words_like(const std::string& w) { return std::vector<std::string>(10, w); }

TEST(FillTemplates, AnchorsAppearInOrder) {
  std::vector<std::string> words;
  for (int i = 0; i < 10; ++i) words.push_back("w" + std::to_string(i));
  const auto p = fill_templates(WordPair{"a", "a damaged"}, words, 3);
  EXPECT_EQ(p.normal_prompt, "w0 a w1 photo w2 of w3 a w4");
  EXPECT_EQ(p.anomaly_prompt, "w5 a w6 photo w7 of w8 a damaged w9");
  EXPECT_EQ(p.pair_index, 3u);
}

TEST(FillTemplates, RejectsWrongCountAndEmptyWords) {
  EXPECT_THROW(fill_templates(WordPair{}, std::vector<std::string>(9, "x")), ArgumentError);
  EXPECT_THROW(fill_templates(WordPair{}, std::vector<std::string>(11, "x")), ArgumentError);
  EXPECT_THROW(fill_templates(WordPair{}, words_like("")), ArgumentError);
}

TEST(WordPair, ValidationAndParsing) {
  EXPECT_THROW(WordPair("", "a damaged"), ArgumentError);
  EXPECT_THROW(WordPair(" a", "a damaged"), ArgumentError);
  EXPECT_THROW(WordPair("a", "a damaged "), ArgumentError);
  EXPECT_EQ(WordPair::parse("a good|a broken"), (WordPair{"a good", "a broken"}));
  EXPECT_THROW(WordPair::parse("a good"), ArgumentError);
  EXPECT_EQ(word_pair_by_name("default"), (WordPair{"a", "a damaged"}));
  EXPECT_EQ(WordPair("a good", "a broken").slug(), "a_good__a_broken");
}

TEST(WordPair, GridHasSixteenDistinctCombinations) {
  const auto grid = word_pair_grid();
  ASSERT_EQ(grid.size(), 16u);
  std::set<std::string> names;
  for (const auto& wp : grid) names.insert(wp.name());
  EXPECT_EQ(names.size(), 16u);
  EXPECT_EQ(grid.front(), (WordPair{"an", "a damaged"}));
  EXPECT_EQ(grid.back(), (WordPair{"a flawless", "an anomalous"}));
}

TEST(GeneratePromptSet, CountsAndErrors) {
  RandomWordConfig cfg(5, 10, std::string(kDefaultAlphabet), 0);
  EXPECT_EQ(generate_prompt_set(cfg, WordPair{}, 1).size(), 1u);
  const auto big = generate_prompt_set(cfg, WordPair{}, 10000);
  EXPECT_EQ(big.size(), 10000u);
  EXPECT_THROW(generate_prompt_set(cfg, WordPair{}, 0), ArgumentError);
  EXPECT_THROW(generate_prompt_set(cfg, WordPair{}, -3), ArgumentError);
}

TEST(GeneratePromptSet, DeterministicAndPrefixStable) {
  RandomWordConfig cfg(5, 10, std::string(kDefaultAlphabet), 7);
  const auto a = generate_prompt_set(cfg, WordPair{}, 50);
  const auto b = generate_prompt_set(cfg, WordPair{}, 50);
  EXPECT_EQ(a, b);
  const auto small = generate_prompt_set(cfg, WordPair{}, 10);
  EXPECT_TRUE(std::equal(small.begin(), small.end(), a.begin()));
}

TEST(GeneratePromptSet, NeighbouringSeedsDiffer) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    RandomWordConfig cfg(5, 10, std::string(kDefaultAlphabet), s);
    EXPECT_NE(generate_prompt_set(cfg, WordPair{}, 20), generate_prompt_set(cfg.with_seed(s + 1), WordPair{}, 20));
  }
}

// Property: every prompt has the template shape, only alphabet characters in
// the random slots, and the state word at the [n]/[a] position.
TEST(GeneratePromptSet, PromptsMatchTemplateShape) {
  for (const auto& wp : word_pair_grid()) {
    RandomWordConfig cfg(2, 6, "xyz019", 11);
    const auto pairs = generate_prompt_set(cfg, wp, 25);
    const std::string w = "[xyz019]{2,6}";
    const std::regex normal_re("^" + w + " a " + w + " photo " + w + " of " + w + " " + wp.normal_word + " " + w + "$");
    const std::regex anomaly_re("^" + w + " a " + w + " photo " + w + " of " + w + " " + wp.anomaly_word + " " + w + "$");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      EXPECT_EQ(pairs[i].pair_index, i);
      EXPECT_TRUE(std::regex_match(pairs[i].normal_prompt, normal_re)) << pairs[i].normal_prompt;
      EXPECT_TRUE(std::regex_match(pairs[i].anomaly_prompt, anomaly_re)) << pairs[i].anomaly_prompt;
    }
  }
}

TEST(GuidePrompts, ObjectAndCategory) {
  const auto g = guide_prompts(WordPair{});
  EXPECT_EQ(g.normal_prompt, "a photo of a object");
  EXPECT_EQ(g.anomaly_prompt, "a photo of a damaged object");
  EXPECT_EQ(guide_prompts(WordPair{"a good", "a broken"}, "screw").anomaly_prompt, "a photo of a broken screw");
}

TEST(PromptFile, RoundTripAndHeader) {
  const auto path = std::filesystem::temp_directory_path() / "randprompt_prompts_test.txt";
  RandomWordConfig cfg(5, 10, std::string(kDefaultAlphabet), 99);
  const auto pairs = generate_prompt_set(cfg, WordPair{}, 5);
  write_prompt_file(path, 99, pairs);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "#randprompt v1 seed=99 n=5");
  const auto back = read_prompt_file(path);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.pairs, pairs);
  std::filesystem::remove(path);
}

TEST(PromptFile, RejectsBadHeaderAndTruncation) {
  const auto path = std::filesystem::temp_directory_path() / "randprompt_prompts_bad.txt";
  std::ofstream(path) << "#prompts v1 seed=1 n=1\na\nb\n";
  EXPECT_THROW(read_prompt_file(path), FormatError);
  std::ofstream(path) << "#randprompt v1 seed=1 n=2\na\nb\nc\n";
  EXPECT_THROW(read_prompt_file(path), CorruptionError);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace randprompt
