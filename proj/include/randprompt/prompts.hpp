#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "randprompt/errors.hpp"
#include "randprompt/rng.hpp"

namespace randprompt {

inline constexpr std::string_view kDefaultAlphabet = "abcdefghijklmnopqrstuvwxyz0123456789";

/// Bounds and character set for random words. Validated on construction.
class RandomWordConfig {
 public:
  RandomWordConfig() = default;

  RandomWordConfig(int l_min, int l_max, std::string alphabet = std::string(kDefaultAlphabet),
                   std::uint64_t seed = 0)
      : l_min_(l_min), l_max_(l_max), alphabet_(std::move(alphabet)), seed_(seed) {
    if (l_min_ < 1 || l_max_ < l_min_) {
      throw ArgumentError("random word lengths must satisfy 1 <= l_min <= l_max (got " +
                          std::to_string(l_min_) + ", " + std::to_string(l_max_) + ")");
    }
    if (alphabet_.empty()) throw ArgumentError("alphabet must not be empty");
    std::string sorted = alphabet_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ArgumentError("alphabet contains duplicate characters");
    }
    for (char c : alphabet_) {
      if (c == ' ' || c == '\n' || c == '\r' || c == '\t') {
        throw ArgumentError("alphabet must not contain whitespace");
      }
    }
  }

  int l_min() const noexcept { return l_min_; }
  int l_max() const noexcept { return l_max_; }
  const std::string& alphabet() const noexcept { return alphabet_; }
  std::uint64_t seed() const noexcept { return seed_; }

  RandomWordConfig with_seed(std::uint64_t seed) const {
    RandomWordConfig copy = *this;
    copy.seed_ = seed;
    return copy;
  }

 private:
  int l_min_ = 5;
  int l_max_ = 10;
  std::string alphabet_ = std::string(kDefaultAlphabet);
  std::uint64_t seed_ = 0;
};

namespace detail {
inline bool has_outer_space(std::string_view s) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  return !s.empty() && (is_space(s.front()) || is_space(s.back()));
}
}  // namespace detail

/// Normal/anomaly words inserted at [n] and [a].
struct WordPair {
  std::string normal_word = "a";
  std::string anomaly_word = "a damaged";

  WordPair() = default;
  WordPair(std::string normal, std::string anomaly)
      : normal_word(std::move(normal)), anomaly_word(std::move(anomaly)) {
    if (normal_word.empty() || anomaly_word.empty()) {
      throw ArgumentError("word pair entries must be non-empty");
    }
    if (detail::has_outer_space(normal_word) || detail::has_outer_space(anomaly_word)) {
      throw ArgumentError("word pair entries must not have leading/trailing whitespace");
    }
  }

  /// "normal|anomaly", the form used on the command line and in reports.
  std::string name() const { return normal_word + "|" + anomaly_word; }

  /// Filesystem-safe form: spaces become '_', the two words joined by "__".
  std::string slug() const {
    auto fix = [](std::string s) {
      std::replace(s.begin(), s.end(), ' ', '_');
      return s;
    };
    return fix(normal_word) + "__" + fix(anomaly_word);
  }

  /// Parses "normal|anomaly".
  static WordPair parse(std::string_view text) {
    const auto bar = text.find('|');
    if (bar == std::string_view::npos || text.find('|', bar + 1) != std::string_view::npos) {
      throw ArgumentError("word pair must look like 'normal|anomaly': " + std::string(text));
    }
    return WordPair(std::string(text.substr(0, bar)), std::string(text.substr(bar + 1)));
  }

  friend bool operator==(const WordPair&, const WordPair&) = default;
};

/// Row and column words of the word-pair analysis grid.
inline const std::array<std::string_view, 4> kGridNormalWords = {"an", "a normal", "a good",
                                                                 "a flawless"};
inline const std::array<std::string_view, 4> kGridAnomalyWords = {"a damaged", "a broken",
                                                                  "a defective", "an anomalous"};

/// All 16 grid combinations, row-major (normal word outer).
inline std::vector<WordPair> word_pair_grid() {
  std::vector<WordPair> out;
  out.reserve(kGridNormalWords.size() * kGridAnomalyWords.size());
  for (auto n : kGridNormalWords) {
    for (auto a : kGridAnomalyWords) out.emplace_back(std::string(n), std::string(a));
  }
  return out;
}

/// Looks a pair up by name. Accepts "default" and any "normal|anomaly" string.
inline WordPair word_pair_by_name(std::string_view name) {
  if (name == "default") return WordPair{};
  return WordPair::parse(name);
}

struct PromptPair {
  std::string normal_prompt;
  std::string anomaly_prompt;
  std::size_t pair_index = 0;

  friend bool operator==(const PromptPair&, const PromptPair&) = default;
};

inline constexpr std::size_t kSlotsPerPrompt = 5;
inline constexpr std::size_t kWordsPerPair = 2 * kSlotsPerPrompt;

/// Draws one word: length uniform in [l_min, l_max], then each character
/// uniform over the alphabet.
inline std::string generate_random_word(const RandomWordConfig& cfg, Xoshiro256& rng) {
  const auto length = static_cast<std::size_t>(rng.uniform_int(cfg.l_min(), cfg.l_max()));
  const std::string& alphabet = cfg.alphabet();
  std::string word(length, '\0');
  for (auto& c : word) c = alphabet[rng.uniform_below(alphabet.size())];
  return word;
}

/// Fills "[w0] a [w1] photo [w2] of [w3] [n] [w4]" and the anomalous
/// counterpart with words w5..w9.
inline PromptPair fill_templates(const WordPair& words, std::span<const std::string> random_words,
                                 std::size_t pair_index = 0) {
  if (random_words.size() != kWordsPerPair) {
    throw ArgumentError("fill_templates needs exactly 10 random words, got " +
                        std::to_string(random_words.size()));
  }
  for (const auto& w : random_words) {
    if (w.empty()) throw ArgumentError("random words must be non-empty");
    if (w.find(' ') != std::string::npos) throw ArgumentError("random words must not contain spaces");
  }
  auto fill = [](std::span<const std::string> w, const std::string& state) {
    std::string s;
    s.reserve(64);
    s += w[0];
    s += " a ";
    s += w[1];
    s += " photo ";
    s += w[2];
    s += " of ";
    s += w[3];
    s += ' ';
    s += state;
    s += ' ';
    s += w[4];
    return s;
  };
  return PromptPair{fill(random_words.first(kSlotsPerPrompt), words.normal_word),
                    fill(random_words.last(kSlotsPerPrompt), words.anomaly_word), pair_index};
}

/// Generates n_pairs prompt pairs from one stream seeded by cfg.seed().
/// Draw order: w0..w9 per pair, pairs ascending, so the first k pairs of a
/// larger set equal the k-pair set for the same seed.
inline std::vector<PromptPair> generate_prompt_set(const RandomWordConfig& cfg,
                                                   const WordPair& words, long long n_pairs) {
  if (n_pairs <= 0) throw ArgumentError("n_pairs must be >= 1");
  Xoshiro256 rng(cfg.seed());
  std::vector<PromptPair> out;
  out.reserve(static_cast<std::size_t>(n_pairs));
  std::array<std::string, kWordsPerPair> slot_words;
  for (long long i = 0; i < n_pairs; ++i) {
    for (auto& w : slot_words) w = generate_random_word(cfg, rng);
    out.push_back(fill_templates(words, slot_words, static_cast<std::size_t>(i)));
  }
  return out;
}

/// Guide prompts for prompt-guided scoring: "a photo of [n] object", or the
/// category name in place of "object" when the target is known.
inline PromptPair guide_prompts(const WordPair& words, std::string_view object = "object") {
  const std::string tail = " " + std::string(object);
  return PromptPair{"a photo of " + words.normal_word + tail,
                    "a photo of " + words.anomaly_word + tail, 0};
}

/// Contents of a prompt file.
struct PromptFile {
  std::uint64_t seed = 0;
  std::vector<PromptPair> pairs;
};

/// Line format: header `#randprompt v1 seed=<u64> n=<count>`, then for each
/// pair the normal line followed by the anomaly line.
inline void write_prompt_file(const std::filesystem::path& path, std::uint64_t seed,
                              std::span<const PromptPair> pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open prompt file for writing: " + path.string());
  out << "#randprompt v1 seed=" << seed << " n=" << pairs.size() << '\n';
  for (const auto& p : pairs) out << p.normal_prompt << '\n' << p.anomaly_prompt << '\n';
  if (!out) throw IoError("failed writing prompt file: " + path.string());
}

inline PromptFile read_prompt_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open prompt file: " + path.string());
  std::string header;
  std::getline(in, header);
  PromptFile file;
  unsigned long long seed = 0;
  unsigned long long count = 0;
  {
    std::istringstream hs(header);
    std::string magic, version, seed_tok, n_tok;
    hs >> magic >> version >> seed_tok >> n_tok;
    if (magic != "#randprompt" || version != "v1" || seed_tok.rfind("seed=", 0) != 0 ||
        n_tok.rfind("n=", 0) != 0) {
      throw FormatError("bad prompt file header in " + path.string());
    }
    try {
      seed = std::stoull(seed_tok.substr(5));
      count = std::stoull(n_tok.substr(2));
    } catch (const std::exception&) {
      throw FormatError("bad prompt file header in " + path.string());
    }
  }
  file.seed = seed;
  file.pairs.reserve(count);
  for (unsigned long long i = 0; i < count; ++i) {
    PromptPair p;
    p.pair_index = i;
    if (!std::getline(in, p.normal_prompt) || !std::getline(in, p.anomaly_prompt)) {
      throw CorruptionError("prompt file ends after " + std::to_string(i) + " of " +
                            std::to_string(count) + " pairs: " + path.string());
    }
    file.pairs.push_back(std::move(p));
  }
  std::string extra;
  while (std::getline(in, extra)) {
    if (!extra.empty()) throw FormatError("trailing lines in prompt file: " + path.string());
  }
  return file;
}

}  // namespace randprompt
