// Prints a few augmented prompt pairs and the guide prompts for a word pair.
//
//   prompt_demo [seed] [n_pairs] ["normal|anomaly"]

#include <cstdlib>
#include <iostream>
#include <string>

#include "randprompt/prompts.hpp"

int main(int argc, char** argv) {
  using namespace randprompt;
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 0;
  const long long n = argc > 2 ? std::atoll(argv[2]) : 5;
  const WordPair words = argc > 3 ? WordPair::parse(argv[3]) : WordPair{};

  const auto pairs = generate_prompt_set(RandomWordConfig{}.with_seed(seed), words, n);
  for (const auto& p : pairs) {
    std::cout << p.pair_index << "  normal:  " << p.normal_prompt << "\n"
              << std::string(std::to_string(p.pair_index).size(), ' ') << "  anomaly: " << p.anomaly_prompt << "\n";
  }
  const auto guide = guide_prompts(words);
  std::cout << "guide: \"" << guide.normal_prompt << "\" / \"" << guide.anomaly_prompt << "\"\n";
}
