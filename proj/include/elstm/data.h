#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "elstm/model.h"
#include "elstm/rng.h"

namespace elstm::data {

inline constexpr int kPadId = 0;
inline constexpr int kStartId = 1;
inline constexpr int kStopId = 2;
inline constexpr int kUnkId = 3;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kStartToken = "<s>";
inline constexpr std::string_view kStopToken = "</s>";
inline constexpr std::string_view kUnkToken = "<unk>";

// Token ↔ id map with reserved ids pad=0, start=1, stop=2, unk=3. Ids follow
// first-insertion order, so identical input yields identical ids.
class Vocabulary {
 public:
  Vocabulary();

  // Adds a token while building. Throws once frozen.
  int add(std::string_view token);
  void add_all(const std::vector<std::string>& tokens);
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  // Unseen tokens map to unk.
  int id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  bool frozen_ = false;
};

// Parallel token streams for one training pair.
struct TokenPair {
  std::vector<std::string> source;
  std::vector<std::string> target;
};

// One sentence per line, whitespace tokens. Target is the input shifted left
// by one with the stop token appended. Blank lines are skipped.
std::vector<TokenPair> read_text_lm(std::istream& in);
std::vector<TokenPair> read_text_lm(const std::filesystem::path& path);

// Lemmas (column 3) against universal POS tags (column 4).
std::vector<TokenPair> read_conllu_pos(std::istream& in);
std::vector<TokenPair> read_conllu_pos(const std::filesystem::path& path);

// Lemmas against interleaved (relation, head position) pairs from columns 8
// and 7; the target is twice as long as the input.
std::vector<TokenPair> read_conllu_dp(std::istream& in);
std::vector<TokenPair> read_conllu_dp(const std::filesystem::path& path);

// Splits an interleaved DP target back into (relation, head) pairs.
std::vector<std::pair<std::string, std::string>> deinterleave(
    const std::vector<std::string>& target);

// Vocabularies from training pairs only.
Vocabulary build_source_vocab(const std::vector<TokenPair>& pairs);
Vocabulary build_target_vocab(const std::vector<TokenPair>& pairs);

models::Example encode(const TokenPair& pair, const Vocabulary& source,
                       const Vocabulary& target);
std::vector<models::Example> encode_all(const std::vector<TokenPair>& pairs,
                                        const Vocabulary& source,
                                        const Vocabulary& target);

struct DetectASample {
  std::string sequence;  // over {'A', 'B'}
  bool present = false;
};

// A at each position 1..T, then the all-B sequence.
std::vector<DetectASample> gen_detect_a(std::size_t length);

// Fixed vocabularies for the detect-A task.
Vocabulary detect_a_source_vocab();
Vocabulary detect_a_target_vocab();
// The label is attached to the final step; earlier targets are pad.
models::Example encode_detect_a(const DetectASample& sample);
std::vector<models::Example> detect_a_examples(std::size_t length);

// Padded batch. Masks mark positions below each example's length.
struct SequenceBatch {
  std::vector<std::vector<int>> inputs;
  std::vector<std::vector<int>> targets;
  std::vector<std::size_t> input_lengths;
  std::vector<std::size_t> target_lengths;
  std::vector<std::vector<bool>> input_mask;
  std::vector<std::vector<bool>> target_mask;

  std::size_t size() const { return inputs.size(); }
  // Unpadded examples.
  std::vector<models::Example> examples() const;
};

// Shuffles a copy of `examples` with rng, then cuts consecutive batches.
std::vector<SequenceBatch> make_batches(const std::vector<models::Example>& examples,
                                        std::size_t batch_size, Rng& rng);

}  // namespace elstm::data
