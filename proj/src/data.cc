#include "elstm/data.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "elstm/errors.h"

namespace elstm::data {

Vocabulary::Vocabulary() {
  for (auto t : {kPadToken, kStartToken, kStopToken, kUnkToken}) add(t);
}

int Vocabulary::add(std::string_view token) {
  if (auto it = ids_.find(std::string(token)); it != ids_.end()) return it->second;
  if (frozen_) throw ValidationError("vocabulary is frozen");
  const int id = static_cast<int>(tokens_.size());
  tokens_.emplace_back(token);
  ids_.emplace(tokens_.back(), id);
  return id;
}

void Vocabulary::add_all(const std::vector<std::string>& tokens) {
  for (const auto& t : tokens) add(t);
}

int Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.count(std::string(token)) > 0;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw ValidationError("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[id];
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  if (tokens.size() < 4 || tokens[0] != kPadToken || tokens[1] != kStartToken ||
      tokens[2] != kStopToken || tokens[3] != kUnkToken) {
    throw ValidationError("vocabulary must start with the reserved tokens");
  }
  for (std::size_t i = 4; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw ValidationError("duplicate token " + tokens[i]);
    v.add(tokens[i]);
  }
  v.freeze();
  return v;
}

namespace {

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  return in;
}

}  // namespace

std::vector<TokenPair> read_text_lm(std::istream& in) {
  std::vector<TokenPair> pairs;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    TokenPair p;
    for (std::string tok; ss >> tok;) p.source.push_back(tok);
    if (p.source.empty()) continue;
    p.target.assign(p.source.begin() + 1, p.source.end());
    p.target.emplace_back(kStopToken);
    pairs.push_back(std::move(p));
  }
  if (pairs.empty()) throw ValidationError("empty corpus");
  return pairs;
}

std::vector<TokenPair> read_text_lm(const std::filesystem::path& path) {
  auto in = open(path);
  return read_text_lm(in);
}

Vocabulary build_source_vocab(const std::vector<TokenPair>& pairs) {
  Vocabulary v;
  for (const auto& p : pairs) v.add_all(p.source);
  v.freeze();
  return v;
}

Vocabulary build_target_vocab(const std::vector<TokenPair>& pairs) {
  Vocabulary v;
  for (const auto& p : pairs) v.add_all(p.target);
  v.freeze();
  return v;
}

models::Example encode(const TokenPair& pair, const Vocabulary& source,
                       const Vocabulary& target) {
  models::Example ex;
  for (const auto& t : pair.source) ex.input.push_back(source.id(t));
  for (const auto& t : pair.target) ex.target.push_back(target.id(t));
  return ex;
}

std::vector<models::Example> encode_all(const std::vector<TokenPair>& pairs,
                                        const Vocabulary& source,
                                        const Vocabulary& target) {
  std::vector<models::Example> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(encode(p, source, target));
  return out;
}

std::vector<DetectASample> gen_detect_a(std::size_t length) {
  if (length < 1) throw ValidationError("detect-A length must be >= 1");
  std::vector<DetectASample> samples;
  for (std::size_t pos = 0; pos < length; ++pos) {
    DetectASample s{std::string(length, 'B'), true};
    s.sequence[pos] = 'A';
    samples.push_back(std::move(s));
  }
  samples.push_back({std::string(length, 'B'), false});
  return samples;
}

Vocabulary detect_a_source_vocab() { return Vocabulary::from_tokens({"<pad>", "<s>", "</s>", "<unk>", "A", "B"}); }

Vocabulary detect_a_target_vocab() {
  return Vocabulary::from_tokens({"<pad>", "<s>", "</s>", "<unk>", "absent", "present"});
}

models::Example encode_detect_a(const DetectASample& sample) {
  static const Vocabulary src = detect_a_source_vocab();
  static const Vocabulary tgt = detect_a_target_vocab();
  models::Example ex;
  for (char c : sample.sequence) ex.input.push_back(src.id(std::string(1, c)));
  ex.target.assign(sample.sequence.size(), kPadId);
  ex.target.back() = tgt.id(sample.present ? "present" : "absent");
  return ex;
}

std::vector<models::Example> detect_a_examples(std::size_t length) {
  std::vector<models::Example> out;
  for (const auto& s : gen_detect_a(length)) out.push_back(encode_detect_a(s));
  return out;
}

std::vector<models::Example> SequenceBatch::examples() const {
  std::vector<models::Example> out;
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    models::Example ex;
    ex.input.assign(inputs[b].begin(), inputs[b].begin() + input_lengths[b]);
    ex.target.assign(targets[b].begin(), targets[b].begin() + target_lengths[b]);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<SequenceBatch> make_batches(const std::vector<models::Example>& examples,
                                        std::size_t batch_size, Rng& rng) {
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<SequenceBatch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::size_t t_max = 0, tt_max = 0;
    for (std::size_t i = start; i < end; ++i) {
      t_max = std::max(t_max, examples[order[i]].input.size());
      tt_max = std::max(tt_max, examples[order[i]].target.size());
    }
    SequenceBatch batch;
    for (std::size_t i = start; i < end; ++i) {
      const auto& ex = examples[order[i]];
      std::vector<int> in(t_max, kPadId), tg(tt_max, kPadId);
      std::copy(ex.input.begin(), ex.input.end(), in.begin());
      std::copy(ex.target.begin(), ex.target.end(), tg.begin());
      std::vector<bool> im(t_max, false), tm(tt_max, false);
      std::fill(im.begin(), im.begin() + ex.input.size(), true);
      std::fill(tm.begin(), tm.begin() + ex.target.size(), true);
      batch.inputs.push_back(std::move(in));
      batch.targets.push_back(std::move(tg));
      batch.input_lengths.push_back(ex.input.size());
      batch.target_lengths.push_back(ex.target.size());
      batch.input_mask.push_back(std::move(im));
      batch.target_mask.push_back(std::move(tm));
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace elstm::data
