#include <fstream>
#include <sstream>

#include "elstm/data.h"
#include "elstm/errors.h"

namespace elstm::data {
namespace {

struct Token {
  std::string lemma;
  std::string upos;
  std::string head;
  std::string deprel;
};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

// Sentences of basic tokens. Multiword ranges ("1-2") and empty nodes ("8.1")
// are skipped.
std::vector<std::vector<Token>> read_sentences(std::istream& in) {
  std::vector<std::vector<Token>> sentences;
  std::vector<Token> current;
  std::string line;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (!current.empty()) sentences.push_back(std::move(current));
    current.clear();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    auto f = split_tabs(line);
    if (f.size() < 10) {
      throw ParseError("expected 10 tab-separated fields, found " +
                       std::to_string(f.size()), lineno);
    }
    if (f[0].find_first_of("-.") != std::string::npos) continue;
    current.push_back({f[2], f[3], f[6], f[7]});
  }
  flush();
  return sentences;
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  return in;
}

}  // namespace

std::vector<TokenPair> read_conllu_pos(std::istream& in) {
  std::vector<TokenPair> pairs;
  for (const auto& sentence : read_sentences(in)) {
    TokenPair p;
    for (const auto& t : sentence) {
      p.source.push_back(t.lemma);
      p.target.push_back(t.upos);
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<TokenPair> read_conllu_pos(const std::filesystem::path& path) {
  auto in = open(path);
  return read_conllu_pos(in);
}

std::vector<TokenPair> read_conllu_dp(std::istream& in) {
  std::vector<TokenPair> pairs;
  for (const auto& sentence : read_sentences(in)) {
    TokenPair p;
    for (const auto& t : sentence) {
      p.source.push_back(t.lemma);
      p.target.push_back(t.deprel);
      p.target.push_back(t.head);
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<TokenPair> read_conllu_dp(const std::filesystem::path& path) {
  auto in = open(path);
  return read_conllu_dp(in);
}

std::vector<std::pair<std::string, std::string>> deinterleave(
    const std::vector<std::string>& target) {
  if (target.size() % 2 != 0) {
    throw ValidationError("interleaved target must have even length");
  }
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < target.size(); i += 2) out.emplace_back(target[i], target[i + 1]);
  return out;
}

}  // namespace elstm::data
