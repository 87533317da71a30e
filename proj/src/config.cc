#include "elstm/config.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "elstm/errors.h"

namespace elstm::config {

std::string_view to_string(Task task) {
  switch (task) {
    case Task::Toy: return "toy";
    case Task::LM: return "lm";
    case Task::POS: return "pos";
    case Task::DP: return "dp";
  }
  return "?";
}

Task parse_task(std::string_view s) {
  for (Task t : {Task::Toy, Task::LM, Task::POS, Task::DP}) {
    if (s == to_string(t)) return t;
  }
  throw ValidationError("unknown preset '" + std::string(s) +
                        "' (expected toy, lm, pos or dp)");
}

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", lineno);
    kv[key] = value;
  }
  return kv;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path.string());
  return parse_key_values(in);
}

const std::vector<std::pair<std::string, std::string>>& documented_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"preset", "toy | lm | pos | dp; selects defaults and the data format"},
      {"model", "basic | brnn | seq2seq | seq2seq-attn | dbrnn"},
      {"cell", "srn | lstm | gru | sgru | elstm"},
      {"input_mode", "concat | input-only"},
      {"embedding_dim", "embedding vector size"},
      {"hidden_dim", "number of cells (hidden width N)"},
      {"ts", "ELSTM scaling period T_s"},
      {"attention_dim", "attention hidden width (0 = hidden_dim)"},
      {"max_decode_length", "free-running decode limit"},
      {"targets_per_step", "1, or 2 for interleaved DP targets on aligned models"},
      {"combination", "logits | probability-mix"},
      {"prediction_feedback", "true | false (DBRNN)"},
      {"loss_w_f", "DBRNN forward-loss weight"},
      {"loss_w_b", "DBRNN backward-loss weight"},
      {"loss_w_comb", "DBRNN combined-loss weight"},
      {"epochs", "training epochs"},
      {"batch_size", "examples per batch"},
      {"learning_rate", "AdaGrad learning rate"},
      {"epsilon", "AdaGrad epsilon"},
      {"clip_norm", "global gradient-norm clip (0 disables)"},
      {"seed", "random seed"},
      {"toy_length", "detect-A sequence length T"},
      {"train_data", "training corpus path (lm, pos, dp)"},
      {"eval_data", "evaluation corpus path"},
  };
  return keys;
}

namespace {

class Resolver {
 public:
  explicit Resolver(const std::map<std::string, std::string>& kv) : kv_(kv) {}

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  template <class T>
  void number(const std::string& key, T& out) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return;
    const std::string& s = it->second;
    T v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      problems.push_back(key + ": '" + s + "' is not a valid number");
      return;
    }
    out = v;
  }

  void boolean(const std::string& key, bool& out) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return;
    if (it->second == "true" || it->second == "1") out = true;
    else if (it->second == "false" || it->second == "0") out = false;
    else problems.push_back(key + ": expected true or false");
  }

  template <class F>
  void parsed(const std::string& key, F parse) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return;
    try {
      parse(it->second);
    } catch (const std::exception& e) {
      problems.push_back(key + ": " + e.what());
    }
  }

  void string(const std::string& key, std::string& out) {
    if (auto it = kv_.find(key); it != kv_.end()) out = it->second;
  }

  std::vector<std::string> problems;

 private:
  const std::map<std::string, std::string>& kv_;
};

void apply_preset(Task task, RunConfig& c) {
  c.task = task;
  auto& m = c.model;
  switch (task) {
    case Task::Toy:
      // One layer, embedding 2, one cell, batch 5.
      m.kind = models::ModelKind::BasicRNN;
      m.cell = models::CellKind::ELSTM;
      m.embedding_dim = 2;
      m.hidden_dim = 1;
      c.train.batch_size = 5;
      c.train.epochs = 2000;
      break;
    case Task::LM:
      m.kind = models::ModelKind::BasicRNN;
      m.cell = models::CellKind::ELSTM;
      m.embedding_dim = 5;
      m.hidden_dim = 5;
      m.scale_period = 3;
      c.train.batch_size = 50;
      c.train.epochs = 11;
      break;
    case Task::POS:
    case Task::DP:
      m.kind = models::ModelKind::DBRNN;
      m.cell = models::CellKind::ELSTM;
      m.embedding_dim = 512;
      m.hidden_dim = 512;
      m.scale_period = 100;
      c.train.batch_size = 20;
      c.train.epochs = 11;
      break;
  }
  c.train.learning_rate = 0.5;
}

}  // namespace

RunConfig resolve(const std::map<std::string, std::string>& kv) {
  Resolver r(kv);
  RunConfig c;
  Task task = Task::Toy;
  r.parsed("preset", [&](const std::string& s) { task = parse_task(s); });
  apply_preset(task, c);
  auto& m = c.model;

  for (const auto& [key, value] : kv) {
    const auto& keys = documented_keys();
    const bool known = std::any_of(keys.begin(), keys.end(),
                                   [&](const auto& k) { return k.first == key; });
    if (!known) r.problems.push_back("unknown key '" + key + "'");
  }

  r.parsed("model", [&](const std::string& s) { m.kind = models::parse_model_kind(s); });
  r.parsed("cell", [&](const std::string& s) { m.cell = cells::parse_cell_kind(s); });
  r.parsed("input_mode", [&](const std::string& s) { m.input_mode = cells::parse_input_mode(s); });
  r.parsed("combination", [&](const std::string& s) {
    m.combination = models::parse_combination_mode(s);
  });
  r.number("embedding_dim", m.embedding_dim);
  r.number("hidden_dim", m.hidden_dim);
  r.number("attention_dim", m.attention_dim);
  r.number("max_decode_length", m.max_decode_length);
  r.number("targets_per_step", m.targets_per_step);
  r.boolean("prediction_feedback", m.prediction_feedback);
  r.number("loss_w_f", m.loss_weights.forward);
  r.number("loss_w_b", m.loss_weights.backward);
  r.number("loss_w_comb", m.loss_weights.combined);
  r.number("epochs", c.train.epochs);
  r.number("batch_size", c.train.batch_size);
  r.number("learning_rate", c.train.learning_rate);
  r.number("epsilon", c.train.epsilon);
  r.number("clip_norm", c.train.clip_norm);
  r.number("seed", c.train.seed);
  r.number("toy_length", c.toy_length);
  r.string("train_data", c.train_data);
  r.string("eval_data", c.eval_data);

  // T_s defaults: T for the toy (one factor per position); 1 for aligned
  // models and 100 for seq2seq models on POS; 3 for LM; 100 for DP.
  if (task == Task::Toy) m.scale_period = c.toy_length;
  if (task == Task::POS) m.scale_period = models::is_seq2seq(m.kind) ? 100 : 1;
  if (task == Task::DP && !models::is_seq2seq(m.kind) && !r.has("targets_per_step")) {
    m.targets_per_step = 2;
  }
  r.number("ts", m.scale_period);

  if (task == Task::Toy && c.toy_length < 1) r.problems.push_back("toy_length must be >= 1");
  if (c.train.batch_size < 1) r.problems.push_back("batch_size must be >= 1");
  if (!(c.train.learning_rate > 0)) r.problems.push_back("learning_rate must be positive");
  if (c.train.epsilon < 0) r.problems.push_back("epsilon must be >= 0");
  if (m.scale_period < 1) r.problems.push_back("ts must be >= 1");
  if (m.embedding_dim < 1) r.problems.push_back("embedding_dim must be >= 1");
  if (m.hidden_dim < 1) r.problems.push_back("hidden_dim must be >= 1");
  if (m.cell == cells::CellKind::GRU && m.input_mode == cells::InputMode::InputOnly) {
    r.problems.push_back("input_mode: the GRU cell does not support input-only mode");
  }

  if (!r.problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : r.problems) msg += "\n  - " + p;
    throw ValidationError(msg);
  }
  return c;
}

namespace {

std::vector<data::TokenPair> read_pairs(Task task, const std::filesystem::path& path) {
  switch (task) {
    case Task::LM: return data::read_text_lm(path);
    case Task::POS: return data::read_conllu_pos(path);
    case Task::DP: return data::read_conllu_dp(path);
    case Task::Toy: break;
  }
  throw ValidationError("the toy task has no corpus file");
}

}  // namespace

TaskData load_task_data(RunConfig& cfg) {
  TaskData d;
  if (cfg.task == Task::Toy) {
    d.source = data::detect_a_source_vocab();
    d.target = data::detect_a_target_vocab();
    d.train = data::detect_a_examples(cfg.toy_length);
  } else {
    if (cfg.train_data.empty()) {
      throw ValidationError("train_data is required for preset " +
                            std::string(to_string(cfg.task)));
    }
    auto pairs = read_pairs(cfg.task, cfg.train_data);
    if (pairs.empty()) throw ValidationError("no sentences in " + cfg.train_data);
    d.source = data::build_source_vocab(pairs);
    // LM targets are the next words; </s> is reserved in every vocabulary.
    d.target = cfg.task == Task::LM ? d.source : data::build_target_vocab(pairs);
    d.train = data::encode_all(pairs, d.source, d.target);
    if (!cfg.eval_data.empty()) {
      d.eval = load_examples(cfg.task, cfg.eval_data, d.source, d.target);
    }
  }
  cfg.model.source_vocab = d.source.size();
  cfg.model.target_vocab = d.target.size();
  cfg.model.pad_id = data::kPadId;
  cfg.model.start_id = data::kStartId;
  cfg.model.stop_id = data::kStopId;
  cfg.model.validate();
  return d;
}

std::vector<models::Example> load_examples(Task task, const std::filesystem::path& path,
                                           const data::Vocabulary& source,
                                           const data::Vocabulary& target) {
  if (task == Task::Toy) throw ValidationError("the toy task has no corpus file");
  return data::encode_all(read_pairs(task, path), source, target);
}

}  // namespace elstm::config
