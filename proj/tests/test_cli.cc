#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "elstm/checkpoint.h"
#include "elstm/config.h"
#include "elstm/errors.h"
#include "elstm/training.h"

using namespace elstm;
namespace fs = std::filesystem;

namespace {

const std::string kBin = ELSTM_LAB_BIN;
const fs::path kData = ELSTM_TEST_DATA;

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr discarded; returns exit code and stdout.
Result run_cli(const std::string& args) {
  Result r;
  const std::string cmd = kBin + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("elstm_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
  static inline int counter_ = 0;
};

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

config::RunConfig toy_run(std::size_t T, const std::string& cell, std::size_t epochs) {
  return config::resolve({{"preset", "toy"},
                          {"cell", cell},
                          {"toy_length", std::to_string(T)},
                          {"epochs", std::to_string(epochs)}});
}

}  // namespace

TEST(Config, PresetDefaults) {
  auto toy = config::resolve({{"preset", "toy"}});
  EXPECT_EQ(toy.model.embedding_dim, 2u);
  EXPECT_EQ(toy.model.hidden_dim, 1u);
  EXPECT_EQ(toy.train.batch_size, 5u);
  EXPECT_EQ(toy.model.kind, models::ModelKind::BasicRNN);
  EXPECT_EQ(toy.model.scale_period, toy.toy_length);
  auto lm = config::resolve({{"preset", "lm"}});
  EXPECT_EQ(lm.train.batch_size, 50u);
  EXPECT_EQ(lm.train.epochs, 11u);
  EXPECT_EQ(lm.model.scale_period, 3u);
  for (const char* p : {"pos", "dp"}) {
    auto r = config::resolve({{"preset", p}});
    EXPECT_EQ(r.train.batch_size, 20u);
    EXPECT_EQ(r.train.epochs, 11u);
    EXPECT_EQ(r.model.hidden_dim, 512u);
    EXPECT_EQ(r.train.learning_rate, 0.5);
  }
}

TEST(Config, EveryProblemReportedAtOnce) {
  try {
    config::resolve({{"preset", "toy"},
                     {"epochs", "many"},
                     {"cell", "bogus"},
                     {"colour", "red"},
                     {"ts", "0"}});
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    for (const char* key : {"epochs", "cell", "colour", "ts"})
      EXPECT_NE(msg.find(key), std::string::npos) << key << " missing from: " << msg;
  }
}

TEST(Config, KeyValueFileParsing) {
  std::istringstream in("# comment\npreset = lm\n\n  hidden_dim=7  # trailing\n");
  auto kv = config::parse_key_values(in);
  EXPECT_EQ(kv.at("preset"), "lm");
  EXPECT_EQ(kv.at("hidden_dim"), "7");
  EXPECT_EQ(config::resolve(kv).model.hidden_dim, 7u);
  std::istringstream bad("no equals sign here\n");
  EXPECT_THROW(config::parse_key_values(bad), ParseError);
}

TEST(Config, DocumentedKeysAllResolve) {
  for (const auto& [key, help] : config::documented_keys()) {
    EXPECT_FALSE(help.empty()) << key;
  }
  EXPECT_GE(config::documented_keys().size(), 20u);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto run = toy_run(6, "elstm", 5);
  auto d = config::load_task_data(run);
  models::Model m(run.model, run.train.seed);
  training::TrainState st;
  training::train(m, d.train, run.train, st);
  auto ck = checkpoint::capture(m, run, st, d.source, d.target);
  const std::string text = checkpoint::serialize(ck);
  auto back = checkpoint::deserialize(text);
  EXPECT_EQ(checkpoint::serialize(back), text);
  EXPECT_EQ(back.state.step, st.step);
  models::Model restored = checkpoint::restore_model(back);
  for (const auto& [name, e] : m.tape().entries()) {
    const auto& r = restored.tape().at(name);
    EXPECT_EQ(r.value, e.value) << name;
    EXPECT_EQ(r.accum, e.accum) << name;
  }
  const auto a = training::evaluate(m, d.train);
  const auto b = training::evaluate(restored, d.train);
  EXPECT_EQ(a.cross_entropy, b.cross_entropy);
  EXPECT_EQ(a.accuracy, b.accuracy);
}

TEST(Checkpoint, RejectsGarbage) {
  EXPECT_THROW(checkpoint::deserialize("{not json"), ValidationError);
  EXPECT_THROW(checkpoint::deserialize("{\"format_version\": 99}"), ValidationError);
}

TEST(Training, ResumeMatchesUninterruptedRun) {
  auto run = toy_run(5, "lstm", 6);
  auto d = config::load_task_data(run);
  models::Model full(run.model, 1);
  training::TrainState s_full;
  training::train(full, d.train, run.train, s_full);

  models::Model part(run.model, 1);
  training::TrainState s_part;
  auto opts = run.train;
  opts.epochs = 4;
  training::train(part, d.train, opts, s_part);
  const std::size_t mid = s_part.step;
  auto ck = checkpoint::deserialize(
      checkpoint::serialize(checkpoint::capture(part, run, s_part, d.source, d.target)));
  models::Model resumed = checkpoint::restore_model(ck);
  opts.epochs = 2;
  training::train(resumed, d.train, opts, ck.state);
  EXPECT_GT(ck.state.step, mid);
  EXPECT_EQ(ck.state.step, s_full.step);
  EXPECT_EQ(ck.state.epoch, 6u);
  for (const auto& [name, e] : full.tape().entries())
    EXPECT_EQ(resumed.tape().at(name).value, e.value) << name;
}

TEST(Training, SameSeedSameLossToTheBit) {
  auto run = toy_run(8, "elstm", 20);
  auto d = config::load_task_data(run);
  double losses[2];
  for (double& loss : losses) {
    models::Model m(run.model, run.train.seed);
    training::TrainState st;
    auto stats = training::train(m, d.train, run.train, st);
    loss = stats.back().cross_entropy;
  }
  EXPECT_EQ(losses[0], losses[1]);
}

TEST(Metrics, UniformModelPerplexityIsVocabularySize) {
  models::ModelConfig c;
  c.source_vocab = 100;
  c.target_vocab = 100;
  c.embedding_dim = 3;
  c.hidden_dim = 3;
  models::Model m(c, 1);
  for (auto& [name, e] : m.tape().entries()) e.value.fill(0.0);
  std::vector<models::Example> ex{{{5, 6, 7}, {6, 7, 8}}, {{9}, {2}}};
  auto r = training::evaluate(m, ex);
  EXPECT_NEAR(r.perplexity, 100.0, 1e-9);
}

TEST(Metrics, AttachmentProxies) {
  std::vector<std::vector<int>> gold{{5, 6, 7, 8}, {9, 10}};
  auto perfect = training::attachment_scores(gold, gold);
  EXPECT_EQ(perfect.uas_proxy, 1.0);
  EXPECT_EQ(perfect.las_proxy, 1.0);
  // Right head, wrong relation on the first token; both wrong on the last.
  std::vector<std::vector<int>> pred{{4, 6, 7, 8}, {10, 9}};
  auto s = training::attachment_scores(pred, gold);
  EXPECT_EQ(s.tokens, 3u);
  EXPECT_DOUBLE_EQ(s.uas_proxy, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.las_proxy, 1.0 / 3.0);
  EXPECT_LE(s.las_proxy, s.uas_proxy);
}

// ---- the binary ----------------------------------------------------------

TEST(Binary, ParamCountTable) {
  Result r = run_cli("param-count -M 2 -N 3 --ts 4");
  EXPECT_EQ(r.code, 0) << r.out;
  for (const char* n : {"72", "54", "87"}) EXPECT_NE(r.out.find(n), std::string::npos) << r.out;
}

TEST(Binary, UsageErrorsAreValidationFailures) {
  EXPECT_EQ(run_cli("").code, 1);
  EXPECT_EQ(run_cli("frobnicate").code, 1);
  EXPECT_EQ(run_cli("train --preset nope --out /dev/null").code, 1);
  EXPECT_EQ(run_cli("toy-sweep --tmin 5 --tmax 3").code, 1);
  EXPECT_EQ(run_cli("eval --checkpoint /nonexistent.json").code, 1);
}

TEST(Binary, GradcheckExitCodes) {
  EXPECT_EQ(run_cli("gradcheck --model dbrnn --cell elstm").code, 0);
  EXPECT_EQ(run_cli("gradcheck --model basic --cell lstm --threshold 0").code, 3);
}

TEST(Binary, TrainTwiceGivesIdenticalCheckpoints) {
  TempDir dir;
  const std::string common = "train --preset toy --set toy_length=6 --epochs 15 --seed 4 --out ";
  ASSERT_EQ(run_cli(common + (dir / "a.json").string()).code, 0);
  ASSERT_EQ(run_cli(common + (dir / "b.json").string()).code, 0);
  const std::string a = slurp(dir / "a.json");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir / "b.json"));
  EXPECT_EQ(slurp(dir / "a.json.epochs.csv"), slurp(dir / "b.json.epochs.csv"));
  auto log = parse_csv(slurp(dir / "a.json.epochs.csv"));
  ASSERT_EQ(log.size(), 16u);
  EXPECT_EQ(log[0][0], "epoch");
}

TEST(Binary, ResumeContinuesStepCounter) {
  TempDir dir;
  const std::string base = "--preset toy --set toy_length=5 --seed 2";
  ASSERT_EQ(run_cli("train " + base + " --epochs 3 --out " + (dir / "a.json").string()).code, 0);
  ASSERT_EQ(run_cli("train --resume " + (dir / "a.json").string() + " --epochs 5 --out " +
                    (dir / "b.json").string())
                .code,
            0);
  ASSERT_EQ(run_cli("train " + base + " --epochs 5 --out " + (dir / "c.json").string()).code, 0);
  auto b = checkpoint::load(dir / "b.json");
  auto c = checkpoint::load(dir / "c.json");
  EXPECT_EQ(b.state.epoch, 5u);
  EXPECT_EQ(b.state.step, c.state.step);
  EXPECT_EQ(checkpoint::serialize(b), checkpoint::serialize(c));
}

TEST(Binary, EvalReportsMetrics) {
  TempDir dir;
  const auto ck = (dir / "lm.json").string();
  ASSERT_EQ(run_cli("train --preset lm --epochs 1 --data " + (kData / "lm_corpus.txt").string() +
                    " --out " + ck)
                .code,
            0);
  Result r = run_cli("eval --checkpoint " + ck + " --data " + (kData / "lm_valid.txt").string());
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("perplexity"), std::string::npos) << r.out;
  EXPECT_EQ(run_cli("eval --checkpoint " + ck + " --preset pos").code, 1);
}

TEST(Binary, DpEvalLabelsProxies) {
  TempDir dir;
  const auto ck = (dir / "dp.json").string();
  ASSERT_EQ(run_cli("train --preset dp --set embedding_dim=4 --set hidden_dim=4 --epochs 1 "
                    "--data " +
                    (kData / "tiny_corpus.conllu").string() + " --out " + ck)
                .code,
            0);
  Result r = run_cli("eval --checkpoint " + ck);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("uas_proxy"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("not tree-scored"), std::string::npos) << r.out;
}

TEST(Binary, ToySweepRowsAndSchema) {
  Result r = run_cli("toy-sweep --tmin 3 --tmax 4 --cells lstm,elstm --seeds 1,2 --epochs 3");
  ASSERT_EQ(r.code, 0);
  auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 1u + 2 * 2 * 2);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"T", "cell", "seed", "final_loss", "accuracy"}));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].size(), 5u);
    const double loss = std::stod(rows[i][3]);
    const double acc = std::stod(rows[i][4]);
    EXPECT_TRUE(std::isfinite(loss));
    EXPECT_GE(acc, 0.0);
    EXPECT_LE(acc, 1.0);
  }
  EXPECT_EQ(rows[1][0], "3");
  EXPECT_EQ(rows[1][1], "elstm");
  EXPECT_EQ(rows.back()[0], "4");
  EXPECT_EQ(rows.back()[1], "lstm");
}

TEST(Binary, SweepIsIndependentOfThreadCount) {
  const std::string args = "toy-sweep --tmin 2 --tmax 3 --cells lstm,elstm --seeds 1,2 --epochs 2";
  Result one = run_cli(args);
  setenv("ELSTM_LAB_THREADS", "3", 1);
  Result threaded = run_cli(args);
  unsetenv("ELSTM_LAB_THREADS");
  EXPECT_EQ(one.code, 0);
  EXPECT_EQ(one.out, threaded.out);
  setenv("ELSTM_LAB_THREADS", "zero", 1);
  EXPECT_EQ(run_cli(args).code, 1);
  unsetenv("ELSTM_LAB_THREADS");
}

TEST(Binary, MemoryResponse) {
  TempDir dir;
  const auto lstm = (dir / "lstm.json").string();
  const auto gru = (dir / "gru.json").string();
  ASSERT_EQ(run_cli("train --preset toy --cell lstm --set toy_length=8 --epochs 5 --out " + lstm)
                .code,
            0);
  ASSERT_EQ(run_cli("train --preset toy --cell gru --set toy_length=8 --epochs 1 --out " + gru)
                .code,
            0);
  Result r = run_cli("memory-response --checkpoint " + lstm + " --length 8 --position 3");
  ASSERT_EQ(r.code, 0);
  auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0][0], "position");
  EXPECT_EQ(rows[1][0], "1");
  EXPECT_EQ(rows[8][0], "8");
  EXPECT_EQ(run_cli("memory-response --checkpoint " + gru).code, 1);
  EXPECT_EQ(run_cli("memory-response --checkpoint " + lstm + " --length 8 --position 9").code, 1);
}
