#include "commands.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "elstm/checkpoint.h"
#include "elstm/config.h"
#include "elstm/data.h"
#include "elstm/errors.h"
#include "elstm/gradcheck.h"
#include "elstm/memory.h"
#include "elstm/model.h"
#include "elstm/numkernel.h"
#include "elstm/training.h"

namespace elstm::cli {

namespace {

namespace fs = std::filesystem;

// Flags shared by the verbs that take a configuration.
struct CommonOptions {
  std::string config;
  std::string preset;
  std::string model;
  std::string cell;
  std::string input_mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> ts;
  std::optional<std::size_t> epochs;
  std::vector<std::string> set;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config, "key = value configuration file");
  app->add_option("--preset", o.preset, "toy | lm | pos | dp");
  app->add_option("--model", o.model, "basic | brnn | seq2seq | seq2seq-attn | dbrnn");
  app->add_option("--cell", o.cell, "srn | lstm | gru | sgru | elstm");
  app->add_option("--input-mode", o.input_mode, "concat | input-only");
  app->add_option("--seed", o.seed, "random seed");
  app->add_option("--ts", o.ts, "ELSTM scaling period");
  app->add_option("--epochs", o.epochs, "training epochs");
  app->add_option("--set", o.set, "extra key=value overrides");
}

std::map<std::string, std::string> gather(const CommonOptions& o) {
  std::map<std::string, std::string> kv;
  if (!o.config.empty()) kv = config::read_key_values(o.config);
  if (!o.preset.empty()) kv["preset"] = o.preset;
  if (!o.model.empty()) kv["model"] = o.model;
  if (!o.cell.empty()) kv["cell"] = o.cell;
  if (!o.input_mode.empty()) kv["input_mode"] = o.input_mode;
  if (o.seed) kv["seed"] = std::to_string(*o.seed);
  if (o.ts) kv["ts"] = std::to_string(*o.ts);
  if (o.epochs) kv["epochs"] = std::to_string(*o.epochs);
  for (const auto& s : o.set) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  return out;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  CommonOptions common;
  std::string out = "checkpoint.json";
  std::string log;
  std::string resume;
  std::string data;
  std::string eval_data;
};

std::vector<models::Example> task_examples(const config::RunConfig& run,
                                           const std::string& path,
                                           const data::Vocabulary& source,
                                           const data::Vocabulary& target) {
  if (run.task == config::Task::Toy) return data::detect_a_examples(run.toy_length);
  return config::load_examples(run.task, path, source, target);
}

int cmd_train(const TrainArgs& a) {
  config::RunConfig run;
  data::Vocabulary source, target;
  std::vector<models::Example> examples;
  std::optional<models::Model> model;
  training::TrainState state;

  if (!a.resume.empty()) {
    auto ck = checkpoint::load(a.resume);
    run = ck.run;
    if (a.common.epochs) run.train.epochs = *a.common.epochs;
    if (!a.data.empty()) run.train_data = a.data;
    source = data::Vocabulary::from_tokens(ck.source_vocab);
    target = data::Vocabulary::from_tokens(ck.target_vocab);
    examples = task_examples(run, run.train_data, source, target);
    model.emplace(checkpoint::restore_model(ck));
    state = ck.state;
  } else {
    auto kv = gather(a.common);
    if (!a.data.empty()) kv["train_data"] = a.data;
    if (!a.eval_data.empty()) kv["eval_data"] = a.eval_data;
    run = config::resolve(kv);
    auto d = config::load_task_data(run);
    source = std::move(d.source);
    target = std::move(d.target);
    examples = std::move(d.train);
    model.emplace(run.model, run.train.seed);
  }
  examples = training::prepare_examples(run.model, std::move(examples));

  training::TrainOptions opts = run.train;
  opts.epochs = run.train.epochs > state.epoch ? run.train.epochs - state.epoch : 0;

  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".epochs.csv") : fs::path(a.log);
  const bool append = !a.resume.empty() && fs::exists(log_path);
  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
  if (!log) throw ValidationError("cannot write " + log_path.string());
  log << std::setprecision(std::numeric_limits<double>::max_digits10);
  if (!append) log << "epoch,step,objective,cross_entropy,perplexity,accuracy\n";

  std::cout << "task " << config::to_string(run.task) << ", model "
            << models::to_string(run.model.kind) << ", cell "
            << cells::to_string(run.model.cell) << ", "
            << model->tape().parameter_count() << " trainable parameters, "
            << examples.size() << " sequences\n";
  training::train(*model, examples, opts, state, [&](const training::EpochStats& s) {
    log << s.epoch << ',' << state.step << ',' << s.objective << ',' << s.cross_entropy
        << ',' << s.perplexity << ',' << s.accuracy << '\n';
    std::cout << "epoch " << s.epoch << "  loss " << s.cross_entropy;
    if (run.task == config::Task::LM) std::cout << "  perplexity " << s.perplexity;
    else std::cout << "  accuracy " << s.accuracy;
    std::cout << '\n';
  });

  checkpoint::save(checkpoint::capture(*model, run, state, source, target), a.out);
  std::cout << "wrote " << a.out << " (step " << state.step << ", epoch " << state.epoch
            << ")\n";
  return kSuccess;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string preset;
};

int cmd_eval(const EvalArgs& a) {
  auto ck = checkpoint::load(a.checkpoint);
  const auto& run = ck.run;
  if (!a.preset.empty() && config::parse_task(a.preset) != run.task) {
    throw ValidationError("checkpoint was trained for task " +
                          std::string(config::to_string(run.task)) + ", not " + a.preset);
  }
  const auto source = data::Vocabulary::from_tokens(ck.source_vocab);
  const auto target = data::Vocabulary::from_tokens(ck.target_vocab);
  std::string path = a.data;
  if (path.empty()) path = run.eval_data.empty() ? run.train_data : run.eval_data;
  auto examples = training::prepare_examples(
      run.model, task_examples(run, path, source, target));
  const models::Model model = checkpoint::restore_model(ck);

  const auto m = training::evaluate(model, examples);
  std::cout << std::setprecision(6) << std::fixed;
  std::cout << "sequences      " << examples.size() << '\n';
  std::cout << "tokens         " << m.tokens << '\n';
  std::cout << "cross_entropy  " << m.cross_entropy << '\n';
  std::cout << "perplexity     " << m.perplexity << '\n';
  std::cout << "accuracy       " << m.accuracy << '\n';
  std::size_t unk_targets = 0;
  for (const auto& ex : examples)
    unk_targets += std::count(ex.target.begin(), ex.target.end(), data::kUnkId);
  if (unk_targets > 0) {
    // Unseen relations or head positions cannot be predicted exactly.
    std::cout << "unk_targets    " << unk_targets << '\n';
  }
  if (run.task == config::Task::DP) {
    std::vector<std::vector<int>> pred, gold;
    for (const auto& ex : examples) {
      pred.push_back(models::predict(model, ex));
      gold.push_back(ex.target);
    }
    const auto s = training::attachment_scores(pred, gold);
    std::cout << "uas_proxy      " << s.uas_proxy
              << "  (per-token head accuracy, not tree-scored)\n";
    std::cout << "las_proxy      " << s.las_proxy
              << "  (per-token relation+head accuracy, not tree-scored)\n";
  }
  return kSuccess;
}

// ---- gradcheck -------------------------------------------------------------

struct GradcheckArgs {
  CommonOptions common;
  double threshold = 1e-4;
  double step = 1e-5;
  std::size_t dim = 3;
  std::size_t length = 4;
  std::size_t vocab = 5;
  std::size_t batch = 2;
  double radius = 1.0;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  auto run = config::resolve(gather(a.common));
  auto cfg = run.model;
  cfg.embedding_dim = a.dim;
  cfg.hidden_dim = a.dim;
  cfg.source_vocab = a.vocab;
  cfg.target_vocab = a.vocab;
  if (!a.common.ts) cfg.scale_period = std::min<std::size_t>(cfg.scale_period, a.length);
  models::Model model(cfg, run.train.seed);
  if (a.radius > 0) ad::perturb_parameters(model, a.radius, run.train.seed + 2);
  const auto batch = ad::random_batch(cfg, a.batch, a.length, run.train.seed + 1);
  ad::GradCheckOptions opts;
  opts.threshold = a.threshold;
  opts.step = a.step;
  const auto report = ad::grad_check(model, batch, opts);
  std::cout << "model " << models::to_string(cfg.kind) << ", cell "
            << cells::to_string(cfg.cell) << ", input mode "
            << cells::to_string(cfg.input_mode) << '\n';
  ad::print_report(std::cout, report);
  return report.passing ? kSuccess : kAcceptanceFailure;
}

// ---- param-count -----------------------------------------------------------

struct ParamCountArgs {
  CommonOptions common;
  std::vector<std::string> cells;
  std::optional<std::size_t> input_dim;
  std::optional<std::size_t> hidden_dim;
};

int cmd_param_count(const ParamCountArgs& a) {
  auto run = config::resolve(gather(a.common));
  std::vector<cells::CellKind> kinds;
  if (!a.cells.empty()) {
    for (const auto& c : a.cells) kinds.push_back(cells::parse_cell_kind(c));
  } else if (!a.common.cell.empty()) {
    kinds.push_back(run.model.cell);
  } else {
    kinds = {cells::CellKind::SRN, cells::CellKind::LSTM, cells::CellKind::GRU,
             cells::CellKind::SimplifiedGRU, cells::CellKind::ELSTM};
  }
  const std::size_t m = a.input_dim.value_or(run.model.embedding_dim);
  const std::size_t n = a.hidden_dim.value_or(run.model.hidden_dim);

  std::cout << std::left << std::setw(8) << "cell" << std::setw(12) << "input_mode"
            << std::setw(6) << "M" << std::setw(6) << "N" << std::setw(6) << "T_s"
            << std::setw(10) << "formula" << std::setw(12) << "registered" << "status\n";
  bool all_match = true;
  for (auto kind : kinds) {
    auto cfg = run.model;
    cfg.kind = models::ModelKind::BasicRNN;
    cfg.cell = kind;
    cfg.embedding_dim = m;
    cfg.hidden_dim = n;
    cfg.source_vocab = 4;
    cfg.target_vocab = 4;
    if (kind == cells::CellKind::GRU) cfg.input_mode = cells::InputMode::ConcatPrevOutput;
    // Count what the model actually registers for its recurrent cell.
    const models::Model model(cfg, run.train.seed);
    const std::size_t registered = model.tape().parameter_count("rnn.");
    const std::size_t formula = cells::formula_parameter_count(model.cell_shape("rnn"));
    const bool ok = registered == formula;
    all_match = all_match && ok;
    std::cout << std::setw(8) << cells::to_string(kind) << std::setw(12)
              << cells::to_string(cfg.input_mode) << std::setw(6) << m << std::setw(6) << n
              << std::setw(6) << cfg.scale_period << std::setw(10) << formula << std::setw(12)
              << registered << (ok ? "match" : "MISMATCH") << '\n';
  }
  return all_match ? kSuccess : kAcceptanceFailure;
}

// ---- toy-sweep -------------------------------------------------------------

struct SweepArgs {
  CommonOptions common;
  std::size_t t_min = 5;
  std::size_t t_max = 5;
  std::vector<std::string> cells = {"lstm", "elstm"};
  std::vector<std::uint64_t> seeds = {1};
  std::string out;
};

struct SweepRow {
  std::size_t T;
  std::string cell;
  std::uint64_t seed;
  double final_loss = 0.0;
  double accuracy = 0.0;
};

std::size_t sweep_threads() {
  const char* env = std::getenv("ELSTM_LAB_THREADS");
  if (!env || !*env) return 1;
  try {
    const long v = std::stol(env);
    if (v >= 1) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  throw ValidationError("ELSTM_LAB_THREADS must be a positive integer");
}

int cmd_toy_sweep(const SweepArgs& a) {
  if (a.t_min < 1 || a.t_min > a.t_max) throw ValidationError("need 1 <= --tmin <= --tmax");
  auto kv = gather(a.common);
  if (!kv.count("preset")) kv["preset"] = "toy";
  const auto base = config::resolve(kv);
  if (base.task != config::Task::Toy) throw ValidationError("toy-sweep needs preset=toy");
  std::vector<cells::CellKind> kinds;
  for (const auto& c : a.cells) kinds.push_back(cells::parse_cell_kind(c));

  std::vector<SweepRow> rows;
  for (std::size_t T = a.t_min; T <= a.t_max; ++T) {
    for (std::size_t c = 0; c < kinds.size(); ++c) {
      for (auto seed : a.seeds) rows.push_back({T, a.cells[c], seed});
    }
  }

  std::atomic<std::size_t> next{0};
  std::mutex io;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < rows.size();) {
      try {
        SweepRow& r = rows[i];
        auto run = base;
        run.toy_length = r.T;
        run.model.cell = cells::parse_cell_kind(r.cell);
        if (!a.common.ts && !kv.count("ts")) run.model.scale_period = r.T;
        run.train.seed = r.seed;
        auto d = config::load_task_data(run);
        models::Model model(run.model, run.train.seed);
        training::TrainState state;
        training::train(model, d.train, run.train, state);
        const auto m = training::evaluate(model, d.train);
        r.final_loss = m.cross_entropy;
        r.accuracy = m.accuracy;
        std::lock_guard<std::mutex> lock(io);
        std::cerr << "T=" << r.T << " " << r.cell << " seed " << r.seed << ": loss "
                  << r.final_loss << ", accuracy " << r.accuracy << '\n';
      } catch (...) {
        std::lock_guard<std::mutex> lock(io);
        if (!failure) failure = std::current_exception();
        next = rows.size();
      }
    }
  };
  const std::size_t n_threads = std::min(sweep_threads(), rows.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::sort(rows.begin(), rows.end(), [](const SweepRow& x, const SweepRow& y) {
    return std::tie(x.T, x.cell, x.seed) < std::tie(y.T, y.cell, y.seed);
  });
  auto emit = [&](std::ostream& out) {
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    out << "T,cell,seed,final_loss,accuracy\n";
    for (const auto& r : rows) {
      out << r.T << ',' << r.cell << ',' << r.seed << ',' << r.final_loss << ','
          << r.accuracy << '\n';
    }
  };
  if (a.out.empty()) {
    emit(std::cout);
  } else {
    auto out = open_out(a.out);
    emit(out);
  }
  return kSuccess;
}

// ---- memory-response -------------------------------------------------------

struct MemoryArgs {
  std::string checkpoint;
  std::optional<std::size_t> length;
  std::optional<std::size_t> position;
  std::string out;
};

int cmd_memory_response(const MemoryArgs& a) {
  auto ck = checkpoint::load(a.checkpoint);
  const auto kind = ck.run.model.cell;
  if (kind != cells::CellKind::LSTM && kind != cells::CellKind::ELSTM) {
    throw ValidationError("memory-response needs an LSTM or ELSTM checkpoint, got " +
                          std::string(cells::to_string(kind)));
  }
  if (ck.run.model.kind != models::ModelKind::BasicRNN) {
    throw ValidationError("memory-response needs a basic single-cell model");
  }
  const models::Model model = checkpoint::restore_model(ck);
  const std::size_t T = a.length.value_or(ck.run.toy_length);
  const std::size_t pos = a.position.value_or((T + 1) / 2);
  if (T < 1 || pos < 1 || pos > T) throw ValidationError("need 1 <= --position <= --length");

  const auto source = data::Vocabulary::from_tokens(ck.source_vocab);
  std::string seq(T, 'B');
  seq[pos - 1] = 'A';
  const Tensor& table = model.value("embed.source");
  std::vector<Tensor> xs;
  for (char ch : seq) {
    auto r = table.row(static_cast<std::size_t>(source.id(std::string(1, ch))));
    xs.push_back(Tensor::vector(std::vector<double>(r.begin(), r.end())));
  }
  const auto params = model.cell_params("rnn");
  const auto inputs = memory::record_gate_inputs(params, xs);
  const auto profile = memory::memory_response(params, inputs, kind);

  // Consistency: the stepped c_T equals Σ m_k plus the carried ELSTM bias.
  cells::CellState s = cells::zero_state(params.shape.hidden_dim);
  for (std::size_t t = 0; t < xs.size(); ++t) s = cells::step(params, s, xs[t], t + 1);
  Tensor expected = profile.total();
  if (kind == cells::CellKind::ELSTM) {
    Tensor carry(params.shape.hidden_dim, 1.0);
    for (std::size_t k = inputs.size(); k-- > 0;) {
      expected = num::add(expected, num::hadamard(carry, params.b_c));
      carry = num::hadamard(
          carry, num::sigmoid(num::add(num::matvec(params.W_f, inputs[k]), params.b_f)));
    }
  }
  const double residual = num::max_abs_diff(expected, s.c);

  if (a.out.empty()) {
    std::cout << std::setprecision(std::numeric_limits<double>::max_digits10);
    memory::write_profile_csv(std::cout, profile);
  } else {
    auto out = open_out(a.out);
    memory::write_profile_csv(out, profile);
  }
  std::cerr << "A at " << pos << " of " << T << ": strength ratio "
            << profile.strength_ratio(pos) << ", c_T residual " << residual << '\n';
  return residual < 1e-9 ? kSuccess : kNumericFailure;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Recurrent cells with extended memory: training and analysis"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(train, train_args.common);
  train->add_option("--out", train_args.out, "checkpoint path");
  train->add_option("--log", train_args.log, "per-epoch CSV log (default <out>.epochs.csv)");
  train->add_option("--resume", train_args.resume, "continue from a checkpoint");
  train->add_option("--data", train_args.data, "training corpus (overrides train_data)");
  train->add_option("--eval-data", train_args.eval_data, "evaluation corpus");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", eval_args.checkpoint, "checkpoint path")->required();
  eval->add_option("--data", eval_args.data, "corpus to score");
  eval->add_option("--preset", eval_args.preset, "expected task");

  GradcheckArgs gc_args;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(gc, gc_args.common);
  gc->add_option("--threshold", gc_args.threshold, "maximum relative error");
  gc->add_option("--step", gc_args.step, "central-difference step");
  gc->add_option("--dim", gc_args.dim, "embedding and hidden width");
  gc->add_option("--length", gc_args.length, "sequence length");
  gc->add_option("--vocab", gc_args.vocab, "vocabulary size");
  gc->add_option("--batch", gc_args.batch, "examples");
  gc->add_option("--radius", gc_args.radius,
                 "check at parameters redrawn uniform(-r, r); 0 checks at initialization");

  ParamCountArgs pc_args;
  auto* pc = app.add_subcommand("param-count", "formula vs registered parameter counts");
  add_common(pc, pc_args.common);
  pc->add_option("--cells", pc_args.cells, "cells to list (default all)")->delimiter(',');
  pc->add_option("-M,--input-dim", pc_args.input_dim, "input width");
  pc->add_option("-N,--hidden-dim", pc_args.hidden_dim, "number of cells");

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("toy-sweep", "detect-A sweep over sequence lengths");
  add_common(sweep, sweep_args.common);
  sweep->add_option("--tmin", sweep_args.t_min, "shortest length");
  sweep->add_option("--tmax", sweep_args.t_max, "longest length");
  sweep->add_option("--cells", sweep_args.cells, "cells to compare")->delimiter(',');
  sweep->add_option("--seeds", sweep_args.seeds, "seeds")->delimiter(',');
  sweep->add_option("--out", sweep_args.out, "CSV path (default stdout)");

  MemoryArgs mem_args;
  auto* mem = app.add_subcommand("memory-response", "per-position memory response CSV");
  mem->add_option("--checkpoint", mem_args.checkpoint, "LSTM or ELSTM checkpoint")->required();
  mem->add_option("--length", mem_args.length, "sample length T");
  mem->add_option("--position", mem_args.position, "1-based position of A");
  mem->add_option("--out", mem_args.out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kValidationFailure;
  }

  try {
    if (*train) return cmd_train(train_args);
    if (*eval) return cmd_eval(eval_args);
    if (*gc) return cmd_gradcheck(gc_args);
    if (*pc) return cmd_param_count(pc_args);
    if (*sweep) return cmd_toy_sweep(sweep_args);
    if (*mem) return cmd_memory_response(mem_args);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const ConvergenceError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationFailure;
  }
  return kValidationFailure;
}

}  // namespace elstm::cli
