#include "elstm/model.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "elstm/errors.h"
#include "elstm/numkernel.h"
#include "elstm/rng.h"

namespace elstm::models {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::BasicRNN: return "basic";
    case ModelKind::BRNN: return "brnn";
    case ModelKind::Seq2Seq: return "seq2seq";
    case ModelKind::Seq2SeqAttn: return "seq2seq-attn";
    case ModelKind::DBRNN: return "dbrnn";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  for (ModelKind k : {ModelKind::BasicRNN, ModelKind::BRNN, ModelKind::Seq2Seq,
                      ModelKind::Seq2SeqAttn, ModelKind::DBRNN}) {
    if (s == to_string(k)) return k;
  }
  throw ValidationError("unknown model kind '" + std::string(s) +
                        "' (expected basic, brnn, seq2seq, seq2seq-attn or dbrnn)");
}

std::string_view to_string(CombinationMode mode) {
  return mode == CombinationMode::Logits ? "logits" : "probability-mix";
}

CombinationMode parse_combination_mode(std::string_view s) {
  if (s == "logits") return CombinationMode::Logits;
  if (s == "probability-mix") return CombinationMode::ProbabilityMix;
  throw ValidationError("unknown combination mode '" + std::string(s) + "'");
}

bool is_seq2seq(ModelKind kind) {
  return kind == ModelKind::Seq2Seq || kind == ModelKind::Seq2SeqAttn;
}

bool has_branches(ModelKind kind) {
  return kind == ModelKind::BRNN || kind == ModelKind::DBRNN;
}

void ModelConfig::validate() const {
  std::vector<std::string> problems;
  auto require = [&](bool ok, const std::string& msg) {
    if (!ok) problems.push_back(msg);
  };
  require(source_vocab > 0, "source vocabulary is empty");
  require(target_vocab > 0, "target vocabulary is empty");
  require(embedding_dim > 0, "embedding dimension must be positive");
  require(hidden_dim > 0, "hidden dimension must be positive");
  require(scale_period >= 1, "T_s must be >= 1");
  require(targets_per_step == 1 || targets_per_step == 2,
          "targets per step must be 1 or 2");
  require(!is_seq2seq(kind) || targets_per_step == 1,
          "seq2seq models emit one target per decode step");
  require(!is_seq2seq(kind) || max_decode_length >= 1,
          "max decode length must be >= 1");
  auto in_vocab = [&](int id) {
    return id >= 0 && static_cast<std::size_t>(id) < target_vocab;
  };
  require(in_vocab(pad_id) && in_vocab(start_id) && in_vocab(stop_id),
          "special token ids must lie inside the target vocabulary");
  require(pad_id != start_id && pad_id != stop_id && start_id != stop_id,
          "pad, start and stop ids must be distinct");
  require(cell != CellKind::GRU || input_mode == InputMode::ConcatPrevOutput,
          "the GRU cell does not support input-only mode");
  require(loss_weights.forward >= 0 && loss_weights.backward >= 0 &&
              loss_weights.combined >= 0,
          "loss weights must be non-negative");
  require(!prediction_feedback || kind == ModelKind::DBRNN,
          "prediction feedback applies to the DBRNN only");
  if (!problems.empty()) {
    std::string msg = "invalid model configuration:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ValidationError(msg);
  }
}

namespace {

std::vector<std::string> prefixes_for(ModelKind kind) {
  switch (kind) {
    case ModelKind::BasicRNN: return {"rnn"};
    case ModelKind::BRNN: return {"fwd", "bwd"};
    case ModelKind::Seq2Seq:
    case ModelKind::Seq2SeqAttn: return {"enc", "dec"};
    case ModelKind::DBRNN: return {"lower_f", "lower_b", "upper_f", "upper_b"};
  }
  return {};
}

cells::CellShape shape_for(const ModelConfig& cfg, const std::string& prefix) {
  cells::CellShape sh;
  sh.kind = cfg.cell;
  sh.mode = cfg.input_mode;
  sh.hidden_dim = cfg.hidden_dim;
  sh.scale_period = cfg.scale_period;
  sh.input_dim = cfg.embedding_dim;
  if (prefix == "dec" && cfg.kind == ModelKind::Seq2SeqAttn) {
    sh.input_dim = cfg.embedding_dim + cfg.hidden_dim;
  } else if (prefix == "upper_f" || prefix == "upper_b") {
    sh.input_dim = 2 * cfg.hidden_dim + (cfg.prediction_feedback ? cfg.embedding_dim : 0);
  }
  return sh;
}

std::size_t attention_width(const ModelConfig& cfg) {
  return cfg.attention_dim ? cfg.attention_dim : cfg.hidden_dim;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Tensor initial_value(const std::string& name, const std::vector<std::size_t>& shape,
                     Rng& rng) {
  if (shape.size() == 1) return Tensor(shape[0]);  // biases and comb.alpha
  Tensor t(shape[0], shape[1]);
  if (ends_with(name, ".scale")) {
    t.fill(1.0);
  } else if (name == "comb.W_f" || name == "comb.W_b") {
    for (std::size_t i = 0; i < shape[0]; ++i) t.at(i, i) = 0.5;
  } else {
    const double r = 1.0 / std::sqrt(static_cast<double>(shape[1]));
    for (double& v : t.values()) v = rng.uniform(-r, r);
  }
  return t;
}

}  // namespace

std::vector<std::pair<std::string, std::vector<std::size_t>>> Model::layout(
    const ModelConfig& cfg) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
  const std::size_t n = cfg.hidden_dim, e = cfg.embedding_dim, k = cfg.target_vocab;
  const std::size_t rk = cfg.targets_per_step * k;
  auto add = [&](std::string name, std::vector<std::size_t> shape) {
    out.emplace_back(std::move(name), std::move(shape));
  };
  auto add_cell = [&](const std::string& prefix) {
    cells::CellParams p = cells::zero_cell(shape_for(cfg, prefix));
    cells::for_each_slot(p, [&](const char* name, std::size_t rows, std::size_t cols,
                                const Tensor&) {
      if (cols == 0) add(prefix + "." + name, {rows});
      else add(prefix + "." + name, {rows, cols});
    });
  };
  auto add_head = [&](const std::string& prefix, std::size_t width) {
    add(prefix + ".W", {width, n});
    add(prefix + ".b", {width});
  };
  auto add_comb = [&] {
    if (cfg.combination == CombinationMode::Logits) {
      add("comb.W_f", {k, k});
      add("comb.W_b", {k, k});
    } else {
      add("comb.alpha", {2});
    }
  };

  add("embed.source", {cfg.source_vocab, e});
  switch (cfg.kind) {
    case ModelKind::BasicRNN:
      add_cell("rnn");
      add_head("out", rk);
      break;
    case ModelKind::BRNN:
      add_cell("fwd");
      add_cell("bwd");
      add_head("out_f", rk);
      add_head("out_b", rk);
      add_comb();
      break;
    case ModelKind::Seq2Seq:
    case ModelKind::Seq2SeqAttn:
      add("embed.target", {k, e});
      add_cell("enc");
      add_cell("dec");
      add_head("out", k);
      if (cfg.kind == ModelKind::Seq2SeqAttn) {
        const std::size_t a = attention_width(cfg);
        add("attn.W", {a, 2 * n});
        add("attn.b", {a});
        add("attn.v", {1, a});
      }
      break;
    case ModelKind::DBRNN:
      if (cfg.prediction_feedback) add("embed.target", {k, e});
      for (const auto& p : prefixes_for(cfg.kind)) add_cell(p);
      add_head("out_f", rk);
      add_head("out_b", rk);
      add_comb();
      break;
  }
  return out;
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  for (const auto& [name, shape] : layout(config_)) {
    tape_.add(name, initial_value(name, shape, rng));
  }
}

Model::Model(ModelConfig config, ad::ParamTape tape)
    : config_(std::move(config)), tape_(std::move(tape)) {
  config_.validate();
  const auto expected = layout(config_);
  for (const auto& [name, shape] : expected) {
    if (!tape_.contains(name)) throw ValidationError("missing parameter " + name);
    if (tape_.at(name).value.shape() != shape) {
      throw ValidationError("parameter " + name + " has shape " +
                            tape_.at(name).value.shape_string() + ", expected " +
                            shape_string(shape));
    }
  }
  if (tape_.size() != expected.size()) {
    throw ValidationError("unexpected extra parameters for this configuration");
  }
}

void Model::freeze(const std::string& name) {
  frozen_[name] = tape_.remove(name);
}

const Tensor& Model::value(const std::string& name) const {
  if (auto it = frozen_.find(name); it != frozen_.end()) return it->second;
  return tape_.at(name).value;
}

Tensor& Model::mutable_value(const std::string& name) {
  if (auto it = frozen_.find(name); it != frozen_.end()) return it->second;
  return tape_.at(name).value;
}

std::vector<std::string> Model::cell_prefixes() const { return prefixes_for(config_.kind); }

cells::CellShape Model::cell_shape(const std::string& prefix) const {
  return shape_for(config_, prefix);
}

cells::CellParams Model::cell_params(const std::string& prefix) const {
  cells::CellParams p = cells::zero_cell(cell_shape(prefix));
  cells::for_each_slot(p, [&](const char* name, std::size_t, std::size_t, Tensor& t) {
    t = value(prefix + "." + name);
  });
  return p;
}

Binder trainable_binder(Model& model, ad::Graph& g) {
  return [&model, &g](const std::string& name) {
    auto& frozen = model.frozen();
    if (auto it = frozen.find(name); it != frozen.end()) return g.reference(it->second);
    return g.param(model.tape().at(name));
  };
}

Binder constant_binder(const Model& model, ad::Graph& g) {
  return [&model, &g](const std::string& name) { return g.reference(model.value(name)); };
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// ---- Graph construction -----------------------------------------------------

namespace {

using ad::Graph;
using ad::Var;
using VarState = cells::CellStateT<Var>;

cells::CellState snapshot(const Graph& g, const VarState& s) {
  return {g.value(s.c), g.value(s.h)};
}

class Builder {
 public:
  Builder(Graph& g, const ModelConfig& cfg, const Binder& bind)
      : g_(g), cfg_(cfg), bind_(bind) {}

  Var param(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    Var v = bind_(name);
    cache_.emplace(name, v);
    return v;
  }

  cells::CellWeights<Var> cell(const std::string& prefix) {
    cells::CellWeights<Var> w;
    w.shape = shape_for(cfg_, prefix);
    cells::for_each_slot(w, [&](const char* name, std::size_t, std::size_t, Var& v) {
      v = param(prefix + "." + name);
    });
    return w;
  }

  Var embed(const std::string& table, int id) {
    const std::size_t rows = g_.value(param(table)).rows();
    if (id < 0 || static_cast<std::size_t>(id) >= rows) {
      throw ValidationError("unknown token id " + std::to_string(id) + " for " + table +
                            " of size " + std::to_string(rows));
    }
    return g_.row(param(table), static_cast<std::size_t>(id));
  }

  VarState zero_state() {
    Var z = g_.zeros(cfg_.hidden_dim);
    return {z, z};
  }

  // Runs a cell over xs (optionally right to left); outputs are aligned with
  // input positions.
  std::vector<Var> run(const cells::CellWeights<Var>& w, const std::vector<Var>& xs,
                       bool reverse, VarState* final_state = nullptr) {
    std::vector<Var> hs(xs.size());
    VarState s = zero_state();
    for (std::size_t step = 0; step < xs.size(); ++step) {
      const std::size_t pos = reverse ? xs.size() - 1 - step : step;
      s = cells::step(g_, w, s, xs[pos], step + 1);
      hs[pos] = s.h;
    }
    if (final_state) *final_state = s;
    return hs;
  }

  Var project(const std::string& head, Var h) {
    return g_.affine(param(head + ".W"), h, param(head + ".b"));
  }

  std::vector<Var> split(Var logits) {
    if (cfg_.targets_per_step == 1) return {logits};
    std::vector<Var> parts;
    for (std::size_t j = 0; j < cfg_.targets_per_step; ++j) {
      parts.push_back(g_.slice(logits, j * cfg_.target_vocab, cfg_.target_vocab));
    }
    return parts;
  }

  Var combine(Var lf, Var lb) {
    if (cfg_.combination == CombinationMode::Logits) {
      return g_.add(g_.matvec(param("comb.W_f"), lf), g_.matvec(param("comb.W_b"), lb));
    }
    Var alpha = g_.softmax(param("comb.alpha"));
    return g_.add(g_.scale_by(g_.softmax(lf), g_.element(alpha, 0)),
                  g_.scale_by(g_.softmax(lb), g_.element(alpha, 1)));
  }

  std::vector<Var> embed_all(std::span<const int> ids) {
    std::vector<Var> xs;
    xs.reserve(ids.size());
    for (int id : ids) xs.push_back(embed("embed.source", id));
    return xs;
  }

  GraphOutputs basic(const Example& ex) {
    GraphOutputs out;
    auto hs = run(cell("rnn"), embed_all(ex.input), false);
    for (Var h : hs)
      for (Var part : split(project("out", h))) out.main.push_back(part);
    return out;
  }

  void pool_branches(GraphOutputs& out, const std::vector<Var>& lf,
                     const std::vector<Var>& lb) {
    out.main_is_probability = cfg_.combination == CombinationMode::ProbabilityMix;
    for (std::size_t t = 0; t < lf.size(); ++t) {
      auto fparts = split(lf[t]);
      auto bparts = split(lb[t]);
      for (std::size_t j = 0; j < fparts.size(); ++j) {
        out.forward.push_back(fparts[j]);
        out.backward.push_back(bparts[j]);
        out.main.push_back(combine(fparts[j], bparts[j]));
      }
    }
  }

  GraphOutputs brnn(const Example& ex) {
    GraphOutputs out;
    auto xs = embed_all(ex.input);
    auto hf = run(cell("fwd"), xs, false);
    auto hb = run(cell("bwd"), xs, true);
    std::vector<Var> lf, lb;
    for (std::size_t t = 0; t < xs.size(); ++t) {
      lf.push_back(project("out_f", hf[t]));
      lb.push_back(project("out_b", hb[t]));
    }
    pool_branches(out, lf, lb);
    return out;
  }

  GraphOutputs dbrnn(const Example& ex, Decoding decoding) {
    GraphOutputs out;
    auto xs = embed_all(ex.input);
    auto hf = run(cell("lower_f"), xs, false);
    auto hb = run(cell("lower_b"), xs, true);
    const std::size_t T = xs.size(), r = cfg_.targets_per_step;
    std::vector<Var> h(T);
    for (std::size_t t = 0; t < T; ++t) h[t] = g_.concat(hf[t], hb[t]);

    const bool feedback = cfg_.prediction_feedback;
    const bool teacher = decoding == Decoding::TeacherForced;
    if (feedback && teacher && ex.target.size() != T * r) {
      throw ValidationError("dbrnn: target length does not match input length");
    }
    auto upper_input = [&](std::size_t t, int prev) {
      return feedback ? g_.concat(h[t], embed("embed.target", prev)) : h[t];
    };
    // Greedy symbol for feedback from a branch's logits at one position.
    auto greedy = [&](Var logits, bool last_chunk) {
      auto parts = split(logits);
      Var chosen = last_chunk ? parts.back() : parts.front();
      return static_cast<int>(argmax(g_.value(chosen).values()));
    };

    std::vector<Var> lf(T), lb(T);
    auto wf = cell("upper_f");
    VarState s = zero_state();
    for (std::size_t t = 0; t < T; ++t) {
      int prev = cfg_.start_id;
      if (t > 0) prev = teacher ? ex.target[t * r - 1] : greedy(lf[t - 1], true);
      s = cells::step(g_, wf, s, upper_input(t, prev), t + 1);
      lf[t] = project("out_f", s.h);
    }
    auto wb = cell("upper_b");
    s = zero_state();
    for (std::size_t step = 0; step < T; ++step) {
      const std::size_t t = T - 1 - step;
      int prev = cfg_.start_id;
      if (step > 0) prev = teacher ? ex.target[(t + 1) * r] : greedy(lb[t + 1], false);
      s = cells::step(g_, wb, s, upper_input(t, prev), step + 1);
      lb[t] = project("out_b", s.h);
    }
    pool_branches(out, lf, lb);
    return out;
  }

  GraphOutputs seq2seq(const Example& ex, Decoding decoding) {
    GraphOutputs out;
    const bool attn = cfg_.kind == ModelKind::Seq2SeqAttn;
    auto xs = embed_all(ex.input);
    VarState enc_final;
    auto enc_h = run(cell("enc"), xs, false, &enc_final);
    out.encoder_final = snapshot(g_, enc_final);

    // The decoder starts from the encoder's final state.
    VarState s = enc_final;
    out.decoder_initial = snapshot(g_, s);
    auto wd = cell("dec");
    const bool teacher = decoding == Decoding::TeacherForced;
    const std::size_t limit = teacher ? ex.target.size() : cfg_.max_decode_length;
    int prev = cfg_.start_id;
    for (std::size_t t = 1; t <= limit; ++t) {
      Var in = embed("embed.target", prev);
      if (attn) {
        std::vector<Var> scores;
        scores.reserve(enc_h.size());
        for (Var hi : enc_h) {
          Var hidden = g_.affine_tanh(param("attn.W"), g_.concat(s.h, hi), param("attn.b"));
          scores.push_back(g_.matvec(param("attn.v"), hidden));
        }
        Var weights = g_.softmax(g_.stack(scores));
        out.attention.push_back(g_.value(weights));
        Var ctx = g_.scale_by(enc_h[0], g_.element(weights, 0));
        for (std::size_t i = 1; i < enc_h.size(); ++i) {
          ctx = g_.add(ctx, g_.scale_by(enc_h[i], g_.element(weights, i)));
        }
        in = g_.concat(in, ctx);
      }
      s = cells::step(g_, wd, s, in, t);
      Var logits = project("out", s.h);
      out.main.push_back(logits);
      if (teacher) {
        prev = ex.target[t - 1];
        continue;
      }
      const int pred = static_cast<int>(argmax(g_.value(logits).values()));
      if (pred == cfg_.stop_id) break;
      out.predictions.push_back(pred);
      prev = pred;
      if (t == limit) out.truncated = true;
    }
    return out;
  }

 private:
  Graph& g_;
  const ModelConfig& cfg_;
  const Binder& bind_;
  std::map<std::string, Var> cache_;
};

}  // namespace

GraphOutputs build(Graph& g, const ModelConfig& config, const Binder& bind,
                   const Example& example, Decoding decoding) {
  if (example.input.empty()) throw ValidationError("empty input sequence");
  Builder b(g, config, bind);
  switch (config.kind) {
    case ModelKind::BasicRNN: return b.basic(example);
    case ModelKind::BRNN: return b.brnn(example);
    case ModelKind::Seq2Seq:
    case ModelKind::Seq2SeqAttn: return b.seq2seq(example, decoding);
    case ModelKind::DBRNN: return b.dbrnn(example, decoding);
  }
  throw ValidationError("unknown model kind");
}

// ---- Losses -------------------------------------------------------------------

namespace {

constexpr double kProbabilityFloor = 1e-12;

Var token_loss(Graph& g, Var out, bool is_probability, std::size_t label,
               LossRecord& record) {
  if (is_probability) return g.negative_log(out, label, kProbabilityFloor, &record.clamped);
  return g.softmax_cross_entropy(out, label);
}

}  // namespace

Var build_loss(Graph& g, const ModelConfig& cfg, const GraphOutputs& out,
               const Example& ex, LossRecord& record) {
  if (out.main.size() != ex.target.size()) {
    throw ValidationError("length mismatch: model produced " +
                          std::to_string(out.main.size()) + " outputs for " +
                          std::to_string(ex.target.size()) + " targets");
  }
  const bool dbrnn = cfg.kind == ModelKind::DBRNN;
  std::vector<Var> e_terms, f_terms, b_terms;
  for (std::size_t i = 0; i < ex.target.size(); ++i) {
    const int y = ex.target[i];
    if (y == cfg.pad_id) continue;
    if (y < 0 || static_cast<std::size_t>(y) >= cfg.target_vocab) {
      throw ValidationError("unknown target id " + std::to_string(y));
    }
    const auto label = static_cast<std::size_t>(y);
    Var e = token_loss(g, out.main[i], out.main_is_probability, label, record);
    e_terms.push_back(e);
    record.e += g.scalar(e);
    ++record.tokens;
    if (argmax(g.value(out.main[i]).values()) == label) ++record.correct;
    if (dbrnn) {
      Var ef = g.softmax_cross_entropy(out.forward[i], label);
      Var eb = g.softmax_cross_entropy(out.backward[i], label);
      f_terms.push_back(ef);
      b_terms.push_back(eb);
      record.e_f += g.scalar(ef);
      record.e_b += g.scalar(eb);
    }
  }
  ++record.examples;
  if (e_terms.empty()) return g.zeros(1);
  if (!dbrnn) {
    for (Var e : e_terms) record.terms.push_back(g.scalar(e));
    Var total = g.sum(e_terms);
    record.objective += g.scalar(total);
    return total;
  }
  std::vector<Var> parts;
  const LossWeights& w = cfg.loss_weights;
  for (std::size_t i = 0; i < e_terms.size(); ++i) {
    if (w.forward != 0.0) record.terms.push_back(w.forward * g.scalar(f_terms[i]));
    if (w.backward != 0.0) record.terms.push_back(w.backward * g.scalar(b_terms[i]));
    if (w.combined != 0.0) record.terms.push_back(w.combined * g.scalar(e_terms[i]));
  }
  if (w.forward != 0.0) parts.push_back(g.scale(g.sum(f_terms), w.forward));
  if (w.backward != 0.0) parts.push_back(g.scale(g.sum(b_terms), w.backward));
  if (w.combined != 0.0) parts.push_back(g.scale(g.sum(e_terms), w.combined));
  if (parts.empty()) return g.zeros(1);
  Var total = g.sum(parts);
  record.objective += g.scalar(total);
  return total;
}

void finalize(LossRecord& r, const LossWeights& w, ModelKind kind) {
  if (r.tokens > 0) {
    r.e /= r.tokens;
    r.e_f /= r.tokens;
    r.e_b /= r.tokens;
  }
  if (r.examples > 0) r.objective /= r.examples;
  r.total = kind == ModelKind::DBRNN
                ? w.forward * r.e_f + w.backward * r.e_b + w.combined * r.e
                : r.e;
}

LossRecord backprop_sequence(Model& model, std::span<const Example> batch) {
  if (batch.empty()) throw ValidationError("backprop_sequence: empty batch");
  model.tape().zero_grads();
  LossRecord record;
  const double seed = 1.0 / static_cast<double>(batch.size());
  for (const Example& ex : batch) {
    ad::Graph g;
    GraphOutputs out = build(g, model.config(), trainable_binder(model, g), ex,
                             Decoding::TeacherForced);
    Var loss = build_loss(g, model.config(), out, ex, record);
    if (!std::isfinite(g.scalar(loss))) throw NumericError("non-finite loss");
    g.backward(loss, seed);
  }
  model.tape().check_grads_finite();
  finalize(record, model.config().loss_weights, model.config().kind);
  return record;
}

LossRecord evaluate_loss(const Model& model, std::span<const Example> batch) {
  LossRecord record;
  for (const Example& ex : batch) {
    ad::Graph g;
    GraphOutputs out = build(g, model.config(), constant_binder(model, g), ex,
                             Decoding::TeacherForced);
    build_loss(g, model.config(), out, ex, record);
  }
  finalize(record, model.config().loss_weights, model.config().kind);
  return record;
}

// ---- Inference wrappers -------------------------------------------------------

namespace {

Example input_only(std::span<const int> xs) {
  return Example{std::vector<int>(xs.begin(), xs.end()), {}};
}

std::vector<Tensor> values_of(const Graph& g, const std::vector<Var>& vars) {
  std::vector<Tensor> out;
  out.reserve(vars.size());
  for (Var v : vars) out.push_back(g.value(v));
  return out;
}

std::vector<Tensor> probabilities(const Graph& g, const std::vector<Var>& vars,
                                  bool already) {
  std::vector<Tensor> out;
  for (Var v : vars) out.push_back(already ? g.value(v) : num::softmax(g.value(v)));
  return out;
}

void require_kind(const Model& m, std::initializer_list<ModelKind> kinds, const char* op) {
  for (ModelKind k : kinds)
    if (m.config().kind == k) return;
  throw ValidationError(std::string(op) + ": model is " +
                        std::string(to_string(m.config().kind)));
}

BranchOutputs branch_outputs(const Graph& g, const GraphOutputs& out) {
  BranchOutputs b;
  b.p_f = probabilities(g, out.forward, false);
  b.p_b = probabilities(g, out.backward, false);
  b.p = probabilities(g, out.main, out.main_is_probability);
  return b;
}

}  // namespace

std::vector<Tensor> forward_basic(const Model& model, std::span<const int> xs) {
  require_kind(model, {ModelKind::BasicRNN}, "forward_basic");
  ad::Graph g;
  auto out = build(g, model.config(), constant_binder(model, g), input_only(xs),
                   Decoding::TeacherForced);
  return values_of(g, out.main);
}

BranchOutputs forward_brnn(const Model& model, std::span<const int> xs) {
  require_kind(model, {ModelKind::BRNN}, "forward_brnn");
  ad::Graph g;
  auto out = build(g, model.config(), constant_binder(model, g), input_only(xs),
                   Decoding::TeacherForced);
  return branch_outputs(g, out);
}

BranchOutputs forward_dbrnn(const Model& model, std::span<const int> xs,
                            const std::vector<int>* targets) {
  require_kind(model, {ModelKind::DBRNN}, "forward_dbrnn");
  Example ex = input_only(xs);
  if (targets) ex.target = *targets;
  ad::Graph g;
  auto out = build(g, model.config(), constant_binder(model, g), ex,
                   targets ? Decoding::TeacherForced : Decoding::FreeRunning);
  return branch_outputs(g, out);
}

DecodeOutput forward_seq2seq(const Model& model, std::span<const int> xs,
                             const std::vector<int>* targets, bool teacher_forcing) {
  require_kind(model, {ModelKind::Seq2Seq, ModelKind::Seq2SeqAttn}, "forward_seq2seq");
  if (teacher_forcing && !targets) {
    throw ValidationError("forward_seq2seq: teacher forcing needs targets");
  }
  Example ex = input_only(xs);
  if (teacher_forcing) ex.target = *targets;
  ad::Graph g;
  auto out = build(g, model.config(), constant_binder(model, g), ex,
                   teacher_forcing ? Decoding::TeacherForced : Decoding::FreeRunning);
  DecodeOutput d;
  d.logits = values_of(g, out.main);
  d.predictions = std::move(out.predictions);
  d.truncated = out.truncated;
  d.attention = std::move(out.attention);
  d.encoder_final = std::move(out.encoder_final);
  d.decoder_initial = std::move(out.decoder_initial);
  return d;
}

std::vector<int> predict(const Model& model, const Example& example) {
  ad::Graph g;
  const bool s2s = is_seq2seq(model.config().kind);
  auto out = build(g, model.config(), constant_binder(model, g), example,
                   Decoding::FreeRunning);
  if (s2s) return out.predictions;
  std::vector<int> preds;
  for (Var v : out.main) preds.push_back(static_cast<int>(argmax(g.value(v).values())));
  return preds;
}

}  // namespace elstm::models
