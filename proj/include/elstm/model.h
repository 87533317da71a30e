#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "elstm/cells.h"
#include "elstm/graph.h"
#include "elstm/param_tape.h"

namespace elstm::models {

using cells::CellKind;
using cells::InputMode;

enum class ModelKind { BasicRNN, BRNN, Seq2Seq, Seq2SeqAttn, DBRNN };

// How branch outputs are pooled. Logits: softmax(W^f l_f + W^b l_b) with
// trainable K x K matrices. ProbabilityMix: α_f p_f + α_b p_b with a convex
// pair (α = softmax of two trainable scores).
enum class CombinationMode { Logits, ProbabilityMix };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view s);
std::string_view to_string(CombinationMode mode);
CombinationMode parse_combination_mode(std::string_view s);

bool is_seq2seq(ModelKind kind);
bool has_branches(ModelKind kind);

struct LossWeights {
  double forward = 1.0;   // w_f
  double backward = 1.0;  // w_b
  double combined = 1.0;  // w_comb
};

struct ModelConfig {
  ModelKind kind = ModelKind::BasicRNN;
  CellKind cell = CellKind::LSTM;
  InputMode input_mode = InputMode::ConcatPrevOutput;
  std::size_t source_vocab = 0;
  std::size_t target_vocab = 0;
  std::size_t embedding_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t scale_period = 1;  // T_s
  std::size_t attention_dim = 0;  // 0 means hidden_dim
  std::size_t max_decode_length = 100;
  // Output symbols emitted per input step by the aligned models (1 or 2).
  std::size_t targets_per_step = 1;
  int pad_id = 0;
  int start_id = 1;
  int stop_id = 2;
  LossWeights loss_weights;
  CombinationMode combination = CombinationMode::Logits;
  // DBRNN: also feed the embedded previous prediction to the upper cells.
  bool prediction_feedback = false;

  // Throws ValidationError listing every problem found.
  void validate() const;
};

// One training pair. For aligned models `target` has targets_per_step entries
// per input token; entries equal to pad_id are masked out of the loss.
struct Example {
  std::vector<int> input;
  std::vector<int> target;
};

// Parameters plus the configuration that shapes them. Frozen parameters are
// held outside the tape and enter graphs as constants.
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);
  // Adopts existing parameters; every expected tensor must be present with
  // the expected shape.
  Model(ModelConfig config, ad::ParamTape tape);

  const ModelConfig& config() const { return config_; }
  ad::ParamTape& tape() { return tape_; }
  const ad::ParamTape& tape() const { return tape_; }
  const std::map<std::string, Tensor>& frozen() const { return frozen_; }

  void freeze(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& mutable_value(const std::string& name);

  // Prefixes of the recurrent cells in this model ("rnn", "enc", ...).
  std::vector<std::string> cell_prefixes() const;
  cells::CellShape cell_shape(const std::string& prefix) const;
  cells::CellParams cell_params(const std::string& prefix) const;

  // Expected parameter names and shapes for a configuration.
  static std::vector<std::pair<std::string, std::vector<std::size_t>>> layout(
      const ModelConfig& config);

 private:
  ModelConfig config_;
  ad::ParamTape tape_;
  std::map<std::string, Tensor> frozen_;
};

// Maps a parameter name to a graph variable.
using Binder = std::function<ad::Var(const std::string&)>;
// Trainable binding: gradients flow into model.tape().
Binder trainable_binder(Model& model, ad::Graph& g);
// Constant binding for inference.
Binder constant_binder(const Model& model, ad::Graph& g);

enum class Decoding { TeacherForced, FreeRunning };

// Graph-level outputs, one entry per target position.
struct GraphOutputs {
  // Logits, or probabilities when main_is_probability.
  std::vector<ad::Var> main;
  bool main_is_probability = false;
  std::vector<ad::Var> forward;   // branch logits (BRNN, DBRNN)
  std::vector<ad::Var> backward;  // branch logits aligned to target position
  std::vector<int> predictions;   // free-running decode, stop excluded
  bool truncated = false;
  std::vector<Tensor> attention;  // per decode step (Seq2SeqAttn)
  cells::CellState encoder_final;
  cells::CellState decoder_initial;
};

GraphOutputs build(ad::Graph& g, const ModelConfig& config, const Binder& bind,
                   const Example& example, Decoding decoding);

struct LossRecord {
  double e_f = 0.0;  // per-token cross-entropies
  double e_b = 0.0;
  double e = 0.0;
  double total = 0.0;      // w_f e_f + w_b e_b + w_comb e (DBRNN), e otherwise
  double objective = 0.0;  // mean over examples of the summed token losses
  std::size_t tokens = 0;
  std::size_t examples = 0;
  std::size_t clamped = 0;
  std::size_t correct = 0;  // argmax hits on scored positions
  // Weighted per-token terms of the summed objective, in build order. Their
  // sum over the batch, divided by `examples`, is `objective`.
  std::vector<double> terms;
};

// Loss variables for one example; adds counts into `record`.
ad::Var build_loss(ad::Graph& g, const ModelConfig& config, const GraphOutputs& out,
                   const Example& example, LossRecord& record);

// Reverse pass over the batch: grads on model.tape() hold the gradient of the
// mean-over-examples, sum-over-time objective. Grads are overwritten.
LossRecord backprop_sequence(Model& model, std::span<const Example> batch);
// Loss and accuracy without gradients (teacher forced).
LossRecord evaluate_loss(const Model& model, std::span<const Example> batch);
void finalize(LossRecord& record, const LossWeights& weights, ModelKind kind);

// ---- Inference wrappers -----------------------------------------------------

std::vector<Tensor> forward_basic(const Model& model, std::span<const int> xs);

struct BranchOutputs {
  std::vector<Tensor> p_f;
  std::vector<Tensor> p_b;
  std::vector<Tensor> p;
};
BranchOutputs forward_brnn(const Model& model, std::span<const int> xs);
// Targets drive the optional prediction feedback; pass nullptr to feed the
// model's own greedy predictions.
BranchOutputs forward_dbrnn(const Model& model, std::span<const int> xs,
                            const std::vector<int>* targets = nullptr);

struct DecodeOutput {
  std::vector<Tensor> logits;
  std::vector<int> predictions;
  bool truncated = false;
  std::vector<Tensor> attention;
  cells::CellState encoder_final;
  cells::CellState decoder_initial;
};
// Teacher forcing requires targets; free running ignores them.
DecodeOutput forward_seq2seq(const Model& model, std::span<const int> xs,
                             const std::vector<int>* targets, bool teacher_forcing);

// Greedy prediction per target position: argmax of the main output for aligned
// models, free-running decode for seq2seq models.
std::vector<int> predict(const Model& model, const Example& example);

// Lowest index among maxima.
std::size_t argmax(std::span<const double> v);

}  // namespace elstm::models
