#include "elstm/training.h"

#include <cmath>

#include "elstm/data.h"
#include "elstm/errors.h"
#include "elstm/losses.h"
#include "elstm/param_tape.h"

namespace elstm::training {

std::vector<models::Example> prepare_examples(const models::ModelConfig& config,
                                              std::vector<models::Example> examples) {
  if (!models::is_seq2seq(config.kind)) return examples;
  for (auto& ex : examples) {
    if (ex.target.empty() || ex.target.back() != config.stop_id) {
      ex.target.push_back(config.stop_id);
    }
  }
  return examples;
}

std::vector<EpochStats> train(models::Model& model,
                              const std::vector<models::Example>& examples,
                              const TrainOptions& options, TrainState& state,
                              const EpochCallback& on_epoch) {
  if (examples.empty()) throw ValidationError("no training examples");
  if (options.batch_size < 1) throw ValidationError("batch size must be >= 1");
  std::vector<EpochStats> history;
  for (std::size_t e = 0; e < options.epochs; ++e) {
    const std::size_t epoch = state.epoch + 1;
    Rng rng(options.seed * 0x9E3779B97F4A7C15ULL + epoch);
    auto batches = data::make_batches(examples, options.batch_size, rng);
    double objective = 0.0, ce = 0.0;
    std::size_t tokens = 0, correct = 0;
    for (const auto& batch : batches) {
      auto exs = batch.examples();
      models::LossRecord rec = models::backprop_sequence(model, exs);
      if (options.clip_norm > 0) ad::clip_global_norm(model.tape(), options.clip_norm);
      ad::adagrad_step(model.tape(), options.learning_rate, options.epsilon);
      ++state.step;
      objective += rec.objective;
      ce += rec.e * static_cast<double>(rec.tokens);
      tokens += rec.tokens;
      correct += rec.correct;
    }
    state.epoch = epoch;
    EpochStats s;
    s.epoch = epoch;
    s.objective = objective / static_cast<double>(batches.size());
    s.cross_entropy = tokens ? ce / static_cast<double>(tokens) : 0.0;
    s.perplexity = std::exp(s.cross_entropy);
    s.accuracy = tokens ? static_cast<double>(correct) / static_cast<double>(tokens) : 0.0;
    history.push_back(s);
    if (on_epoch) on_epoch(s);
  }
  return history;
}

Metrics evaluate(const models::Model& model, const std::vector<models::Example>& examples) {
  Metrics m;
  models::LossRecord rec = models::evaluate_loss(model, examples);
  m.cross_entropy = rec.e;
  m.perplexity = models::perplexity(rec.e);
  m.tokens = rec.tokens;
  std::size_t correct = 0, scored = 0;
  const int pad = model.config().pad_id;
  for (const auto& ex : examples) {
    auto pred = models::predict(model, ex);
    for (std::size_t i = 0; i < ex.target.size(); ++i) {
      if (ex.target[i] == pad) continue;
      ++scored;
      if (i < pred.size() && pred[i] == ex.target[i]) ++correct;
    }
  }
  m.accuracy = scored ? static_cast<double>(correct) / static_cast<double>(scored) : 0.0;
  return m;
}

AttachmentScores attachment_scores(const std::vector<std::vector<int>>& predicted,
                                   const std::vector<std::vector<int>>& gold) {
  if (predicted.size() != gold.size()) {
    throw ValidationError("prediction and gold sentence counts differ");
  }
  AttachmentScores s;
  std::size_t head_ok = 0, both_ok = 0;
  for (std::size_t k = 0; k < gold.size(); ++k) {
    const auto& g = gold[k];
    const auto& p = predicted[k];
    for (std::size_t i = 0; i + 1 < g.size(); i += 2) {
      if (g[i] == data::kStopId) break;
      ++s.tokens;
      const bool rel = i < p.size() && p[i] == g[i];
      const bool head = i + 1 < p.size() && p[i + 1] == g[i + 1];
      head_ok += head;
      both_ok += rel && head;
    }
  }
  if (s.tokens) {
    s.uas_proxy = static_cast<double>(head_ok) / static_cast<double>(s.tokens);
    s.las_proxy = static_cast<double>(both_ok) / static_cast<double>(s.tokens);
  }
  return s;
}

}  // namespace elstm::training
