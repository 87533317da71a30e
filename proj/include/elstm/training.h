#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "elstm/model.h"

namespace elstm::training {

struct TrainOptions {
  std::size_t epochs = 11;
  std::size_t batch_size = 20;
  double learning_rate = 0.5;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables clipping
  std::uint64_t seed = 1;
};

struct EpochStats {
  std::size_t epoch = 0;      // 1-based, counted across resumes
  double objective = 0.0;     // mean batch objective during the epoch
  double cross_entropy = 0.0; // per token, during the epoch
  double perplexity = 0.0;
  double accuracy = 0.0;      // teacher-forced argmax accuracy during the epoch
};

struct TrainState {
  std::size_t step = 0;
  std::size_t epoch = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Seq2seq models are trained to emit the stop symbol; appends it where the
// target does not already end with it. Other models are returned unchanged.
std::vector<models::Example> prepare_examples(const models::ModelConfig& config,
                                              std::vector<models::Example> examples);

// AdaGrad over shuffled mini-batches. The batch order of epoch e depends only
// on (seed, e), so a resumed run reproduces an uninterrupted one.
std::vector<EpochStats> train(models::Model& model,
                              const std::vector<models::Example>& examples,
                              const TrainOptions& options, TrainState& state,
                              const EpochCallback& on_epoch = {});

struct Metrics {
  double cross_entropy = 0.0;
  double perplexity = 0.0;
  double accuracy = 0.0;  // greedy predictions vs targets on non-pad positions
  std::size_t tokens = 0;
};
Metrics evaluate(const models::Model& model, const std::vector<models::Example>& examples);

// Per-token proxies on interleaved (relation, head) sequences: head accuracy
// stands in for UAS and joint accuracy for LAS.
struct AttachmentScores {
  double uas_proxy = 0.0;
  double las_proxy = 0.0;
  std::size_t tokens = 0;
};
AttachmentScores attachment_scores(const std::vector<std::vector<int>>& predicted,
                                   const std::vector<std::vector<int>>& gold);

}  // namespace elstm::training
