#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "elstm/config.h"
#include "elstm/model.h"
#include "elstm/param_tape.h"
#include "elstm/training.h"

namespace elstm::checkpoint {

inline constexpr int kFormatVersion = 1;

// Everything needed to resume training or evaluate: the resolved
// configuration, every tensor with its AdaGrad accumulator, the training
// position and the vocabularies.
struct Checkpoint {
  config::RunConfig run;
  training::TrainState state;
  std::vector<std::string> source_vocab;
  std::vector<std::string> target_vocab;
  ad::ParamTape params;             // frozen tensors included
  std::vector<std::string> frozen;  // names of frozen tensors
};

Checkpoint capture(const models::Model& model, const config::RunConfig& run,
                   const training::TrainState& state, const data::Vocabulary& source,
                   const data::Vocabulary& target);
models::Model restore_model(const Checkpoint& ckpt);

// JSON text. Doubles are written in shortest round-trip form, so a load
// reproduces every value bit for bit.
std::string serialize(const Checkpoint& ckpt);
Checkpoint deserialize(std::string_view text);

void save(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load(const std::filesystem::path& path);

}  // namespace elstm::checkpoint
