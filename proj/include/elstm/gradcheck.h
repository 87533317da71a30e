#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "elstm/model.h"

namespace elstm::ad {

struct GradCheckOptions {
  double step = 1e-5;
  double threshold = 1e-4;
  // At most this many scalars are checked per tensor, sampled without
  // replacement when a tensor is larger.
  std::size_t cap_per_tensor = 200;
  std::uint64_t seed = 7;
};

struct ParamCheck {
  std::string name;
  std::size_t checked = 0;
  double max_relative_error = 0.0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_relative_error = 0.0;
  double step = 0.0;
  double threshold = 0.0;
  bool passing = false;
};

// Compares tape gradients against central differences of the training
// objective. Relative error uses max(|analytic|, |numeric|, 1e-8) as the
// denominator. Frozen parameters are not on the tape and are not reported.
GradCheckReport grad_check(models::Model& model, std::span<const models::Example> batch,
                           const GradCheckOptions& options = {});

void print_report(std::ostream& out, const GradCheckReport& report);

// Redraws every trainable tensor uniform(−radius, radius), biases and the
// ELSTM scale table included. At initialization hidden states are small and
// many gradients sit near the finite-difference noise floor; a generic point
// checks the same code with better-conditioned values.
void perturb_parameters(models::Model& model, double radius, std::uint64_t seed);

// Random examples for a gradient check: inputs drawn from the non-pad source
// ids, `length` input steps, targets shaped for the model kind (seq2seq
// targets end with stop).
std::vector<models::Example> random_batch(const models::ModelConfig& config,
                                          std::size_t batch, std::size_t length,
                                          std::uint64_t seed);

}  // namespace elstm::ad
