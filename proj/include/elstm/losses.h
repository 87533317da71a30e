#pragma once

#include <cstddef>

#include "elstm/tensor.h"

// Cross-entropy and branch-combination analysis on explicit probability
// vectors.
namespace elstm::models {

// −log p̂[label]. p̂ must sum to 1 within 1e-6; values at or below 1e-12 are
// clamped to 1e-12 and counted in *clamped when given.
double cross_entropy(std::size_t label, const Tensor& p_hat,
                     std::size_t* clamped = nullptr);

// α_f p_f + α_b p_b. Requires α_f, α_b >= 0 with α_f + α_b = 1.
Tensor combine_probabilities(const Tensor& p_f, const Tensor& p_b, double alpha_f,
                             double alpha_b);

struct DominanceResult {
  double alpha_f;
  double alpha_b;
  double loss_combined;
  double loss_f;
  double loss_b;
  bool holds;  // loss_combined <= min(loss_f, loss_b) + 1e-12
};

// Convex weights maximising the combined true-label probability. The optimum
// sits on a vertex, so all weight goes to the better branch (forward on ties).
DominanceResult combination_dominance_check(const Tensor& p_f, const Tensor& p_b,
                                            std::size_t true_label);

double perplexity(double mean_per_token_ce);

}  // namespace elstm::models
