#include "elstm/losses.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "elstm/errors.h"
#include "elstm/numkernel.h"

namespace elstm::models {
namespace {

void require_distribution(const Tensor& p, const char* op) {
  if (!p.is_vector() || p.empty()) {
    throw DimensionError(std::string(op) + ": expected a probability vector, got " +
                         p.shape_string());
  }
  const double total = std::accumulate(p.values().begin(), p.values().end(), 0.0);
  if (std::abs(total - 1.0) > 1e-6) {
    throw ValidationError(std::string(op) + ": probabilities sum to " +
                          std::to_string(total));
  }
}

}  // namespace

double cross_entropy(std::size_t label, const Tensor& p_hat, std::size_t* clamped) {
  require_distribution(p_hat, "cross_entropy");
  if (label >= p_hat.size()) {
    throw DimensionError("cross_entropy: label " + std::to_string(label) +
                         " out of range for " + p_hat.shape_string());
  }
  constexpr double kFloor = 1e-12;
  double p = p_hat[label];
  if (p <= kFloor) {
    p = kFloor;
    if (clamped) ++*clamped;
  }
  return -std::log(p);
}

Tensor combine_probabilities(const Tensor& p_f, const Tensor& p_b, double alpha_f,
                             double alpha_b) {
  if (alpha_f < 0 || alpha_b < 0 || std::abs(alpha_f + alpha_b - 1.0) > 1e-12) {
    throw ValidationError("combination weights must be convex");
  }
  return num::add(num::scale(p_f, alpha_f), num::scale(p_b, alpha_b));
}

DominanceResult combination_dominance_check(const Tensor& p_f, const Tensor& p_b,
                                            std::size_t true_label) {
  require_distribution(p_f, "combination_dominance_check");
  require_distribution(p_b, "combination_dominance_check");
  if (!p_f.same_shape(p_b)) {
    throw DimensionError("combination_dominance_check: branch shapes differ");
  }
  DominanceResult r{};
  r.loss_f = cross_entropy(true_label, p_f);
  r.loss_b = cross_entropy(true_label, p_b);
  r.alpha_f = p_f[true_label] >= p_b[true_label] ? 1.0 : 0.0;
  r.alpha_b = 1.0 - r.alpha_f;
  r.loss_combined =
      cross_entropy(true_label, combine_probabilities(p_f, p_b, r.alpha_f, r.alpha_b));
  r.holds = r.loss_combined <= std::min(r.loss_f, r.loss_b) + 1e-12;
  return r;
}

double perplexity(double mean_per_token_ce) {
  if (mean_per_token_ce < 0) throw ValidationError("cross-entropy must be >= 0");
  return std::exp(mean_per_token_ce);
}

}  // namespace elstm::models
