#include "elstm/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "elstm/errors.h"
#include "elstm/rng.h"

namespace elstm::ad {

GradCheckReport grad_check(models::Model& model, std::span<const models::Example> batch,
                           const GradCheckOptions& options) {
  if (options.step < 1e-7 || options.step > 1e-4) {
    throw ValidationError("gradient check step must lie in [1e-7, 1e-4]");
  }
  models::backprop_sequence(model, batch);
  GradCheckReport report;
  report.step = options.step;
  report.threshold = options.threshold;
  Rng rng(options.seed);
  const double h = options.step;

  for (auto& [name, entry] : model.tape().entries()) {
    const Tensor analytic = entry.grad;
    std::vector<std::size_t> indices(entry.value.size());
    std::iota(indices.begin(), indices.end(), 0);
    if (indices.size() > options.cap_per_tensor) {
      rng.shuffle(indices);
      indices.resize(options.cap_per_tensor);
      std::sort(indices.begin(), indices.end());
    }
    ParamCheck check;
    check.name = name;
    for (std::size_t i : indices) {
      double& v = entry.value.values()[i];
      const double saved = v;
      v = saved + h;
      const auto plus = models::evaluate_loss(model, batch);
      v = saved - h;
      const auto minus = models::evaluate_loss(model, batch);
      v = saved;
      // L(p+h) − L(p−h) summed term by term: terms the perturbation does not
      // reach cancel exactly instead of rounding at the scale of the total.
      double diff = 0.0;
      for (std::size_t j = 0; j < plus.terms.size(); ++j) {
        diff += plus.terms[j] - minus.terms[j];
      }
      const double numeric =
          diff / static_cast<double>(plus.examples) / (2.0 * h);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      check.max_relative_error = std::max(check.max_relative_error, std::abs(a - numeric) / denom);
      ++check.checked;
    }
    report.max_relative_error = std::max(report.max_relative_error, check.max_relative_error);
    report.params.push_back(std::move(check));
  }
  model.tape().zero_grads();
  report.passing = report.max_relative_error < options.threshold;
  return report;
}

void print_report(std::ostream& out, const GradCheckReport& report) {
  out << std::left << std::setw(24) << "parameter" << std::right << std::setw(9)
      << "checked" << std::setw(16) << "max rel err" << '\n';
  for (const auto& p : report.params) {
    out << std::left << std::setw(24) << p.name << std::right << std::setw(9)
        << p.checked << std::setw(16) << std::scientific << std::setprecision(3)
        << p.max_relative_error << std::defaultfloat << '\n';
  }
  out << "step " << report.step << ", threshold " << report.threshold
      << ", max relative error " << std::scientific << std::setprecision(3)
      << report.max_relative_error << std::defaultfloat << " -> "
      << (report.passing ? "PASS" : "FAIL") << '\n';
}

void perturb_parameters(models::Model& model, double radius, std::uint64_t seed) {
  if (!(radius > 0)) throw ValidationError("perturbation radius must be positive");
  Rng rng(seed);
  for (auto& [name, entry] : model.tape().entries()) {
    for (double& v : entry.value.values()) v = rng.uniform(-radius, radius);
  }
}

std::vector<models::Example> random_batch(const models::ModelConfig& config,
                                          std::size_t batch, std::size_t length,
                                          std::uint64_t seed) {
  if (config.source_vocab < 2 || config.target_vocab < 3) {
    throw ValidationError("random_batch: vocabularies too small");
  }
  Rng rng(seed);
  const auto draw = [&](std::size_t vocab) {
    // Any id except pad (0).
    return 1 + static_cast<int>(rng.below(vocab - 1));
  };
  std::vector<models::Example> out;
  for (std::size_t b = 0; b < batch; ++b) {
    models::Example ex;
    for (std::size_t t = 0; t < length; ++t) ex.input.push_back(draw(config.source_vocab));
    if (models::is_seq2seq(config.kind)) {
      // Avoid an early stop so every position is scored.
      for (std::size_t t = 0; t < length; ++t) {
        int y = draw(config.target_vocab);
        if (y == config.stop_id) y = config.start_id;
        ex.target.push_back(y);
      }
      ex.target.push_back(config.stop_id);
    } else {
      for (std::size_t t = 0; t < length * config.targets_per_step; ++t) {
        ex.target.push_back(draw(config.target_vocab));
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace elstm::ad
