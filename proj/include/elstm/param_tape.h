#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "elstm/tensor.h"

namespace elstm::ad {

// Registry of named trainable tensors. Each entry carries its accumulated
// gradient and AdaGrad statistics, always shaped like the value.
class ParamTape {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
    Tensor accum;
  };

  Entry& add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }
  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;
  // Removes the entry and returns its value.
  Tensor remove(const std::string& name);

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // Scalar parameter count, optionally restricted to names with a prefix.
  std::size_t parameter_count(const std::string& prefix = {}) const;

  void zero_grads();
  double grad_norm() const;
  void scale_grads(double k);
  // Throws NumericError naming the first parameter with a non-finite grad.
  void check_grads_finite() const;

 private:
  std::map<std::string, Entry> entries_;
};

// accum += g²; value −= lr·g / (sqrt(accum) + epsilon); then zero grads.
void adagrad_step(ParamTape& tape, double lr, double epsilon = 1e-8);

// Rescales all grads by max_norm/g when the global norm g exceeds max_norm.
// Returns the norm before clipping.
double clip_global_norm(ParamTape& tape, double max_norm);

}  // namespace elstm::ad
