#include "elstm/param_tape.h"

#include <cmath>

#include "elstm/errors.h"

namespace elstm::ad {

ParamTape::Entry& ParamTape::add(const std::string& name, Tensor value) {
  if (contains(name)) throw ValidationError("duplicate parameter " + name);
  if (!value.all_finite()) throw NumericError("non-finite initial value", name);
  Entry e;
  e.grad = value;
  e.grad.fill(0.0);
  e.accum = e.grad;
  e.value = std::move(value);
  return entries_.emplace(name, std::move(e)).first->second;
}

ParamTape::Entry& ParamTape::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("unknown parameter " + name);
  return it->second;
}

const ParamTape::Entry& ParamTape::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("unknown parameter " + name);
  return it->second;
}

Tensor ParamTape::remove(const std::string& name) {
  Tensor v = std::move(at(name).value);
  entries_.erase(name);
  return v;
}

std::size_t ParamTape::parameter_count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) {
    if (name.compare(0, prefix.size(), prefix) == 0) n += e.value.size();
  }
  return n;
}

void ParamTape::zero_grads() {
  for (auto& [name, e] : entries_) e.grad.fill(0.0);
}

double ParamTape::grad_norm() const {
  double acc = 0.0;
  for (const auto& [name, e] : entries_)
    for (double g : e.grad.values()) acc += g * g;
  return std::sqrt(acc);
}

void ParamTape::scale_grads(double k) {
  for (auto& [name, e] : entries_)
    for (double& g : e.grad.values()) g *= k;
}

void ParamTape::check_grads_finite() const {
  for (const auto& [name, e] : entries_) {
    if (!e.grad.all_finite()) throw NumericError("non-finite gradient", name);
  }
}

void adagrad_step(ParamTape& tape, double lr, double epsilon) {
  for (auto& [name, e] : tape.entries()) {
    auto v = e.value.values();
    auto g = e.grad.values();
    auto a = e.accum.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (g[i] == 0.0) continue;
      a[i] += g[i] * g[i];
      v[i] -= lr * g[i] / (std::sqrt(a[i]) + epsilon);
    }
    e.grad.fill(0.0);
  }
}

double clip_global_norm(ParamTape& tape, double max_norm) {
  if (!(max_norm > 0.0)) throw ValidationError("clip norm must be positive");
  const double norm = tape.grad_norm();
  if (norm > max_norm) tape.scale_grads(max_norm / norm);
  return norm;
}

}  // namespace elstm::ad
