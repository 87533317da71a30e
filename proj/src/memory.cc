#include "elstm/memory.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "elstm/errors.h"
#include "elstm/numkernel.h"

namespace elstm::memory {
namespace {

void require_gated(const CellParams& p, CellKind expected, const char* op) {
  if (p.shape.kind != expected) {
    throw ValidationError(std::string(op) + ": parameters are for a " +
                          std::string(cells::to_string(p.shape.kind)) + " cell");
  }
}

void require_inputs(const CellParams& p, std::span<const Tensor> inputs, const char* op) {
  const std::size_t d = p.shape.gate_input_dim();
  for (const Tensor& in : inputs) {
    if (!in.is_vector() || in.size() != d) {
      throw DimensionError(std::string(op) + ": gate input " + in.shape_string() +
                           " does not match width " + std::to_string(d));
    }
  }
}

struct GateTerms {
  std::vector<Tensor> forget;  // σ(W_f I_k)
  std::vector<Tensor> drive;   // σ(W_i I_k) ⊙ φ(W_in I_k)
};

GateTerms gate_terms(const CellParams& p, std::span<const Tensor> inputs) {
  GateTerms t;
  for (const Tensor& in : inputs) {
    t.forget.push_back(num::sigmoid(num::add(num::matvec(p.W_f, in), p.b_f)));
    t.drive.push_back(
        num::hadamard(num::sigmoid(num::add(num::matvec(p.W_i, in), p.b_i)),
                      num::tanh(num::add(num::matvec(p.W_in, in), p.b_in))));
  }
  return t;
}

// Per-position contributions, optionally scaled by the ELSTM table.
std::vector<Tensor> contributions(const CellParams& p, std::span<const Tensor> inputs,
                                  bool scaled) {
  GateTerms terms = gate_terms(p, inputs);
  const std::size_t T = inputs.size();
  std::vector<Tensor> out(T);
  Tensor carry(p.shape.hidden_dim, 1.0);  // ∏_{j>k} forget_j
  for (std::size_t k = T; k-- > 0;) {
    Tensor m = num::hadamard(carry, terms.drive[k]);
    if (scaled) {
      const std::size_t col = cells::scale_index(k + 1, p.shape.scale_period) - 1;
      m = num::hadamard(num::column(p.scale, col), m);
    }
    out[k] = std::move(m);
    carry = num::hadamard(carry, terms.forget[k]);
  }
  return out;
}

Tensor sum_all(std::span<const Tensor> parts, std::size_t n) {
  Tensor total(n);
  for (const Tensor& m : parts) total = num::add(total, m);
  return total;
}

ClosedForm gated_closed_form(const CellParams& p, std::span<const Tensor> inputs,
                             bool scaled) {
  if (inputs.empty()) {
    return {Tensor(p.shape.hidden_dim), Tensor(p.shape.hidden_dim)};
  }
  Tensor c = sum_all(contributions(p, inputs, scaled), p.shape.hidden_dim);
  Tensor o = num::sigmoid(num::add(num::matvec(p.W_o, inputs.back()), p.b_o));
  Tensor h = num::hadamard(o, num::tanh(c));
  return {std::move(c), std::move(h)};
}

}  // namespace

Tensor srn_closed_form(const Tensor& w_c, const Tensor& w_in,
                       std::span<const Tensor> xs) {
  const std::size_t t = xs.size();
  Tensor c(w_c.rows());
  for (std::size_t k = 1; k <= t; ++k) {
    Tensor term = num::matvec(num::matpow(w_c, static_cast<int>(t - k)),
                              num::matvec(w_in, xs[k - 1]));
    c = num::add(c, term);
  }
  return c;
}

Tensor srn_closed_form(const CellParams& p, std::span<const Tensor> xs) {
  require_gated(p, CellKind::SRN, "srn_closed_form");
  const std::size_t t = xs.size();
  Tensor c(p.shape.hidden_dim);
  for (std::size_t k = 1; k <= t; ++k) {
    Tensor u = num::add(num::matvec(p.W_in, xs[k - 1]), p.b_in);
    c = num::add(c, num::matvec(num::matpow(p.W_c, static_cast<int>(t - k)), u));
  }
  return c;
}

DecayBound srn_decay_bound(const Tensor& w_c, const Tensor& w_in, const Tensor& x,
                           int lag) {
  if (lag < 0) throw ValidationError("srn_decay_bound: lag must be >= 0");
  const Tensor u = num::matvec(w_in, x);
  const double contribution = num::l2_norm(num::matvec(num::matpow(w_c, lag), u));
  const double sigma = num::spectral_norm(w_c);
  return {contribution, std::pow(sigma, lag) * num::l2_norm(u)};
}

std::vector<Tensor> record_gate_inputs(const CellParams& p, std::span<const Tensor> xs) {
  std::vector<Tensor> inputs;
  inputs.reserve(xs.size());
  cells::CellState s = cells::zero_state(p.shape.hidden_dim);
  cells::EagerOps ops;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    inputs.push_back(cells::gate_input(ops, p, s, xs[t]));
    s = cells::step(p, s, xs[t], t + 1);
  }
  return inputs;
}

ClosedForm lstm_closed_form(const CellParams& p, std::span<const Tensor> inputs) {
  require_gated(p, CellKind::LSTM, "lstm_closed_form");
  require_inputs(p, inputs, "lstm_closed_form");
  return gated_closed_form(p, inputs, false);
}

ClosedForm elstm_closed_form(const CellParams& p, std::span<const Tensor> inputs) {
  require_gated(p, CellKind::ELSTM, "elstm_closed_form");
  require_inputs(p, inputs, "elstm_closed_form");
  return gated_closed_form(p, inputs, true);
}

Tensor simplified_gru_closed_form(const CellParams& p, std::span<const Tensor> xs) {
  require_gated(p, CellKind::SimplifiedGRU, "simplified_gru_closed_form");
  const std::size_t n = p.shape.hidden_dim;
  Tensor h(n);
  Tensor carry(n, 1.0);  // ∏_{j>k} z_j
  for (std::size_t k = xs.size(); k-- > 0;) {
    Tensor z = num::sigmoid(num::add(num::matvec(p.W_z, xs[k]), p.b_z));
    Tensor cand = num::tanh(num::add(num::matvec(p.W_h, xs[k]), p.b_h));
    h = num::add(h, num::hadamard(carry, num::hadamard(num::one_minus(z), cand)));
    carry = num::hadamard(carry, z);
  }
  return h;
}

Tensor MemoryResponseProfile::total() const {
  Tensor t(responses.empty() ? 0 : responses.front().size());
  for (const Tensor& m : responses) t = num::add(t, m);
  return t;
}

double MemoryResponseProfile::strength_ratio(std::size_t k) const {
  if (k < 1 || k > norms.size()) {
    throw ValidationError("strength_ratio: position " + std::to_string(k) +
                          " outside 1.." + std::to_string(norms.size()));
  }
  const double peak = *std::max_element(norms.begin(), norms.end());
  return peak > 0.0 ? norms[k - 1] / peak : 0.0;
}

MemoryResponseProfile memory_response(const CellParams& p,
                                      std::span<const Tensor> inputs, CellKind kind) {
  if (kind != CellKind::LSTM && kind != CellKind::ELSTM) {
    throw ValidationError("memory_response: only LSTM and ELSTM cells have a response profile");
  }
  require_gated(p, kind, "memory_response");
  require_inputs(p, inputs, "memory_response");
  MemoryResponseProfile profile;
  profile.kind = kind;
  profile.length = inputs.size();
  profile.responses = contributions(p, inputs, kind == CellKind::ELSTM);
  for (const Tensor& m : profile.responses) profile.norms.push_back(num::l2_norm(m));
  return profile;
}

void write_profile_csv(std::ostream& out, const MemoryResponseProfile& profile) {
  const std::size_t n = profile.responses.empty() ? 0 : profile.responses.front().size();
  out << "position";
  for (std::size_t i = 0; i < n; ++i) out << ",component_" << i;
  out << ",norm\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t k = 0; k < profile.responses.size(); ++k) {
    out << (k + 1);
    for (double v : profile.responses[k].values()) out << ',' << v;
    out << ',' << profile.norms[k] << '\n';
  }
}

MemoryResponseProfile read_profile_csv(std::istream& in, CellKind kind) {
  MemoryResponseProfile profile;
  profile.kind = kind;
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError("empty profile", lineno);
  std::size_t columns = std::count(line.begin(), line.end(), ',') + 1;
  if (line.rfind("position,", 0) != 0 || columns < 3) {
    throw ParseError("bad profile header", lineno);
  }
  const std::size_t n = columns - 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError("bad number '" + cell + "'", lineno);
      }
    }
    if (vals.size() != columns) throw ParseError("wrong column count", lineno);
    if (static_cast<std::size_t>(vals[0]) != profile.responses.size() + 1) {
      throw ParseError("positions must be consecutive from 1", lineno);
    }
    profile.responses.push_back(
        Tensor::vector(std::vector<double>(vals.begin() + 1, vals.begin() + 1 + n)));
    profile.norms.push_back(vals.back());
  }
  profile.length = profile.responses.size();
  return profile;
}

}  // namespace elstm::memory
