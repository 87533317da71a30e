#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "elstm/cells.h"
#include "elstm/tensor.h"

// Closed-form state expansions and memory-response profiles. All functions
// assume the rest condition c_0 = h_0 = 0.
namespace elstm::memory {

using cells::CellKind;
using cells::CellParams;

// Σ_k W_c^{t−k} W_in x_k.
Tensor srn_closed_form(const Tensor& w_c, const Tensor& w_in,
                       std::span<const Tensor> xs);
// Same with the input bias folded into each term: Σ_k W_c^{t−k}(W_in x_k + b_in).
Tensor srn_closed_form(const CellParams& p, std::span<const Tensor> xs);

struct DecayBound {
  double contribution_norm;  // |W_c^lag W_in x|
  double bound;              // σ_max(W_c)^lag |W_in x|
};
DecayBound srn_decay_bound(const Tensor& w_c, const Tensor& w_in, const Tensor& x,
                           int lag);

struct ClosedForm {
  Tensor c;
  Tensor h;
};

// Gate inputs I_1..I_T recorded from a reference forward run from rest. In
// input-only mode they are the xs themselves.
std::vector<Tensor> record_gate_inputs(const CellParams& p, std::span<const Tensor> xs);

// c_T = Σ_k [∏_{j>k} σ(W_f I_j)] ⊙ σ(W_i I_k) ⊙ φ(W_in I_k); h_T = σ(W_o I_T) ⊙ φ(c_T).
ClosedForm lstm_closed_form(const CellParams& p, std::span<const Tensor> inputs);
// As above with s_{t_s(k)} scaling each term. Ignores b_c.
ClosedForm elstm_closed_form(const CellParams& p, std::span<const Tensor> inputs);
// h_T = Σ_k [∏_{j>k} z_j] ⊙ (1 − z_k) ⊙ h̃_k.
Tensor simplified_gru_closed_form(const CellParams& p, std::span<const Tensor> xs);

struct MemoryResponseProfile {
  CellKind kind = CellKind::LSTM;
  std::size_t length = 0;
  std::vector<Tensor> responses;  // m_1..m_T
  std::vector<double> norms;      // |m_k|

  Tensor total() const;  // Σ_k m_k
  // |m_k| / max_j |m_j| for 1-based position k.
  double strength_ratio(std::size_t k) const;
};

// m_k = [∏_{j=k+1..T} σ(W_f I_j)] ⊙ σ(W_i I_k) ⊙ φ(W_in I_k), times s_k for
// the ELSTM. `kind` must match the parameters and be LSTM or ELSTM.
MemoryResponseProfile memory_response(const CellParams& p,
                                      std::span<const Tensor> inputs, CellKind kind);

// CSV with header position,component_0..component_{N-1},norm.
void write_profile_csv(std::ostream& out, const MemoryResponseProfile& profile);
MemoryResponseProfile read_profile_csv(std::istream& in, CellKind kind);

}  // namespace elstm::memory
