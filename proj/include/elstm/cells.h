#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>

#include "elstm/errors.h"
#include "elstm/numkernel.h"
#include "elstm/rng.h"
#include "elstm/tensor.h"

namespace elstm::cells {

enum class CellKind { SRN, LSTM, GRU, SimplifiedGRU, ELSTM };

// How the gate input I_t is formed: [x_t; h_{t-1}] or x_t alone.
enum class InputMode { ConcatPrevOutput, InputOnly };

std::string_view to_string(CellKind kind);
std::string_view to_string(InputMode mode);
CellKind parse_cell_kind(std::string_view s);
InputMode parse_input_mode(std::string_view s);

// Layout of one cell: which tensors exist and their shapes.
struct CellShape {
  CellKind kind = CellKind::LSTM;
  InputMode mode = InputMode::ConcatPrevOutput;
  std::size_t input_dim = 0;    // M
  std::size_t hidden_dim = 0;   // N
  std::size_t scale_period = 1; // T_s, ELSTM only

  // Columns of the gate matrices: M+N in concat mode, M otherwise.
  std::size_t gate_input_dim() const;
  // Throws ValidationError on an inconsistent combination.
  void validate() const;
};

// Cell weights over a value type V: Tensor for eager evaluation, ad::Var for
// recording on a Graph. Fields not used by `shape.kind` stay default.
template <class V>
struct CellWeights {
  CellShape shape;
  // SRN: c' = W_c c + W_in x + b_in.
  V W_c;
  // LSTM/ELSTM gates and input transform; W_in/b_in shared with SRN.
  V W_f, b_f, W_i, b_i, W_o, b_o, W_in, b_in;
  // ELSTM: scaling table (N x T_s) and the additive bias on c.
  V scale, b_c;
  // GRU update gate, reset gate and candidate; U_* are recurrent.
  V W_z, U_z, b_z, W_r, U_r, b_r, W_h, U_h, b_h;
};

template <class V>
struct CellStateT {
  V c;  // internal state; equals h for the GRU family
  V h;
};

using CellParams = CellWeights<Tensor>;
using CellState = CellStateT<Tensor>;

// Visits every tensor slot the cell kind uses, with its name and shape.
template <class V, class F>
void for_each_slot(CellWeights<V>& w, F&& f);
template <class V, class F>
void for_each_slot(const CellWeights<V>& w, F&& f);

// Periodic scaling index, 1-based: ((t − 1) mod T_s) + 1.
std::size_t scale_index(std::size_t t, std::size_t period);

// Uniform(−r, r) with r = 1/sqrt(fan_in) for matrices, zero biases, and an
// all-ones ELSTM scaling table.
CellParams init_cell(const CellShape& shape, Rng& rng);
CellParams zero_cell(const CellShape& shape);
CellState zero_state(std::size_t hidden_dim);

// Registered parameters as counted by the closed-form formula:
// LSTM 4N(D+1), GRU 3N(M+N+1), ELSTM 4N(D+1) + N(T_s+1), where D is the
// gate input width.
std::size_t formula_parameter_count(const CellShape& shape);
// Sum of tensor sizes actually held by the cell.
std::size_t parameter_count(const CellParams& p);

// Eager backend for the templated step functions.
struct EagerOps {
  using Value = Tensor;
  Tensor matvec(const Tensor& w, const Tensor& x) { return num::matvec(w, x); }
  Tensor affine(const Tensor& w, const Tensor& x, const Tensor& b) {
    return num::add(num::matvec(w, x), b);
  }
  Tensor affine_sigmoid(const Tensor& w, const Tensor& x, const Tensor& b) {
    return num::sigmoid(affine(w, x, b));
  }
  Tensor affine_tanh(const Tensor& w, const Tensor& x, const Tensor& b) {
    return num::tanh(affine(w, x, b));
  }
  Tensor add(const Tensor& a, const Tensor& b) { return num::add(a, b); }
  Tensor mul(const Tensor& a, const Tensor& b) { return num::hadamard(a, b); }
  Tensor sigmoid(const Tensor& x) { return num::sigmoid(x); }
  Tensor tanh(const Tensor& x) { return num::tanh(x); }
  Tensor one_minus(const Tensor& x) { return num::one_minus(x); }
  Tensor concat(const Tensor& a, const Tensor& b) { return num::concat(a, b); }
  Tensor column(const Tensor& m, std::size_t j) { return num::column(m, j); }
};

// I_t for the gated cells.
template <class Ops, class V>
V gate_input(Ops& ops, const CellWeights<V>& w, const CellStateT<V>& s, const V& x) {
  if (w.shape.mode == InputMode::ConcatPrevOutput) return ops.concat(x, s.h);
  return x;
}

template <class Ops, class V>
CellStateT<V> srn_step(Ops& ops, const CellWeights<V>& w, const CellStateT<V>& s,
                       const V& x) {
  V c = ops.add(ops.matvec(w.W_c, s.c), ops.affine(w.W_in, x, w.b_in));
  V h = ops.tanh(c);
  return {c, h};
}

template <class Ops, class V>
CellStateT<V> lstm_step(Ops& ops, const CellWeights<V>& w, const CellStateT<V>& s,
                        const V& x) {
  if constexpr (requires { ops.fused_lstm_step(w, s, x, std::size_t{1}); }) {
    return ops.fused_lstm_step(w, s, x, 1);
  } else {
    V in = gate_input(ops, w, s, x);
    V f = ops.affine_sigmoid(w.W_f, in, w.b_f);
    V i = ops.affine_sigmoid(w.W_i, in, w.b_i);
    V o = ops.affine_sigmoid(w.W_o, in, w.b_o);
    V g = ops.affine_tanh(w.W_in, in, w.b_in);
    V c = ops.add(ops.mul(f, s.c), ops.mul(i, g));
    V h = ops.mul(o, ops.tanh(c));
    return {c, h};
  }
}

// t is the 1-based time step; it selects the scaling column.
template <class Ops, class V>
CellStateT<V> elstm_step(Ops& ops, const CellWeights<V>& w, const CellStateT<V>& s,
                         const V& x, std::size_t t) {
  if constexpr (requires { ops.fused_lstm_step(w, s, x, t); }) {
    return ops.fused_lstm_step(w, s, x, t);
  } else {
    V in = gate_input(ops, w, s, x);
    V f = ops.affine_sigmoid(w.W_f, in, w.b_f);
    V i = ops.affine_sigmoid(w.W_i, in, w.b_i);
    V o = ops.affine_sigmoid(w.W_o, in, w.b_o);
    V g = ops.affine_tanh(w.W_in, in, w.b_in);
    V sk = ops.column(w.scale, scale_index(t, w.shape.scale_period) - 1);
    V c = ops.add(ops.add(ops.mul(f, s.c), ops.mul(sk, ops.mul(i, g))), w.b_c);
    V h = ops.mul(o, ops.tanh(c));
    return {c, h};
  }
}

template <class Ops, class V>
CellStateT<V> gru_step(Ops& ops, const CellWeights<V>& w, const CellStateT<V>& s,
                       const V& x) {
  V z = ops.sigmoid(ops.add(ops.affine(w.W_z, x, w.b_z), ops.matvec(w.U_z, s.h)));
  V r = ops.sigmoid(ops.add(ops.affine(w.W_r, x, w.b_r), ops.matvec(w.U_r, s.h)));
  V cand = ops.tanh(
      ops.add(ops.affine(w.W_h, x, w.b_h), ops.matvec(w.U_h, ops.mul(r, s.h))));
  V h = ops.add(ops.mul(z, s.h), ops.mul(ops.one_minus(z), cand));
  return {h, h};
}

template <class Ops, class V>
CellStateT<V> simplified_gru_step(Ops& ops, const CellWeights<V>& w,
                                  const CellStateT<V>& s, const V& x) {
  V z = ops.affine_sigmoid(w.W_z, x, w.b_z);
  V cand = ops.affine_tanh(w.W_h, x, w.b_h);
  V h = ops.add(ops.mul(z, s.h), ops.mul(ops.one_minus(z), cand));
  return {h, h};
}

// Dispatches on the cell kind. t is 1-based and only used by the ELSTM.
template <class Ops, class V>
CellStateT<V> step(Ops& ops, const CellWeights<V>& w, const CellStateT<V>& s,
                   const V& x, std::size_t t) {
  switch (w.shape.kind) {
    case CellKind::SRN: return srn_step(ops, w, s, x);
    case CellKind::LSTM: return lstm_step(ops, w, s, x);
    case CellKind::ELSTM: return elstm_step(ops, w, s, x, t);
    case CellKind::GRU: return gru_step(ops, w, s, x);
    case CellKind::SimplifiedGRU: return simplified_gru_step(ops, w, s, x);
  }
  throw ValidationError("unknown cell kind");
}

// Eager entry points. Each checks the cell kind and operand sizes.
CellState srn_step(const CellParams& p, const CellState& s, const Tensor& x);
CellState lstm_step(const CellParams& p, const CellState& s, const Tensor& x);
CellState gru_step(const CellParams& p, const CellState& s, const Tensor& x);
CellState simplified_gru_step(const CellParams& p, const CellState& s,
                              const Tensor& x);
CellState elstm_step(const CellParams& p, const CellState& s, const Tensor& x,
                     std::size_t t);
CellState step(const CellParams& p, const CellState& s, const Tensor& x,
               std::size_t t);

// ---------------------------------------------------------------------------

namespace detail {
struct Slot {
  const char* name;
  std::size_t rows;
  std::size_t cols;  // 0 for vectors
};
template <class V, class F>
void visit(const CellShape& sh, F&& f) {
  using W = CellWeights<V>;
  const std::size_t n = sh.hidden_dim, m = sh.input_dim, d = sh.gate_input_dim();
  switch (sh.kind) {
    case CellKind::SRN:
      f(Slot{"W_c", n, n}, &W::W_c);
      f(Slot{"W_in", n, m}, &W::W_in);
      f(Slot{"b_in", n, 0}, &W::b_in);
      break;
    case CellKind::LSTM:
    case CellKind::ELSTM:
      f(Slot{"W_f", n, d}, &W::W_f);
      f(Slot{"b_f", n, 0}, &W::b_f);
      f(Slot{"W_i", n, d}, &W::W_i);
      f(Slot{"b_i", n, 0}, &W::b_i);
      f(Slot{"W_o", n, d}, &W::W_o);
      f(Slot{"b_o", n, 0}, &W::b_o);
      f(Slot{"W_in", n, d}, &W::W_in);
      f(Slot{"b_in", n, 0}, &W::b_in);
      if (sh.kind == CellKind::ELSTM) {
        f(Slot{"scale", n, sh.scale_period}, &W::scale);
        f(Slot{"b_c", n, 0}, &W::b_c);
      }
      break;
    case CellKind::GRU:
      f(Slot{"W_z", n, m}, &W::W_z);
      f(Slot{"U_z", n, n}, &W::U_z);
      f(Slot{"b_z", n, 0}, &W::b_z);
      f(Slot{"W_r", n, m}, &W::W_r);
      f(Slot{"U_r", n, n}, &W::U_r);
      f(Slot{"b_r", n, 0}, &W::b_r);
      f(Slot{"W_h", n, m}, &W::W_h);
      f(Slot{"U_h", n, n}, &W::U_h);
      f(Slot{"b_h", n, 0}, &W::b_h);
      break;
    case CellKind::SimplifiedGRU:
      f(Slot{"W_z", n, m}, &W::W_z);
      f(Slot{"b_z", n, 0}, &W::b_z);
      f(Slot{"W_h", n, m}, &W::W_h);
      f(Slot{"b_h", n, 0}, &W::b_h);
      break;
  }
}
}  // namespace detail

template <class V, class F>
void for_each_slot(CellWeights<V>& w, F&& f) {
  detail::visit<V>(w.shape, [&](const detail::Slot& s, V CellWeights<V>::*m) {
    f(s.name, s.rows, s.cols, w.*m);
  });
}

template <class V, class F>
void for_each_slot(const CellWeights<V>& w, F&& f) {
  detail::visit<V>(w.shape, [&](const detail::Slot& s, V CellWeights<V>::*m) {
    f(s.name, s.rows, s.cols, w.*m);
  });
}

}  // namespace elstm::cells
