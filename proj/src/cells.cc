#include "elstm/cells.h"

#include <cmath>
#include <string>

namespace elstm::cells {

std::string_view to_string(CellKind kind) {
  switch (kind) {
    case CellKind::SRN: return "srn";
    case CellKind::LSTM: return "lstm";
    case CellKind::GRU: return "gru";
    case CellKind::SimplifiedGRU: return "sgru";
    case CellKind::ELSTM: return "elstm";
  }
  return "?";
}

std::string_view to_string(InputMode mode) {
  return mode == InputMode::ConcatPrevOutput ? "concat" : "input-only";
}

CellKind parse_cell_kind(std::string_view s) {
  for (CellKind k : {CellKind::SRN, CellKind::LSTM, CellKind::GRU,
                     CellKind::SimplifiedGRU, CellKind::ELSTM}) {
    if (s == to_string(k)) return k;
  }
  throw ValidationError("unknown cell kind '" + std::string(s) +
                        "' (expected srn, lstm, gru, sgru or elstm)");
}

InputMode parse_input_mode(std::string_view s) {
  if (s == "concat") return InputMode::ConcatPrevOutput;
  if (s == "input-only") return InputMode::InputOnly;
  throw ValidationError("unknown input mode '" + std::string(s) +
                        "' (expected concat or input-only)");
}

std::size_t CellShape::gate_input_dim() const {
  const bool gated = kind == CellKind::LSTM || kind == CellKind::ELSTM;
  if (gated && mode == InputMode::ConcatPrevOutput) return input_dim + hidden_dim;
  return input_dim;
}

void CellShape::validate() const {
  if (input_dim == 0) throw ValidationError("cell input dimension must be positive");
  if (hidden_dim == 0) throw ValidationError("cell hidden dimension must be positive");
  if (kind == CellKind::ELSTM && scale_period == 0) {
    throw ValidationError("ELSTM scaling period T_s must be >= 1");
  }
  if (kind == CellKind::GRU && mode == InputMode::InputOnly) {
    throw ValidationError(
        "the GRU always conditions on h_{t-1} through U_z, U_r, U; "
        "input-only mode is not available");
  }
}

std::size_t scale_index(std::size_t t, std::size_t period) {
  if (t < 1) throw ValidationError("time step must be >= 1");
  if (period < 1) throw ValidationError("scaling period must be >= 1");
  return (t - 1) % period + 1;
}

namespace {

CellParams make_cell(const CellShape& shape, Rng* rng) {
  shape.validate();
  CellParams p;
  p.shape = shape;
  for_each_slot(p, [&](const char* name, std::size_t rows, std::size_t cols,
                       Tensor& t) {
    if (cols == 0) {
      t = Tensor(rows);
      return;
    }
    t = Tensor(rows, cols);
    if (std::string_view(name) == "scale") {
      t.fill(1.0);
    } else if (rng) {
      const double r = 1.0 / std::sqrt(static_cast<double>(cols));
      for (double& v : t.values()) v = rng->uniform(-r, r);
    }
  });
  return p;
}

void check_kind(const CellParams& p, CellKind expected, const char* op) {
  if (p.shape.kind != expected) {
    throw ValidationError(std::string(op) + ": parameters are for a " +
                          std::string(to_string(p.shape.kind)) + " cell");
  }
}

void check_operands(const CellParams& p, const CellState& s, const Tensor& x,
                    const char* op) {
  const std::size_t n = p.shape.hidden_dim;
  if (!x.is_vector() || x.size() != p.shape.input_dim) {
    throw DimensionError(std::string(op) + ": input " + x.shape_string() +
                         " does not match M=" + std::to_string(p.shape.input_dim));
  }
  if (s.c.size() != n || s.h.size() != n) {
    throw DimensionError(std::string(op) + ": state " + s.c.shape_string() + "/" +
                         s.h.shape_string() + " does not match N=" +
                         std::to_string(n));
  }
}

}  // namespace

CellParams init_cell(const CellShape& shape, Rng& rng) { return make_cell(shape, &rng); }

CellParams zero_cell(const CellShape& shape) { return make_cell(shape, nullptr); }

CellState zero_state(std::size_t hidden_dim) {
  return {Tensor(hidden_dim), Tensor(hidden_dim)};
}

std::size_t formula_parameter_count(const CellShape& shape) {
  const std::size_t n = shape.hidden_dim, m = shape.input_dim;
  const std::size_t d = shape.gate_input_dim();
  switch (shape.kind) {
    case CellKind::SRN: return n * (m + n + 1);
    case CellKind::LSTM: return 4 * n * (d + 1);
    case CellKind::ELSTM: return 4 * n * (d + 1) + n * (shape.scale_period + 1);
    case CellKind::GRU: return 3 * n * (m + n + 1);
    case CellKind::SimplifiedGRU: return 2 * n * (m + 1);
  }
  return 0;
}

std::size_t parameter_count(const CellParams& p) {
  std::size_t total = 0;
  for_each_slot(p, [&](const char*, std::size_t, std::size_t, const Tensor& t) {
    total += t.size();
  });
  return total;
}

CellState srn_step(const CellParams& p, const CellState& s, const Tensor& x) {
  check_kind(p, CellKind::SRN, "srn_step");
  check_operands(p, s, x, "srn_step");
  EagerOps ops;
  return srn_step(ops, p, s, x);
}

CellState lstm_step(const CellParams& p, const CellState& s, const Tensor& x) {
  check_kind(p, CellKind::LSTM, "lstm_step");
  check_operands(p, s, x, "lstm_step");
  EagerOps ops;
  return lstm_step(ops, p, s, x);
}

CellState gru_step(const CellParams& p, const CellState& s, const Tensor& x) {
  check_kind(p, CellKind::GRU, "gru_step");
  check_operands(p, s, x, "gru_step");
  EagerOps ops;
  return gru_step(ops, p, s, x);
}

CellState simplified_gru_step(const CellParams& p, const CellState& s,
                              const Tensor& x) {
  check_kind(p, CellKind::SimplifiedGRU, "simplified_gru_step");
  check_operands(p, s, x, "simplified_gru_step");
  EagerOps ops;
  return simplified_gru_step(ops, p, s, x);
}

CellState elstm_step(const CellParams& p, const CellState& s, const Tensor& x,
                     std::size_t t) {
  check_kind(p, CellKind::ELSTM, "elstm_step");
  check_operands(p, s, x, "elstm_step");
  if (t < 1) throw ValidationError("elstm_step: time step must be >= 1");
  EagerOps ops;
  return elstm_step(ops, p, s, x, t);
}

CellState step(const CellParams& p, const CellState& s, const Tensor& x,
               std::size_t t) {
  check_operands(p, s, x, "step");
  if (t < 1) throw ValidationError("step: time step must be >= 1");
  EagerOps ops;
  return step(ops, p, s, x, t);
}

}  // namespace elstm::cells
