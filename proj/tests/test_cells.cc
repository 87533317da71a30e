#include <gtest/gtest.h>

#include <cmath>

#include "elstm/cells.h"
#include "elstm/errors.h"
#include "elstm/numkernel.h"
#include "elstm/rng.h"

using namespace elstm;
using namespace elstm::cells;

namespace {

CellShape shape_of(CellKind kind, std::size_t m, std::size_t n, std::size_t ts = 1,
                   InputMode mode = InputMode::ConcatPrevOutput) {
  CellShape s;
  s.kind = kind;
  s.mode = mode;
  s.input_dim = m;
  s.hidden_dim = n;
  s.scale_period = ts;
  return s;
}

Tensor random_vector(Rng& rng, std::size_t n, double r = 1.0) {
  Tensor v(n);
  for (double& x : v.values()) x = rng.uniform(-r, r);
  return v;
}

// Random weights with random (not zero) biases.
CellParams random_cell(const CellShape& shape, Rng& rng) {
  CellParams p = init_cell(shape, rng);
  for_each_slot(p, [&](const char* name, std::size_t, std::size_t cols, Tensor& t) {
    if (cols == 0 && std::string(name) != "b_c") {
      for (double& v : t.values()) v = rng.uniform(-0.5, 0.5);
    }
  });
  return p;
}

}  // namespace

TEST(Srn, ScalarHandEvaluation) {
  CellParams p = zero_cell(shape_of(CellKind::SRN, 1, 1));
  p.W_c = Tensor::matrix(1, 1, {0.5});
  p.W_in = Tensor::matrix(1, 1, {1.0});
  CellState s = srn_step(p, zero_state(1), Tensor::vector({1.0}));
  EXPECT_DOUBLE_EQ(s.c[0], 1.0);
  EXPECT_NEAR(s.h[0], 0.761594, 1e-6);
  s = srn_step(p, s, Tensor::vector({1.0}));
  EXPECT_DOUBLE_EQ(s.c[0], 1.5);
}

TEST(Srn, ZeroWeightsGiveZero) {
  CellParams p = zero_cell(shape_of(CellKind::SRN, 2, 3));
  CellState s = srn_step(p, zero_state(3), Tensor::vector({4.0, -7.0}));
  EXPECT_EQ(s.c, Tensor(3));
  EXPECT_EQ(s.h, Tensor(3));
}

TEST(Lstm, ZeroWeightsFromRest) {
  CellParams p = zero_cell(shape_of(CellKind::LSTM, 2, 1));
  CellState s = lstm_step(p, zero_state(1), Tensor::vector({1.0, 2.0}));
  EXPECT_EQ(s.c[0], 0.0);
  EXPECT_EQ(s.h[0], 0.0);
}

TEST(Lstm, ZeroWeightsHalfGates) {
  CellParams p = zero_cell(shape_of(CellKind::LSTM, 1, 1));
  CellState s0{Tensor::vector({1.0}), Tensor::vector({0.0})};
  CellState s = lstm_step(p, s0, Tensor::vector({3.0}));
  EXPECT_DOUBLE_EQ(s.c[0], 0.5);
  EXPECT_NEAR(s.h[0], 0.231059, 1e-6);
  EXPECT_DOUBLE_EQ(s.h[0], 0.5 * std::tanh(0.5));
}

TEST(Gru, ZeroWeightsHalfCarry) {
  CellParams p = zero_cell(shape_of(CellKind::GRU, 1, 1));
  CellState s = gru_step(p, CellState{Tensor::vector({1.0}), Tensor::vector({1.0})},
                         Tensor::vector({2.0}));
  EXPECT_DOUBLE_EQ(s.h[0], 0.5);
  s = gru_step(p, zero_state(1), Tensor::vector({2.0}));
  EXPECT_EQ(s.h[0], 0.0);
}

TEST(Gru, ZeroRecurrentMatricesReduceToSimplified) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    CellParams g = random_cell(shape_of(CellKind::GRU, 3, 4), rng);
    g.U_z.fill(0.0);
    g.U_r.fill(0.0);
    g.U_h.fill(0.0);
    CellParams sg = zero_cell(shape_of(CellKind::SimplifiedGRU, 3, 4));
    sg.W_z = g.W_z;
    sg.b_z = g.b_z;
    sg.W_h = g.W_h;
    sg.b_h = g.b_h;
    CellState a = zero_state(4), b = zero_state(4);
    for (int t = 0; t < 10; ++t) {
      Tensor x = random_vector(rng, 3);
      a = gru_step(g, a, x);
      b = simplified_gru_step(sg, b, x);
      ASSERT_EQ(a.h, b.h);
    }
  }
}

TEST(SimplifiedGru, ZeroWeights) {
  CellParams p = zero_cell(shape_of(CellKind::SimplifiedGRU, 1, 1));
  CellState s = simplified_gru_step(p, CellState{Tensor::vector({2.0}), Tensor::vector({2.0})},
                                    Tensor::vector({5.0}));
  EXPECT_DOUBLE_EQ(s.h[0], 1.0);
}

TEST(SimplifiedGru, NegativeBiasSaturatesToCandidate) {
  Rng rng(5);
  CellParams p = random_cell(shape_of(CellKind::SimplifiedGRU, 2, 3), rng);
  p.b_z.fill(-800.0);
  Tensor x = random_vector(rng, 2);
  CellState s = simplified_gru_step(p, CellState{Tensor::vector({0.9, 0.9, 0.9}), Tensor::vector({0.9, 0.9, 0.9})}, x);
  Tensor cand = num::tanh(num::add(num::matvec(p.W_h, x), p.b_h));
  EXPECT_LT(num::max_abs_diff(s.h, cand), 1e-12);
}

TEST(Elstm, ScaleIndex) {
  EXPECT_EQ(scale_index(5, 3), 2u);
  EXPECT_EQ(scale_index(7, 3), 1u);
  EXPECT_EQ(scale_index(3, 3), 3u);
  EXPECT_EQ(scale_index(1, 1), 1u);
  EXPECT_THROW(scale_index(0, 3), ValidationError);
}

TEST(Elstm, RejectsStepZero) {
  CellParams p = zero_cell(shape_of(CellKind::ELSTM, 1, 1, 2));
  EXPECT_THROW(elstm_step(p, zero_state(1), Tensor::vector({1.0}), 0), ValidationError);
}

TEST(Elstm, ScaleTableStartsAtOnes) {
  Rng rng(9);
  CellParams p = init_cell(shape_of(CellKind::ELSTM, 2, 3, 5), rng);
  for (double v : p.scale.values()) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(p.scale.rows(), 3u);
  EXPECT_EQ(p.scale.cols(), 5u);
}

TEST(Elstm, UnitScaleReducesToLstm) {
  Rng rng(17);
  for (InputMode mode : {InputMode::ConcatPrevOutput, InputMode::InputOnly}) {
    for (int trial = 0; trial < 10; ++trial) {
      CellParams e = random_cell(shape_of(CellKind::ELSTM, 3, 4, 7, mode), rng);
      e.scale.fill(1.0);
      e.b_c.fill(0.0);
      CellParams l = zero_cell(shape_of(CellKind::LSTM, 3, 4, 1, mode));
      l.W_f = e.W_f; l.b_f = e.b_f;
      l.W_i = e.W_i; l.b_i = e.b_i;
      l.W_o = e.W_o; l.b_o = e.b_o;
      l.W_in = e.W_in; l.b_in = e.b_in;
      CellState a = zero_state(4), b = zero_state(4);
      for (std::size_t t = 1; t <= 50; ++t) {
        Tensor x = random_vector(rng, 3);
        a = elstm_step(e, a, x, t);
        b = lstm_step(l, b, x);
        ASSERT_LT(num::max_abs_diff(a.c, b.c), 1e-12);
        ASSERT_LT(num::max_abs_diff(a.h, b.h), 1e-12);
      }
    }
  }
}

TEST(Elstm, ScaleColumnFollowsPeriod) {
  // With W_f = 0 the state carries half of itself; a distinct scale per column
  // shows which column was used.
  CellShape sh = shape_of(CellKind::ELSTM, 1, 1, 3);
  CellParams p = zero_cell(sh);
  p.b_i.fill(800.0);   // i = 1
  p.b_in.fill(800.0);  // phi = 1
  p.b_f.fill(-800.0);  // f = 0
  p.scale = Tensor::matrix(1, 3, {0.1, 0.2, 0.3});
  const double expected[] = {0.1, 0.2, 0.3, 0.1, 0.2, 0.3, 0.1};
  CellState s = zero_state(1);
  for (std::size_t t = 1; t <= 7; ++t) {
    s = elstm_step(p, s, Tensor::vector({0.0}), t);
    EXPECT_DOUBLE_EQ(s.c[0], expected[t - 1]) << "t=" << t;
  }
}

TEST(Elstm, BiasAddsToState) {
  CellParams p = zero_cell(shape_of(CellKind::ELSTM, 1, 2, 1));
  p.b_c = Tensor::vector({0.25, -0.5});
  CellState s = elstm_step(p, zero_state(2), Tensor::vector({1.0}), 1);
  EXPECT_EQ(s.c, Tensor::vector({0.25, -0.5}));
}

TEST(Cells, DimensionMismatch) {
  Rng rng(1);
  CellParams p = init_cell(shape_of(CellKind::LSTM, 2, 3), rng);
  EXPECT_THROW(lstm_step(p, zero_state(3), Tensor(4)), DimensionError);
  EXPECT_THROW(lstm_step(p, zero_state(2), Tensor(2)), DimensionError);
  CellParams g = init_cell(shape_of(CellKind::GRU, 2, 3), rng);
  EXPECT_THROW(lstm_step(g, zero_state(3), Tensor(2)), ValidationError);
}

TEST(Cells, GruRejectsInputOnly) {
  EXPECT_THROW(shape_of(CellKind::GRU, 2, 2, 1, InputMode::InputOnly).validate(),
               ValidationError);
}

TEST(ParameterCount, TableExamples) {
  EXPECT_EQ(formula_parameter_count(shape_of(CellKind::LSTM, 2, 3)), 72u);
  EXPECT_EQ(formula_parameter_count(shape_of(CellKind::GRU, 2, 3)), 54u);
  EXPECT_EQ(formula_parameter_count(shape_of(CellKind::ELSTM, 2, 3, 4)), 87u);
}

TEST(ParameterCount, FormulaMatchesHeldTensors) {
  Rng rng(3);
  for (auto [m, n] : {std::pair{2, 3}, {5, 7}, {10, 10}}) {
    for (std::size_t ts : {1, 4, 100}) {
      for (CellKind k : {CellKind::SRN, CellKind::LSTM, CellKind::GRU, CellKind::ELSTM}) {
        CellShape sh = shape_of(k, m, n, ts);
        EXPECT_EQ(parameter_count(init_cell(sh, rng)), formula_parameter_count(sh))
            << to_string(k) << " M=" << m << " N=" << n << " Ts=" << ts;
      }
    }
  }
}

TEST(ParameterCount, InputOnlyUsesInputWidth) {
  CellShape sh = shape_of(CellKind::LSTM, 2, 3, 1, InputMode::InputOnly);
  EXPECT_EQ(formula_parameter_count(sh), 4u * 3u * (2u + 1u));
  Rng rng(2);
  EXPECT_EQ(parameter_count(init_cell(sh, rng)), formula_parameter_count(sh));
}

TEST(Invariants, OutputNormBounded) {
  Rng rng(21);
  for (CellKind k : {CellKind::LSTM, CellKind::ELSTM}) {
    CellParams p = random_cell(shape_of(k, 3, 5, 4), rng);
    for (double& v : p.W_in.values()) v *= 10.0;
    CellState s = zero_state(5);
    for (std::size_t t = 1; t <= 100; ++t) {
      s = step(p, s, random_vector(rng, 3, 5.0), t);
      EXPECT_LE(num::l2_norm(s.h), 5.0);
      for (double h : s.h.values()) EXPECT_LT(std::abs(h), 1.0);
    }
  }
}

TEST(Invariants, LstmForgetGateOutlastsSrnDecay) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor w_c(4u, std::size_t{4});
    for (double& v : w_c.values()) v = rng.uniform(-1, 1);
    const double target = rng.uniform(0.3, 0.95);
    w_c = num::scale(w_c, target / num::spectral_norm(w_c));
    const double smax = num::spectral_norm(w_c);
    ASSERT_LT(smax, 1.0);

    CellParams p = random_cell(shape_of(CellKind::LSTM, 3, 4), rng);
    // Large positive forget bias: every forget activation is at least σ_max.
    p.b_f.fill(std::log(smax / (1 - smax)) + 10.0);
    std::vector<Tensor> gate_in;
    CellState s = zero_state(4);
    for (int t = 0; t < 51; ++t) {
      Tensor x = random_vector(rng, 3);
      gate_in.push_back(num::concat(x, s.h));
      s = lstm_step(p, s, x);
    }
    std::vector<Tensor> f;
    for (const auto& in : gate_in) f.push_back(num::sigmoid(num::add(num::matvec(p.W_f, in), p.b_f)));
    const std::size_t t_end = 50;
    for (std::size_t lag = 1; lag <= 50; ++lag) {
      Tensor prod(4, 1.0);
      for (std::size_t j = t_end - lag + 1; j <= t_end; ++j) prod = num::hadamard(prod, f[j]);
      const double bound = std::pow(smax, static_cast<double>(lag));
      for (double v : prod.values()) EXPECT_GE(v, bound) << "lag " << lag;
      EXPECT_GE(num::l2_norm(prod), bound);
      EXPECT_GE(num::l2_norm(prod) + 1e-12,
                num::spectral_norm(num::matpow(w_c, static_cast<int>(lag))));
    }
  }
}

TEST(Invariants, ScaledMemoryDominatesLstm) {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    CellParams p = random_cell(shape_of(CellKind::LSTM, 2, 3), rng);
    Tensor prod(3, 1.0);
    for (int j = 0; j < 1 + static_cast<int>(rng.below(30)); ++j) {
      Tensor in = random_vector(rng, 5, 2.0);
      prod = num::hadamard(prod, num::sigmoid(num::add(num::matvec(p.W_f, in), p.b_f)));
    }
    Tensor s(3);
    for (double& v : s.values()) v = rng.uniform(1.0, 3.0);
    EXPECT_GE(num::l2_norm(num::hadamard(s, prod)), num::l2_norm(prod));
  }
}

TEST(Invariants, StepsArePure) {
  Rng rng(4);
  for (CellKind k : {CellKind::SRN, CellKind::LSTM, CellKind::GRU,
                     CellKind::SimplifiedGRU, CellKind::ELSTM}) {
    CellParams p = random_cell(shape_of(k, 3, 3, 2), rng);
    CellState s{random_vector(rng, 3), random_vector(rng, 3)};
    if (k == CellKind::GRU || k == CellKind::SimplifiedGRU) s.c = s.h;
    Tensor x = random_vector(rng, 3);
    CellState a = step(p, s, x, 3);
    CellState b = step(p, s, x, 3);
    EXPECT_EQ(a.c, b.c);
    EXPECT_EQ(a.h, b.h);
  }
}

TEST(Names, RoundTrip) {
  for (CellKind k : {CellKind::SRN, CellKind::LSTM, CellKind::GRU,
                     CellKind::SimplifiedGRU, CellKind::ELSTM}) {
    EXPECT_EQ(parse_cell_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_cell_kind("rnn"), ValidationError);
  EXPECT_EQ(parse_input_mode("input-only"), InputMode::InputOnly);
  EXPECT_THROW(parse_input_mode("both"), ValidationError);
}
