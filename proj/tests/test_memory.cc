#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "elstm/cells.h"
#include "elstm/errors.h"
#include "elstm/memory.h"
#include "elstm/numkernel.h"
#include "elstm/rng.h"

using namespace elstm;
using namespace elstm::cells;
using namespace elstm::memory;

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

std::vector<Tensor> random_inputs(Rng& rng, std::size_t t, std::size_t m) {
  std::vector<Tensor> xs;
  for (std::size_t i = 0; i < t; ++i) {
    Tensor x(m);
    for (double& v : x.values()) v = rng.uniform(-1, 1);
    xs.push_back(x);
  }
  return xs;
}

CellParams random_cell(const CellShape& shape, Rng& rng) {
  CellParams p = init_cell(shape, rng);
  for_each_slot(p, [&](const char* name, std::size_t, std::size_t cols, Tensor& t) {
    const std::string n = name;
    if (n == "b_c") return;
    if (cols == 0) {
      for (double& v : t.values()) v = rng.uniform(-0.5, 0.5);
    } else if (n == "scale") {
      for (double& v : t.values()) v = rng.uniform(0.5, 2.0);
    }
  });
  return p;
}

CellState unroll(const CellParams& p, const std::vector<Tensor>& xs) {
  CellState s = zero_state(p.shape.hidden_dim);
  for (std::size_t t = 0; t < xs.size(); ++t) s = step(p, s, xs[t], t + 1);
  return s;
}

CellParams as_lstm(const CellParams& e) {
  CellShape sh = e.shape;
  sh.kind = CellKind::LSTM;
  CellParams l = zero_cell(sh);
  l.W_f = e.W_f; l.b_f = e.b_f;
  l.W_i = e.W_i; l.b_i = e.b_i;
  l.W_o = e.W_o; l.b_o = e.b_o;
  l.W_in = e.W_in; l.b_in = e.b_in;
  return l;
}

const std::size_t kLengths[] = {1, 2, 5, 20};

}  // namespace

TEST(SrnClosedForm, SingleStepIsInputTransform) {
  Rng rng(1);
  Tensor w_c(3u, std::size_t{3}), w_in(3u, std::size_t{2});
  for (double& v : w_c.values()) v = rng.uniform(-1, 1);
  for (double& v : w_in.values()) v = rng.uniform(-1, 1);
  auto xs = random_inputs(rng, 1, 2);
  EXPECT_LT(num::max_abs_diff(srn_closed_form(w_c, w_in, xs), num::matvec(w_in, xs[0])), 1e-15);
}

TEST(SrnClosedForm, ScalarHandSum) {
  std::vector<Tensor> xs{Tensor::vector({1.0}), Tensor::vector({1.0})};
  Tensor c = srn_closed_form(Tensor::matrix(1, 1, {0.5}), Tensor::matrix(1, 1, {1.0}), xs);
  EXPECT_DOUBLE_EQ(c[0], 1.5);
}

TEST(SrnClosedForm, DimensionMismatch) {
  std::vector<Tensor> xs{Tensor(3)};
  EXPECT_THROW(srn_closed_form(Tensor::identity(2), Tensor(2u, std::size_t{2}), xs), DimensionError);
}

TEST(ClosedForms, MatchUnrolledRecurrence) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (std::size_t t : kLengths) {
      Rng rng(1000 + seed);
      auto xs = random_inputs(rng, t, 3);

      CellParams srn = random_cell(shape_of(CellKind::SRN, 3, 4), rng);
      EXPECT_LT(num::max_abs_diff(srn_closed_form(srn, xs), unroll(srn, xs).c), 1e-9);
      // Without bias the two-argument form applies.
      srn.b_in.fill(0.0);
      EXPECT_LT(num::max_abs_diff(srn_closed_form(srn.W_c, srn.W_in, xs), unroll(srn, xs).c),
                1e-9);

      for (InputMode mode : {InputMode::ConcatPrevOutput, InputMode::InputOnly}) {
        CellParams lstm = random_cell(shape_of(CellKind::LSTM, 3, 4, 1, mode), rng);
        CellState ls = unroll(lstm, xs);
        ClosedForm lc = lstm_closed_form(lstm, record_gate_inputs(lstm, xs));
        EXPECT_LT(num::max_abs_diff(lc.c, ls.c), 1e-9);
        EXPECT_LT(num::max_abs_diff(lc.h, ls.h), 1e-9);

        CellParams el = random_cell(shape_of(CellKind::ELSTM, 3, 4, 3, mode), rng);
        CellState es = unroll(el, xs);
        ClosedForm ec = elstm_closed_form(el, record_gate_inputs(el, xs));
        EXPECT_LT(num::max_abs_diff(ec.c, es.c), 1e-9);
        EXPECT_LT(num::max_abs_diff(ec.h, es.h), 1e-9);
      }

      CellParams sg = random_cell(shape_of(CellKind::SimplifiedGRU, 3, 4), rng);
      EXPECT_LT(num::max_abs_diff(simplified_gru_closed_form(sg, xs), unroll(sg, xs).h), 1e-9);
    }
  }
}

TEST(LstmClosedForm, EmptyProductAtOneStep) {
  Rng rng(3);
  CellParams p = random_cell(shape_of(CellKind::LSTM, 2, 3), rng);
  auto inputs = record_gate_inputs(p, random_inputs(rng, 1, 2));
  Tensor i = num::sigmoid(num::add(num::matvec(p.W_i, inputs[0]), p.b_i));
  Tensor g = num::tanh(num::add(num::matvec(p.W_in, inputs[0]), p.b_in));
  EXPECT_LT(num::max_abs_diff(lstm_closed_form(p, inputs).c, num::hadamard(i, g)), 1e-15);
}

TEST(LstmClosedForm, ZeroWeightsGiveZero) {
  Rng rng(3);
  CellParams p = zero_cell(shape_of(CellKind::LSTM, 2, 3));
  auto inputs = record_gate_inputs(p, random_inputs(rng, 7, 2));
  EXPECT_EQ(lstm_closed_form(p, inputs).c, Tensor(3));
}

TEST(ElstmClosedForm, UnitScaleMatchesLstm) {
  Rng rng(4);
  CellParams e = random_cell(shape_of(CellKind::ELSTM, 2, 3, 5), rng);
  e.scale.fill(1.0);
  auto inputs = record_gate_inputs(e, random_inputs(rng, 9, 2));
  EXPECT_LT(num::max_abs_diff(elstm_closed_form(e, inputs).c,
                              lstm_closed_form(as_lstm(e), inputs).c),
            1e-15);
}

TEST(ElstmClosedForm, DoubledScaleDoublesState) {
  Rng rng(5);
  CellParams e = random_cell(shape_of(CellKind::ELSTM, 2, 3, 5), rng);
  auto inputs = record_gate_inputs(e, random_inputs(rng, 9, 2));
  e.scale.fill(1.0);
  Tensor one = elstm_closed_form(e, inputs).c;
  e.scale.fill(2.0);
  Tensor two = elstm_closed_form(e, inputs).c;
  EXPECT_LT(num::max_abs_diff(two, num::scale(one, 2.0)), 1e-15);
}

TEST(SimplifiedGruClosedForm, OneStepAndSaturation) {
  Rng rng(6);
  CellParams p = random_cell(shape_of(CellKind::SimplifiedGRU, 2, 3), rng);
  auto xs = random_inputs(rng, 1, 2);
  Tensor z = num::sigmoid(num::add(num::matvec(p.W_z, xs[0]), p.b_z));
  Tensor cand = num::tanh(num::add(num::matvec(p.W_h, xs[0]), p.b_h));
  EXPECT_LT(num::max_abs_diff(simplified_gru_closed_form(p, xs),
                              num::hadamard(num::one_minus(z), cand)),
            1e-15);
  p.b_z.fill(800.0);
  auto long_xs = random_inputs(rng, 10, 2);
  EXPECT_LT(num::l2_norm(simplified_gru_closed_form(p, long_xs)), 1e-12);
}

TEST(DecayBound, DiagonalEquality) {
  Tensor w_c = num::scale(Tensor::identity(2), 0.9);
  DecayBound b = srn_decay_bound(w_c, Tensor::identity(2), Tensor::vector({1.0, 0.0}), 2);
  EXPECT_NEAR(b.contribution_norm, 0.81, 1e-12);
  EXPECT_NEAR(b.bound, 0.81, 1e-9);
}

TEST(DecayBound, LagZero) {
  Rng rng(7);
  Tensor w_c(3u, std::size_t{3}), w_in(3u, std::size_t{2});
  for (double& v : w_c.values()) v = rng.uniform(-1, 1);
  for (double& v : w_in.values()) v = rng.uniform(-1, 1);
  Tensor x = Tensor::vector({0.3, -0.8});
  DecayBound b = srn_decay_bound(w_c, w_in, x, 0);
  EXPECT_NEAR(b.bound, num::l2_norm(num::matvec(w_in, x)), 1e-15);
  EXPECT_THROW(srn_decay_bound(w_c, w_in, x, -1), ValidationError);
}

TEST(DecayBound, NeverViolated) {
  Rng rng(8);
  int violations = 0;
  for (int draw = 0; draw < 1000; ++draw) {
    const std::size_t n = 1 + rng.below(5), m = 1 + rng.below(4);
    Tensor w_c(n, n), w_in(n, m), x(m);
    for (double& v : w_c.values()) v = rng.uniform(-1, 1);
    for (double& v : w_in.values()) v = rng.uniform(-1, 1);
    for (double& v : x.values()) v = rng.uniform(-1, 1);
    w_c = num::scale(w_c, rng.uniform(0.05, 0.99) / num::spectral_norm(w_c));
    const int lag = static_cast<int>(rng.below(51));
    DecayBound b = srn_decay_bound(w_c, w_in, x, lag);
    if (b.contribution_norm > b.bound + 1e-9) ++violations;
  }
  EXPECT_EQ(violations, 0);
}

TEST(DecayBound, BoundDecaysGeometrically) {
  Rng rng(9);
  Tensor w_c(3u, std::size_t{3}), w_in = Tensor::identity(3);
  for (double& v : w_c.values()) v = rng.uniform(-1, 1);
  w_c = num::scale(w_c, 0.7 / num::spectral_norm(w_c));
  const double smax = num::spectral_norm(w_c);
  Tensor x = Tensor::vector({1.0, 2.0, -1.0});
  for (int lag = 0; lag < 30; ++lag) {
    const double a = srn_decay_bound(w_c, w_in, x, lag).bound;
    const double b = srn_decay_bound(w_c, w_in, x, lag + 1).bound;
    EXPECT_NEAR(b / a, smax, 1e-12);
  }
}

TEST(MemoryResponse, SumsToFinalState) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    for (CellKind k : {CellKind::LSTM, CellKind::ELSTM}) {
      CellParams p = random_cell(shape_of(k, 2, 3, 4), rng);
      auto xs = random_inputs(rng, 12, 2);
      auto profile = memory_response(p, record_gate_inputs(p, xs), k);
      EXPECT_EQ(profile.length, 12u);
      EXPECT_LT(num::max_abs_diff(profile.total(), unroll(p, xs).c), 1e-9);
    }
  }
}

TEST(MemoryResponse, ElstmIsScaledLstm) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    CellParams e = random_cell(shape_of(CellKind::ELSTM, 2, 3, 5), rng);
    auto inputs = record_gate_inputs(e, random_inputs(rng, 11, 2));
    auto me = memory_response(e, inputs, CellKind::ELSTM);
    auto ml = memory_response(as_lstm(e), inputs, CellKind::LSTM);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      Tensor s = num::column(e.scale, scale_index(k + 1, 5) - 1);
      EXPECT_LT(num::max_abs_diff(me.responses[k], num::hadamard(s, ml.responses[k])), 1e-15);
    }
  }
}

TEST(MemoryResponse, ZeroInputTransformGivesZeros) {
  Rng rng(11);
  CellParams p = random_cell(shape_of(CellKind::LSTM, 2, 3), rng);
  p.W_in.fill(0.0);
  p.b_in.fill(0.0);
  auto profile = memory_response(p, record_gate_inputs(p, random_inputs(rng, 6, 2)),
                                 CellKind::LSTM);
  for (double n : profile.norms) EXPECT_EQ(n, 0.0);
}

TEST(MemoryResponse, ClosedForgetGateKeepsOnlyLastStep) {
  Rng rng(12);
  CellParams p = random_cell(shape_of(CellKind::LSTM, 2, 3), rng);
  p.b_f.fill(-800.0);
  auto profile = memory_response(p, record_gate_inputs(p, random_inputs(rng, 6, 2)),
                                 CellKind::LSTM);
  for (std::size_t k = 0; k + 1 < profile.length; ++k) EXPECT_EQ(profile.norms[k], 0.0);
  EXPECT_GT(profile.norms.back(), 0.0);
  EXPECT_DOUBLE_EQ(profile.strength_ratio(6), 1.0);
}

TEST(MemoryResponse, RejectsGruAndMismatchedKind) {
  Rng rng(13);
  CellParams g = init_cell(shape_of(CellKind::GRU, 2, 3), rng);
  std::vector<Tensor> xs = random_inputs(rng, 3, 2);
  EXPECT_THROW(memory_response(g, xs, CellKind::GRU), ValidationError);
  CellParams l = init_cell(shape_of(CellKind::LSTM, 2, 3), rng);
  EXPECT_THROW(memory_response(l, record_gate_inputs(l, xs), CellKind::ELSTM), ValidationError);
}

TEST(MemoryResponse, CsvRoundTrip) {
  Rng rng(14);
  CellParams p = random_cell(shape_of(CellKind::ELSTM, 2, 3, 4), rng);
  auto profile = memory_response(p, record_gate_inputs(p, random_inputs(rng, 8, 2)),
                                 CellKind::ELSTM);
  std::stringstream ss;
  write_profile_csv(ss, profile);
  std::string header;
  std::getline(std::stringstream(ss.str()), header);
  EXPECT_EQ(header, "position,component_0,component_1,component_2,norm");
  auto back = read_profile_csv(ss, CellKind::ELSTM);
  ASSERT_EQ(back.length, profile.length);
  for (std::size_t k = 0; k < profile.length; ++k) {
    EXPECT_EQ(back.responses[k], profile.responses[k]);
    EXPECT_EQ(back.norms[k], profile.norms[k]);
  }
}

TEST(MemoryResponse, CsvRejectsMalformedRow) {
  std::stringstream ss("position,component_0,norm\n1,0.5\n");
  EXPECT_THROW(read_profile_csv(ss, CellKind::LSTM), ParseError);
}
