#include "elstm/graph.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "elstm/errors.h"
#include "elstm/numkernel.h"

namespace elstm::ad {

Var Graph::push(Tensor value, bool needs_grad, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Tensor& Graph::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.sink) return *n.sink;
  if (n.grad.empty()) {
    const Tensor& v = val(id);
    if (v.is_matrix()) n.grad = Tensor(v.rows(), v.cols());
    else if (!v.empty()) n.grad = Tensor(v.size());
  }
  return n.grad;
}

const Tensor& Graph::value(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::out_of_range("graph: invalid variable handle");
  }
  return val(v.id);
}

Var Graph::constant(Tensor value) {
  num::require_finite(value, "constant");
  return push(std::move(value), false, {});
}

Var Graph::reference(const Tensor& value) {
  Var v = push(Tensor(), false, {});
  nodes_[v.id].ref = &value;
  return v;
}

Var Graph::param(ParamTape::Entry& entry) {
  num::require_finite(entry.value, "parameter");
  Var v = push(Tensor(), true, [](Graph&, std::size_t) {});
  nodes_[v.id].ref = &entry.value;
  nodes_[v.id].sink = &entry.grad;
  return v;
}

Var Graph::matvec(Var w, Var x) {
  return push(num::matvec(value(w), value(x)), needs(w) || needs(x),
              [w, x](Graph& g, std::size_t self) {
                const Tensor& gy = g.nodes_[self].grad;
                if (g.needs(w)) {
                  const Tensor& xv = g.val(x.id);
                  Tensor& gw = g.grad(w.id);
                  for (std::size_t r = 0; r < gy.size(); ++r) {
                    const double gr = gy[r];
                    if (gr == 0.0) continue;
                    auto row = gw.row(r);
                    for (std::size_t c = 0; c < row.size(); ++c) row[c] += gr * xv[c];
                  }
                }
                if (g.needs(x)) {
                  Tensor t = num::matvec_transposed(g.val(w.id), gy);
                  Tensor& gx = g.grad(x.id);
                  for (std::size_t i = 0; i < t.size(); ++i) gx[i] += t[i];
                }
              });
}

Var Graph::affine(Var w, Var x, Var b) {
  return affine_activation(w, x, b, Activation::Identity);
}

Var Graph::affine_activation(Var w, Var x, Var b, Activation act) {
  Tensor y = num::add(num::matvec(value(w), value(x)), value(b));
  if (act == Activation::Sigmoid) y = num::sigmoid(y);
  if (act == Activation::Tanh) y = num::tanh(y);
  return push(std::move(y), needs(w) || needs(x) || needs(b),
              [w, x, b, act](Graph& g, std::size_t self) {
                const Tensor& y = g.nodes_[self].value;
                Tensor gpre = g.nodes_[self].grad;
                for (std::size_t i = 0; i < gpre.size(); ++i) {
                  if (act == Activation::Sigmoid) gpre[i] *= y[i] * (1.0 - y[i]);
                  if (act == Activation::Tanh) gpre[i] *= 1.0 - y[i] * y[i];
                }
                if (g.needs(b)) {
                  Tensor& gb = g.grad(b.id);
                  for (std::size_t i = 0; i < gpre.size(); ++i) gb[i] += gpre[i];
                }
                if (g.needs(w)) {
                  const Tensor& xv = g.val(x.id);
                  Tensor& gw = g.grad(w.id);
                  for (std::size_t r = 0; r < gpre.size(); ++r) {
                    const double gr = gpre[r];
                    if (gr == 0.0) continue;
                    auto row = gw.row(r);
                    for (std::size_t c = 0; c < row.size(); ++c) row[c] += gr * xv[c];
                  }
                }
                if (g.needs(x)) {
                  const Tensor& wv = g.val(w.id);
                  Tensor& gx = g.grad(x.id);
                  for (std::size_t r = 0; r < gpre.size(); ++r) {
                    const double gr = gpre[r];
                    if (gr == 0.0) continue;
                    auto row = wv.row(r);
                    for (std::size_t c = 0; c < row.size(); ++c) gx[c] += gr * row[c];
                  }
                }
              });
}

Var Graph::affine_sigmoid(Var w, Var x, Var b) {
  return affine_activation(w, x, b, Activation::Sigmoid);
}

Var Graph::affine_tanh(Var w, Var x, Var b) {
  return affine_activation(w, x, b, Activation::Tanh);
}

cells::CellStateT<Var> Graph::fused_lstm_step(const cells::CellWeights<Var>& w,
                                              const cells::CellStateT<Var>& s, Var x,
                                              std::size_t t) {
  const bool elstm = w.shape.kind == cells::CellKind::ELSTM;
  Var in = cells::gate_input(*this, w, s, x);
  const Tensor& iv = value(in);
  const Tensor& cp = value(s.c);
  const std::size_t n = cp.size(), d = iv.size();
  const Var weights[4] = {w.W_f, w.W_i, w.W_o, w.W_in};
  const Var biases[4] = {w.b_f, w.b_i, w.b_o, w.b_in};
  for (int k = 0; k < 4; ++k) {
    const Tensor& wk = value(weights[k]);
    const Tensor& bk = value(biases[k]);
    if (!wk.is_matrix() || wk.rows() != n || wk.cols() != d || bk.size() != n) {
      throw DimensionError("lstm step: gate " + wk.shape_string() + " + " +
                           bk.shape_string() + " does not fit input " +
                           iv.shape_string() + " and state " + cp.shape_string());
    }
  }
  const std::size_t col = elstm ? cells::scale_index(t, w.shape.scale_period) - 1 : 0;
  if (elstm) {
    const Tensor& sv = value(w.scale);
    if (sv.rows() != n || col >= sv.cols() || value(w.b_c).size() != n) {
      throw DimensionError("elstm step: scale " + sv.shape_string() +
                           " does not fit state " + cp.shape_string());
    }
  }

  // cache: f, i, o, g, tanh(c') for the backward pass.
  std::vector<double> cache(5 * n);
  double* act[4] = {cache.data(), cache.data() + n, cache.data() + 2 * n,
                    cache.data() + 3 * n};
  double* tc = cache.data() + 4 * n;
  for (int k = 0; k < 4; ++k) {
    const Tensor& wk = value(weights[k]);
    const Tensor& bk = value(biases[k]);
    for (std::size_t r = 0; r < n; ++r) {
      auto row = wk.row(r);
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += row[c] * iv[c];
      const double pre = acc + bk[r];
      act[k][r] = k == 3 ? std::tanh(pre) : num::sigmoid(pre);
    }
  }
  Tensor out(2 * n);
  for (std::size_t r = 0; r < n; ++r) {
    const double f = act[0][r], i = act[1][r], o = act[2][r], g = act[3][r];
    double c;
    if (elstm) {
      c = f * cp[r] + value(w.scale).at(r, col) * (i * g) + value(w.b_c)[r];
    } else {
      c = f * cp[r] + i * g;
    }
    tc[r] = std::tanh(c);
    out[r] = c;
    out[n + r] = o * tc[r];
  }
  num::require_finite(out, "lstm step");

  bool any = needs(in) || needs(s.c);
  for (int k = 0; k < 4; ++k) any = any || needs(weights[k]) || needs(biases[k]);
  if (elstm) any = any || needs(w.scale) || needs(w.b_c);
  const Var scale = elstm ? w.scale : Var{}, b_c = elstm ? w.b_c : Var{};
  const Var c_prev = s.c;
  Var y = push(std::move(out), any,
               [=, cache = std::move(cache)](Graph& g, std::size_t self) {
    const Tensor& gy = g.nodes_[self].grad;
    const double* f = cache.data();
    const double* i = f + n;
    const double* o = i + n;
    const double* gt = o + n;
    const double* tc = gt + n;
    const Tensor& cpv = g.val(c_prev.id);
    // Pre-activation gradients of f, i, o, g.
    std::vector<double> pre(4 * n);
    for (std::size_t r = 0; r < n; ++r) {
      const double gh = gy[n + r];
      const double gc = gy[r] + gh * o[r] * (1.0 - tc[r] * tc[r]);
      const double sr = scale.valid() ? g.val(scale.id).at(r, col) : 1.0;
      pre[r] = gc * cpv[r] * f[r] * (1.0 - f[r]);
      pre[n + r] = gc * sr * gt[r] * i[r] * (1.0 - i[r]);
      pre[2 * n + r] = gh * tc[r] * o[r] * (1.0 - o[r]);
      pre[3 * n + r] = gc * sr * i[r] * (1.0 - gt[r] * gt[r]);
      if (g.needs(c_prev)) g.grad(c_prev.id)[r] += gc * f[r];
      if (scale.valid() && g.needs(scale)) g.grad(scale.id).at(r, col) += gc * i[r] * gt[r];
      if (b_c.valid() && g.needs(b_c)) g.grad(b_c.id)[r] += gc;
    }
    const Tensor& ivv = g.val(in.id);
    for (int k = 0; k < 4; ++k) {
      const double* p = pre.data() + k * n;
      if (g.needs(biases[k])) {
        Tensor& gb = g.grad(biases[k].id);
        for (std::size_t r = 0; r < n; ++r) gb[r] += p[r];
      }
      if (g.needs(weights[k])) {
        Tensor& gw = g.grad(weights[k].id);
        for (std::size_t r = 0; r < n; ++r) {
          if (p[r] == 0.0) continue;
          auto row = gw.row(r);
          for (std::size_t c = 0; c < d; ++c) row[c] += p[r] * ivv[c];
        }
      }
      if (g.needs(in)) {
        const Tensor& wv = g.val(weights[k].id);
        Tensor& gin = g.grad(in.id);
        for (std::size_t r = 0; r < n; ++r) {
          if (p[r] == 0.0) continue;
          auto row = wv.row(r);
          for (std::size_t c = 0; c < d; ++c) gin[c] += p[r] * row[c];
        }
      }
    }
  });
  return {slice(y, 0, n), slice(y, n, n)};
}

Var Graph::add(Var a, Var b) {
  return push(num::add(value(a), value(b)), needs(a) || needs(b),
              [a, b](Graph& g, std::size_t self) {
                const Tensor& gy = g.nodes_[self].grad;
                for (Var in : {a, b}) {
                  if (!g.needs(in)) continue;
                  Tensor& gi = g.grad(in.id);
                  for (std::size_t i = 0; i < gy.size(); ++i) gi[i] += gy[i];
                }
              });
}

Var Graph::sub(Var a, Var b) {
  return push(num::sub(value(a), value(b)), needs(a) || needs(b),
              [a, b](Graph& g, std::size_t self) {
                const Tensor& gy = g.nodes_[self].grad;
                if (g.needs(a)) {
                  Tensor& ga = g.grad(a.id);
                  for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
                }
                if (g.needs(b)) {
                  Tensor& gb = g.grad(b.id);
                  for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
                }
              });
}

Var Graph::mul(Var a, Var b) {
  return push(num::hadamard(value(a), value(b)), needs(a) || needs(b),
              [a, b](Graph& g, std::size_t self) {
                const Tensor& gy = g.nodes_[self].grad;
                if (g.needs(a)) {
                  const Tensor& bv = g.val(b.id);
                  Tensor& ga = g.grad(a.id);
                  for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bv[i];
                }
                if (g.needs(b)) {
                  const Tensor& av = g.val(a.id);
                  Tensor& gb = g.grad(b.id);
                  for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * av[i];
                }
              });
}

Var Graph::sigmoid(Var x) {
  return push(num::sigmoid(value(x)), needs(x), [x](Graph& g, std::size_t self) {
    const Tensor& gy = g.nodes_[self].grad;
    const Tensor& y = g.nodes_[self].value;
    Tensor& gx = g.grad(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * y[i] * (1.0 - y[i]);
  });
}

Var Graph::tanh(Var x) {
  return push(num::tanh(value(x)), needs(x), [x](Graph& g, std::size_t self) {
    const Tensor& gy = g.nodes_[self].grad;
    const Tensor& y = g.nodes_[self].value;
    Tensor& gx = g.grad(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * (1.0 - y[i] * y[i]);
  });
}

Var Graph::one_minus(Var x) {
  return push(num::one_minus(value(x)), needs(x), [x](Graph& g, std::size_t self) {
    const Tensor& gy = g.nodes_[self].grad;
    Tensor& gx = g.grad(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] -= gy[i];
  });
}

Var Graph::concat(Var a, Var b) {
  return push(num::concat(value(a), value(b)), needs(a) || needs(b),
              [a, b](Graph& g, std::size_t self) {
                const Tensor& gy = g.nodes_[self].grad;
                const std::size_t na = g.val(a.id).size();
                if (g.needs(a)) {
                  Tensor& ga = g.grad(a.id);
                  for (std::size_t i = 0; i < na; ++i) ga[i] += gy[i];
                }
                if (g.needs(b)) {
                  Tensor& gb = g.grad(b.id);
                  for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[na + i];
                }
              });
}

Var Graph::column(Var m, std::size_t j) {
  return push(num::column(value(m), j), needs(m), [m, j](Graph& g, std::size_t self) {
    const Tensor& gy = g.nodes_[self].grad;
    Tensor& gm = g.grad(m.id);
    for (std::size_t r = 0; r < gy.size(); ++r) gm.at(r, j) += gy[r];
  });
}

Var Graph::row(Var m, std::size_t i) {
  const Tensor& mv = value(m);
  if (!mv.is_matrix() || i >= mv.rows()) {
    throw DimensionError("row: index " + std::to_string(i) + " out of range for " +
                         mv.shape_string());
  }
  auto r = mv.row(i);
  return push(Tensor::vector(std::vector<double>(r.begin(), r.end())), needs(m),
              [m, i](Graph& g, std::size_t self) {
                const Tensor& gy = g.nodes_[self].grad;
                auto gr = g.grad(m.id).row(i);
                for (std::size_t c = 0; c < gr.size(); ++c) gr[c] += gy[c];
              });
}

Var Graph::slice(Var x, std::size_t offset, std::size_t length) {
  const Tensor& xv = value(x);
  if (!xv.is_vector() || offset + length > xv.size()) {
    throw DimensionError("slice: [" + std::to_string(offset) + ", " +
                         std::to_string(offset + length) + ") out of range for " +
                         xv.shape_string());
  }
  auto part = xv.values().subspan(offset, length);
  return push(Tensor::vector(std::vector<double>(part.begin(), part.end())), needs(x),
              [x, offset](Graph& g, std::size_t self) {
                const Tensor& gy = g.nodes_[self].grad;
                Tensor& gx = g.grad(x.id);
                for (std::size_t i = 0; i < gy.size(); ++i) gx[offset + i] += gy[i];
              });
}

Var Graph::scale(Var x, double k) {
  return push(num::scale(value(x), k), needs(x), [x, k](Graph& g, std::size_t self) {
    const Tensor& gy = g.nodes_[self].grad;
    Tensor& gx = g.grad(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += k * gy[i];
  });
}

Var Graph::scale_by(Var v, Var s) {
  if (value(s).size() != 1) {
    throw DimensionError("scale_by: scale must have one element, got " +
                         value(s).shape_string());
  }
  return push(num::scale(value(v), value(s)[0]), needs(v) || needs(s),
              [v, s](Graph& g, std::size_t self) {
                const Tensor& gy = g.nodes_[self].grad;
                if (g.needs(v)) {
                  const double k = g.val(s.id)[0];
                  Tensor& gv = g.grad(v.id);
                  for (std::size_t i = 0; i < gy.size(); ++i) gv[i] += k * gy[i];
                }
                if (g.needs(s)) {
                  g.grad(s.id)[0] += num::dot(gy, g.val(v.id));
                }
              });
}

Var Graph::element(Var v, std::size_t i) {
  const Tensor& vv = value(v);
  if (i >= vv.size()) {
    throw DimensionError("element: index " + std::to_string(i) +
                         " out of range for " + vv.shape_string());
  }
  return push(Tensor::vector({vv[i]}), needs(v), [v, i](Graph& g, std::size_t self) {
    g.grad(v.id)[i] += g.nodes_[self].grad[0];
  });
}

Var Graph::stack(std::span<const Var> scalars) {
  std::vector<double> vals;
  bool any = false;
  for (Var s : scalars) {
    if (value(s).size() != 1) throw DimensionError("stack: expected single elements");
    vals.push_back(value(s)[0]);
    any = any || needs(s);
  }
  std::vector<Var> inputs(scalars.begin(), scalars.end());
  return push(Tensor::vector(std::move(vals)), any,
              [inputs](Graph& g, std::size_t self) {
                const Tensor& gy = g.nodes_[self].grad;
                for (std::size_t i = 0; i < inputs.size(); ++i) {
                  if (g.needs(inputs[i])) g.grad(inputs[i].id)[0] += gy[i];
                }
              });
}

Var Graph::softmax(Var x) {
  return push(num::softmax(value(x)), needs(x), [x](Graph& g, std::size_t self) {
    const Tensor& gy = g.nodes_[self].grad;
    const Tensor& y = g.nodes_[self].value;
    const double gdot = num::dot(gy, y);
    Tensor& gx = g.grad(x.id);
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += y[i] * (gy[i] - gdot);
  });
}

Var Graph::softmax_cross_entropy(Var logits, std::size_t label) {
  const Tensor& l = value(logits);
  if (!l.is_vector() || label >= l.size()) {
    throw DimensionError("softmax_cross_entropy: label " + std::to_string(label) +
                         " out of range for " + l.shape_string());
  }
  Tensor probs = num::softmax(l);
  // log-sum-exp form; log(probs[label]) underflows for extreme logits.
  double mx = l[0];
  for (double v : l.values()) mx = std::max(mx, v);
  double total = 0.0;
  for (double v : l.values()) total += std::exp(v - mx);
  Tensor out = Tensor::vector({mx + std::log(total) - l[label]});
  return push(std::move(out), needs(logits),
              [logits, label, probs = std::move(probs)](Graph& g, std::size_t self) {
                const double gy = g.nodes_[self].grad[0];
                Tensor& gl = g.grad(logits.id);
                for (std::size_t i = 0; i < probs.size(); ++i) {
                  gl[i] += gy * (probs[i] - (i == label ? 1.0 : 0.0));
                }
              });
}

Var Graph::negative_log(Var probs, std::size_t label, double floor,
                        std::size_t* clamped) {
  const Tensor& p = value(probs);
  if (!p.is_vector() || label >= p.size()) {
    throw DimensionError("negative_log: label " + std::to_string(label) +
                         " out of range for " + p.shape_string());
  }
  const double pk = p[label];
  const bool hit = !(pk > floor);
  if (hit && clamped) ++*clamped;
  const double used = hit ? floor : pk;
  return push(Tensor::vector({-std::log(used)}), needs(probs),
              [probs, label, hit, used](Graph& g, std::size_t self) {
                if (hit) return;
                g.grad(probs.id)[label] -= g.nodes_[self].grad[0] / used;
              });
}

Var Graph::sum(std::span<const Var> scalars) {
  double total = 0.0;
  bool any = false;
  for (Var s : scalars) {
    if (value(s).size() != 1) throw DimensionError("sum: expected single elements");
    total += value(s)[0];
    any = any || needs(s);
  }
  std::vector<Var> inputs(scalars.begin(), scalars.end());
  return push(Tensor::vector({total}), any, [inputs](Graph& g, std::size_t self) {
    const double gy = g.nodes_[self].grad[0];
    for (Var in : inputs) {
      if (g.needs(in)) g.grad(in.id)[0] += gy;
    }
  });
}

void Graph::backward(Var root, double seed) {
  if (consumed_) throw std::logic_error("graph: backward already run");
  consumed_ = true;
  if (!needs(root)) return;
  if (value(root).size() != 1) {
    throw DimensionError("backward: root must be a single element, got " +
                         value(root).shape_string());
  }
  grad(root.id)[0] += seed;
  for (std::size_t i = static_cast<std::size_t>(root.id) + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.sink) continue;
    if (n.grad.empty()) continue;
    n.backward(*this, i);
  }
}

}  // namespace elstm::ad
