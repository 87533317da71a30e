#include "elstm/numkernel.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "elstm/errors.h"

namespace elstm::num {
namespace {

void require_vector(const Tensor& t, const char* op) {
  if (!t.is_vector()) {
    throw DimensionError(std::string(op) + ": expected vector, got " +
                         t.shape_string());
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         a.shape_string() + " vs " + b.shape_string());
  }
}

template <class F>
Tensor map(const Tensor& x, F f, const char* op) {
  Tensor out = x;
  for (double& v : out.values()) v = f(v);
  require_finite(out, op);
  return out;
}

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, F f, const char* op) {
  require_same(a, b, op);
  Tensor out = a;
  auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = f(ov[i], bv[i]);
  require_finite(out, op);
  return out;
}

// Power iteration for the dominant eigenvalue of a symmetric PSD operator.
double dominant_eigenvalue(const std::function<Tensor(const Tensor&)>& apply,
                           std::size_t n, const SpectralOptions& opts,
                           const char* what) {
  if (opts.tol <= 0.0) throw ValidationError("spectral tolerance must be > 0");
  if (n == 0) return 0.0;
  Rng rng(opts.seed);
  Tensor v(n);
  for (double& x : v.values()) x = rng.normal();
  v = scale(v, 1.0 / l2_norm(v));
  double lambda = 0.0;
  for (int it = 0; it < opts.max_iter; ++it) {
    Tensor y = apply(v);
    lambda = dot(v, y);
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - lambda * v[i];
      residual += r * r;
    }
    residual = std::sqrt(residual);
    if (residual <= opts.tol * std::max(std::abs(lambda), 1.0)) return lambda;
    const double norm = l2_norm(y);
    if (norm == 0.0) return 0.0;
    v = scale(y, 1.0 / norm);
  }
  throw ConvergenceError(std::string(what) + ": power iteration did not converge in " +
                             std::to_string(opts.max_iter) + " iterations",
                         lambda);
}

}  // namespace

void require_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite value in result");
  }
}

Tensor matvec(const Tensor& w, const Tensor& x) {
  if (!w.is_matrix() || !x.is_vector() || w.cols() != x.size()) {
    throw DimensionError("matvec: cannot multiply " + w.shape_string() +
                         " by " + x.shape_string());
  }
  Tensor out(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    auto row = w.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
  require_finite(out, "matvec");
  return out;
}

Tensor matvec_transposed(const Tensor& w, const Tensor& x) {
  if (!w.is_matrix() || !x.is_vector() || w.rows() != x.size()) {
    throw DimensionError("matvec_transposed: cannot multiply transpose of " +
                         w.shape_string() + " by " + x.shape_string());
  }
  Tensor out(w.cols());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    auto row = w.row(r);
    const double xr = x[r];
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c] * xr;
  }
  require_finite(out, "matvec_transposed");
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (!a.is_matrix() || !b.is_matrix() || a.cols() != b.rows()) {
    throw DimensionError("matmul: cannot multiply " + a.shape_string() +
                         " by " + b.shape_string());
  }
  Tensor out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a.at(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out.at(i, j) += aik * b.at(k, j);
    }
  }
  require_finite(out, "matmul");
  return out;
}

Tensor transpose(const Tensor& a) {
  if (!a.is_matrix()) {
    throw DimensionError("transpose: expected matrix, got " + a.shape_string());
  }
  Tensor out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, [](double x, double y) { return x + y; }, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return zip(a, b, [](double x, double y) { return x - y; }, "sub");
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  return zip(a, b, [](double x, double y) { return x * y; }, "hadamard");
}

Tensor scale(const Tensor& a, double k) {
  return map(a, [k](double x) { return k * x; }, "scale");
}

Tensor one_minus(const Tensor& a) {
  return map(a, [](double x) { return 1.0 - x; }, "one_minus");
}

Tensor concat(const Tensor& a, const Tensor& b) {
  require_vector(a, "concat");
  require_vector(b, "concat");
  std::vector<double> v(a.values().begin(), a.values().end());
  v.insert(v.end(), b.values().begin(), b.values().end());
  return Tensor::vector(std::move(v));
}

Tensor column(const Tensor& m, std::size_t j) {
  if (!m.is_matrix() || j >= m.cols()) {
    throw DimensionError("column: index " + std::to_string(j) +
                         " out of range for " + m.shape_string());
  }
  Tensor out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m.at(r, j);
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& x) {
  return map(x, [](double v) { return sigmoid(v); }, "sigmoid");
}

Tensor tanh(const Tensor& x) {
  return map(x, [](double v) { return std::tanh(v); }, "tanh");
}

Tensor sigmoid_derivative(const Tensor& x) {
  return map(x, [](double v) {
    const double s = sigmoid(v);
    return s * (1.0 - s);
  }, "sigmoid_derivative");
}

Tensor tanh_derivative(const Tensor& x) {
  return map(x, [](double v) {
    const double t = std::tanh(v);
    return 1.0 - t * t;
  }, "tanh_derivative");
}

Tensor softmax(const Tensor& x) {
  require_vector(x, "softmax");
  Tensor out = x;
  if (x.empty()) return out;
  const double mx = *std::max_element(x.values().begin(), x.values().end());
  double total = 0.0;
  for (double& v : out.values()) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : out.values()) v /= total;
  require_finite(out, "softmax");
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v * v;
  return std::sqrt(acc);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor matpow(const Tensor& w, int k) {
  if (!w.is_matrix() || w.rows() != w.cols()) {
    throw DimensionError("matpow: expected square matrix, got " + w.shape_string());
  }
  if (k < 0) throw ValidationError("matpow: negative exponent");
  Tensor result = Tensor::identity(w.rows());
  Tensor base = w;
  while (k > 0) {
    if (k & 1) result = matmul(result, base);
    k >>= 1;
    if (k) base = matmul(base, base);
  }
  return result;
}

double spectral_norm(const Tensor& w, const SpectralOptions& opts) {
  if (!w.is_matrix()) {
    throw DimensionError("spectral_norm: expected matrix, got " + w.shape_string());
  }
  const double lambda = dominant_eigenvalue(
      [&w](const Tensor& v) { return matvec_transposed(w, matvec(w, v)); },
      w.cols(), opts, "spectral_norm");
  return std::sqrt(std::max(lambda, 0.0));
}

double min_singular_value(const Tensor& w, const SpectralOptions& opts) {
  if (!w.is_matrix()) {
    throw DimensionError("min_singular_value: expected matrix, got " +
                         w.shape_string());
  }
  const double smax = spectral_norm(w, opts);
  const double shift = smax * smax;
  const double mu = dominant_eigenvalue(
      [&](const Tensor& v) {
        return sub(scale(v, shift), matvec_transposed(w, matvec(w, v)));
      },
      w.cols(), opts, "min_singular_value");
  return std::sqrt(std::max(shift - mu, 0.0));
}

}  // namespace elstm::num
