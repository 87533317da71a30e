#pragma once

#include <cstddef>
#include <cstdint>

#include "elstm/rng.h"
#include "elstm/tensor.h"

// Dense linear algebra and activations used by every other module. Every
// function validates shapes and rejects non-finite results.
namespace elstm::num {

Tensor matvec(const Tensor& w, const Tensor& x);
// wᵀ·x without forming the transpose.
Tensor matvec_transposed(const Tensor& w, const Tensor& x);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double k);
Tensor one_minus(const Tensor& a);
Tensor concat(const Tensor& a, const Tensor& b);
Tensor column(const Tensor& m, std::size_t j);

double sigmoid(double x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
// Derivatives evaluated at the pre-activation x.
Tensor sigmoid_derivative(const Tensor& x);
Tensor tanh_derivative(const Tensor& x);
Tensor softmax(const Tensor& x);

double dot(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& x);
double max_abs_diff(const Tensor& a, const Tensor& b);
Tensor matpow(const Tensor& w, int k);

struct SpectralOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  std::uint64_t seed = 0x5eed;
};

// Largest singular value by power iteration on WᵀW. Stops once the
// eigen-residual |WᵀWv − λv| drops below tol·max(λ, 1).
double spectral_norm(const Tensor& w, const SpectralOptions& opts = {});
// Smallest singular value by power iteration on the shifted operator
// σ_max²·I − WᵀW.
double min_singular_value(const Tensor& w, const SpectralOptions& opts = {});

void require_finite(const Tensor& t, const char* op);

}  // namespace elstm::num
