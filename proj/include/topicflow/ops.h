#pragma once

#include <vector>

#include "topicflow/tensor.h"

namespace topicflow {
namespace ops {

// Elementwise, same shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

// 2-D matrix product [M,K]x[K,N] -> [M,N].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Broadcast a row vector ({1,C} or {C}) over every row of m ({R,C}).
Tensor add_rows(const Tensor& m, const Tensor& v);
Tensor mul_rows(const Tensor& m, const Tensor& v);

// Broadcast multiply/divide by a scalar tensor (shape {} or {1}).
Tensor scale_by(const Tensor& a, const Tensor& s);
Tensor div_by(const Tensor& a, const Tensor& s);

// 2-D concatenation / slicing.
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& m, int start, int len);
Tensor slice_rows(const Tensor& m, int start, int len);
Tensor select_row(const Tensor& m, int r);  // {1,C}

// Elementwise nonlinearities.
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor clamp_min(const Tensor& a, double lo);

// Softmax family over the last axis, max-subtracted for stability.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);

// Reductions. Sequential accumulation in index order (bit-reproducible).
Tensor sum(const Tensor& a);                // -> scalar {}
Tensor mean(const Tensor& a);               // -> scalar {}
Tensor sum_lastdim(const Tensor& a);        // {...,C} -> {...,1}
Tensor dot(const Tensor& a, const Tensor& b);  // sum(mul(a,b))

// Row gather from an embedding table E {V,d} -> {ids.size(), d}.
Tensor embedding(const Tensor& table, const std::vector<int>& ids);

// Per-row (last axis) layer normalization with learned gain/bias ({C}).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Masked scaled dot-product attention. q {Lq,dh}, k {Lk,dh}, v {Lk,dv};
// mask, when defined, is a {Lq,Lk} additive constant (0 for visible,
// a large negative for masked). Returns {Lq,dv}.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& mask);

// Additive mask value guaranteed to underflow to exactly zero weight.
inline constexpr double kMaskedScore = -1e30;

}  // namespace ops
}  // namespace topicflow
