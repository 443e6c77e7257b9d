#pragma once

#include <cstddef>
#include <vector>

#include "dalnet/tensor.hpp"

namespace dalnet {

// 2-D product: [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Binary ops accept equal shapes, a one-element operand (scalar broadcast),
// or a 1-D `b` whose length equals the last extent of `a` (trailing-axis
// broadcast, used for biases).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor square(const Tensor& x);

enum class Elementwise { add, sub, mul, scale, tanh, sigmoid, silu, exp };

// Dispatching form of the ops above; `factor` is used by `scale` only.
Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor& b = {}, double factor = 1.0);

// Softmax along `axis` of a 1-D or 2-D tensor, max-subtracted.
Tensor softmax(const Tensor& x, std::size_t axis);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Reductions over one axis of a 2-D tensor; the axis is dropped.
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x, std::size_t axis);

Tensor reshape(const Tensor& x, Shape shape);

// Row/column slicing and concatenation of 2-D tensors. Ranges are half-open.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);

// [B,C] -> [reps*B, C], row r*B + b is x[b].
Tensor tile_rows(const Tensor& x, std::size_t reps);

// Multiplies row r of a 2-D `x` by s[r]; `s` has R elements.
Tensor scale_rows(const Tensor& x, const Tensor& s);

// Elementwise product with a constant mask (no gradient to the mask).
Tensor mul_constant(const Tensor& x, std::vector<double> mask);

}  // namespace dalnet
