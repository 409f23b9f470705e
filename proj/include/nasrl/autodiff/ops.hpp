#pragma once

#include <cstddef>
#include <span>

#include "nasrl/autodiff/tensor.hpp"

namespace nasrl::ad {

// Elementwise ops require identical shapes; there is no broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
// Gradient goes to `a` on ties.
Tensor minimum(const Tensor& a, const Tensor& b);
// Gradient passes where lo <= x <= hi.
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
// Contiguous range of the flattened tensor, returned as rank 1.
Tensor slice(const Tensor& a, std::size_t begin, std::size_t length);
// Row `index` of a rank-2 tensor, returned as rank 1.
Tensor row(const Tensor& table, std::size_t index);

enum class PadMode { same_size, valid };

// input [C,H,W] or [N,C,H,W]; weight [Co,C,k,k]; bias [Co] or undefined.
// same_size: output spatial size ceil(H/stride), symmetric zero padding with
// the odd cell on the bottom/right.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t stride, PadMode mode);
Tensor conv2d(const Tensor& input, const Tensor& weight, std::size_t stride, PadMode mode);

// input [C,H,W] or [N,C,H,W]. Gradient flows to the window argmax; ties go to
// the lowest flat index.
Tensor maxpool2d(const Tensor& input, std::size_t kernel, std::size_t stride,
                 PadMode mode = PadMode::same_size);

// input [n] or [N,n]; weight [m,n]; bias [m] or undefined.
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

// Centers a [C,H,W] (or [N,C,H,W]) feature map inside a T x T grid per channel,
// zero padding or center cropping as needed, then flattens to C*T*T
// ([N, C*T*T] when batched). `target_len` must equal C*T*T.
Tensor pad_to_exact(const Tensor& featmap, std::size_t target_len);

// Row-wise log-softmax of [A] or [N,A].
Tensor log_softmax(const Tensor& logits);
// out[i] = logp[i, index[i]] for [N,A]; scalar result for rank-1 input.
Tensor gather(const Tensor& logp, std::span<const std::size_t> index);
// Row-wise -sum exp(l) * l for log-probabilities l.
Tensor entropy_from_log_probs(const Tensor& logp);

// Output spatial extent of conv2d/maxpool2d along one axis.
std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride, PadMode mode);

}  // namespace nasrl::ad
