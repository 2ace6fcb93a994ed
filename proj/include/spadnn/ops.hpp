#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spadnn/tensor.hpp"

namespace spadnn {

enum class Mode { kTrain, kEval };

// out[b,o] = sum_i input[b,i] * weight[o,i] + bias[o]
Tensor affine(const Tensor& input, const Tensor& weight, const Tensor& bias);

// Zero-padded cross-correlation (no kernel flip).
// input [B,Cin,H,W], kernels [Cout,Cin,K,K], bias [Cout] -> [B,Cout,H',W'].
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              std::size_t stride = 1, std::size_t padding = 0);

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

// Per-channel normalisation of [B,C,H,W]. Train mode uses batch statistics
// and updates `state` (running variance uses the unbiased estimate); eval mode
// uses the running statistics.
Tensor batchnorm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, Mode mode);

// What to do with trailing rows/columns that do not fill a window.
enum class PoolTail { kReject, kDrop };

// Non-overlapping max pooling. Backward routes each window's gradient to the
// first maximal element in row-major order.
Tensor maxpool2d(const Tensor& input, std::size_t window,
                 PoolTail tail = PoolTail::kReject);

// Mean over the batch of -log softmax(logits)[label].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

Tensor relu(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);
// Element-wise mean of equally shaped tensors.
Tensor average(std::span<const Tensor> xs);
// [B, ...] -> [B, prod(...)]
Tensor flatten(const Tensor& x);

}  // namespace spadnn
