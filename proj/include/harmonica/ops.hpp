#pragma once

// Public tensor-core operations. Thin, validated entry points over the
// parallel kernels plus the elementwise and loss primitives.

#include <span>

#include "harmonica/kernels.hpp"

namespace harmonica {

inline Tensor conv2d(const Tensor& input, const Tensor& kernels, const ConvSpec& spec) {
    return kernels::conv2d(input, kernels, spec);
}

inline Tensor conv2d_separable(const Tensor& input, const SeparableFilters& filters, const ConvSpec& spec) {
    return kernels::conv2d_separable(input, filters, spec);
}

inline Tensor pool(const Tensor& input, PoolKind kind, std::size_t window, std::size_t stride, std::size_t pad = 0) {
    return kernels::pool2d(input, PoolSpec{kind, window, stride, pad}).output;
}

inline Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    return kernels::linear(input, weights, bias);
}

Tensor relu(const Tensor& input);

struct LossResult {
    Scalar loss = 0.0;  // mean negative log-likelihood over the batch
    Tensor probs;       // (B, classes, 1, 1)
};

/// logits: (B, classes, 1, 1). Throws InputError for labels outside [0, classes).
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

/// d(loss)/d(logits) = (probs - onehot) / B.
Tensor softmax_cross_entropy_grad(const LossResult& result, std::span<const int> labels);

/// Index of the largest logit per sample.
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace harmonica
