#pragma once

// OpenMP-parallel numeric kernels. Every output element is produced by a
// single thread and reduced in a fixed loop order, so results are bitwise
// identical for any thread count. Serial reference versions live in
// reference.hpp and are used by the test suite and the benchmark.

#include <cstddef>
#include <span>
#include <vector>

#include "harmonica/tensor.hpp"

namespace harmonica {

enum class PoolKind { max, avg };

struct PoolSpec {
    PoolKind kind = PoolKind::max;
    std::size_t window = 2;
    std::size_t stride = 2;
    std::size_t pad = 0;

    [[nodiscard]] ConvSpec as_conv() const { return ConvSpec::square(window, stride, pad); }
};

/// Rank-1 factors of a bank of separable filters: filter m is the outer
/// product col[m] (over rows) x row[m] (over columns).
struct SeparableFilters {
    std::vector<std::vector<Scalar>> col;
    std::vector<std::vector<Scalar>> row;
};

namespace kernels {

// Grouped cross-correlation. kernels: (M, C/groups, Kh, Kw).
Tensor conv2d(const Tensor& input, const Tensor& kernels, const ConvSpec& spec);
Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& kernels, const ConvSpec& spec,
                             const Shape& input_shape);
Tensor conv2d_backward_kernels(const Tensor& input, const Tensor& grad_out, const ConvSpec& spec,
                               const Shape& kernel_shape);

// Each filter applies the same rank-1 kernel to every channel of its group:
// column factor first (vertical pass), then row factor.
Tensor conv2d_separable(const Tensor& input, const SeparableFilters& filters, const ConvSpec& spec);

struct PoolResult {
    Tensor output;
    std::vector<std::size_t> argmax;  // flat input index per output element; empty for avg
};

// Max pooling pads with -inf; average pooling pads with zeros and always
// divides by window^2.
PoolResult pool2d(const Tensor& input, const PoolSpec& spec);
Tensor pool2d_backward(const Tensor& grad_out, const Shape& input_shape, const PoolSpec& spec,
                       std::span<const std::size_t> argmax);

// weights: (out, in, 1, 1); bias: (1, out, 1, 1) or empty. Input is flattened
// per sample; output is (B, out, 1, 1).
Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias);
Tensor linear_backward_input(const Tensor& grad_out, const Tensor& weights, const Shape& input_shape);
void linear_backward_params(const Tensor& input, const Tensor& grad_out, Tensor& grad_weights, Tensor& grad_bias);

}  // namespace kernels
}  // namespace harmonica
