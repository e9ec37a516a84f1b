#pragma once

// Serial nested-loop reference implementations. Deliberately naive: they
// follow the textbook definitions directly and exist to check the parallel
// kernels, never to be fast.

#include "harmonica/kernels.hpp"

namespace harmonica::ref {

Tensor conv2d(const Tensor& input, const Tensor& kernels, const ConvSpec& spec);
Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& kernels, const ConvSpec& spec,
                             const Shape& input_shape);
Tensor conv2d_backward_kernels(const Tensor& input, const Tensor& grad_out, const ConvSpec& spec,
                               const Shape& kernel_shape);
Tensor pool2d(const Tensor& input, const PoolSpec& spec);
Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias);

}  // namespace harmonica::ref
