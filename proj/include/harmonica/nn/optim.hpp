#pragma once

#include <span>

#include "harmonica/nn/layer.hpp"

namespace harmonica::nn {

struct SgdOptions {
    Scalar lr = 0.01;
    Scalar momentum = 0.9;
    Scalar weight_decay = 5e-4;
};

/// Heavy-ball SGD with coupled L2 decay, per element:
///   buf <- momentum * buf + (grad + weight_decay * value)
///   value <- value - lr * buf
void sgd_step(std::span<Parameter* const> params, const SgdOptions& options);

}  // namespace harmonica::nn
