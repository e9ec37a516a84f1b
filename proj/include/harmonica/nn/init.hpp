#pragma once

#include "harmonica/rng.hpp"
#include "harmonica/tensor.hpp"

namespace harmonica::nn {

void uniform_init(Tensor& t, Scalar bound, Rng& rng);

/// sqrt(6 / fan_in).
Scalar he_uniform_bound(std::size_t fan_in);

}  // namespace harmonica::nn
