#pragma once

#include <span>
#include <string>

#include "harmonica/nn/layer.hpp"

namespace harmonica::nn {

struct GradCheckOptions {
    Scalar tolerance = 1e-4;
    Scalar step = 1e-5;
    /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor),
    /// so entries whose true gradient is ~0 are judged on an absolute scale.
    Scalar floor = 1e-6;
    bool check_input = true;
    bool training = true;
};

struct GradCheckReport {
    bool passed = false;
    Scalar max_rel_error = 0.0;        // over all parameter entries
    Scalar max_input_rel_error = 0.0;  // over input entries (when checked)
    std::size_t checked = 0;
    std::string worst;  // location of the largest error
    std::string diagnostics;
};

/// Compares analytic gradients of mean softmax cross-entropy against central
/// finite differences for every parameter entry (and optionally the input).
/// Noise layers are frozen for the duration; BN running statistics are
/// restored afterwards. The model output must be (B, classes, 1, 1).
GradCheckReport grad_check(Layer& model, const Tensor& input, std::span<const int> labels,
                           const GradCheckOptions& options = {});

}  // namespace harmonica::nn
