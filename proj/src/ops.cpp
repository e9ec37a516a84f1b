#include "harmonica/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace harmonica {

Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (auto& v : out.vec()) v = v > 0.0 ? v : 0.0;
    return out;
}

namespace {
void check_labels(const Tensor& logits, std::span<const int> labels) {
    const std::size_t batch = logits.shape().batch;
    const std::size_t classes = logits.shape().sample();
    if (labels.size() != batch) {
        throw InputError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(batch));
    }
    for (std::size_t b = 0; b < batch; ++b) {
        if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= classes) {
            throw InputError("label " + std::to_string(labels[b]) + " at batch index " + std::to_string(b) +
                             " outside [0, " + std::to_string(classes) + ")");
        }
    }
}
}  // namespace

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    check_labels(logits, labels);
    const std::size_t batch = logits.shape().batch;
    const std::size_t classes = logits.shape().sample();
    LossResult r{0.0, Tensor(batch, classes, 1, 1)};
    for (std::size_t b = 0; b < batch; ++b) {
        const Scalar* z = logits.data().data() + b * classes;
        const Scalar peak = *std::max_element(z, z + classes);
        Scalar denom = 0.0;
        for (std::size_t k = 0; k < classes; ++k) denom += std::exp(z[k] - peak);
        const Scalar log_denom = std::log(denom);
        for (std::size_t k = 0; k < classes; ++k) r.probs[b * classes + k] = std::exp(z[k] - peak - log_denom);
        r.loss += log_denom + peak - z[labels[b]];
    }
    r.loss /= static_cast<Scalar>(batch);
    return r;
}

Tensor softmax_cross_entropy_grad(const LossResult& result, std::span<const int> labels) {
    check_labels(result.probs, labels);
    const std::size_t batch = result.probs.shape().batch;
    const std::size_t classes = result.probs.shape().sample();
    Tensor g = result.probs;
    for (std::size_t b = 0; b < batch; ++b) g[b * classes + static_cast<std::size_t>(labels[b])] -= 1.0;
    g *= 1.0 / static_cast<Scalar>(batch);
    return g;
}

std::vector<int> argmax_rows(const Tensor& logits) {
    const std::size_t batch = logits.shape().batch;
    const std::size_t classes = logits.shape().sample();
    std::vector<int> out(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const Scalar* z = logits.data().data() + b * classes;
        out[b] = static_cast<int>(std::max_element(z, z + classes) - z);
    }
    return out;
}

}  // namespace harmonica
