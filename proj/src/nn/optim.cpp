#include "harmonica/nn/optim.hpp"

namespace harmonica::nn {

void sgd_step(std::span<Parameter* const> params, const SgdOptions& options) {
    for (Parameter* p : params) {
        auto& value = p->value.vec();
        const auto& grad = p->grad.vec();
        auto& buf = p->momentum.vec();
        for (std::size_t i = 0; i < value.size(); ++i) {
            buf[i] = options.momentum * buf[i] + (grad[i] + options.weight_decay * value[i]);
            value[i] -= options.lr * buf[i];
        }
    }
}

}  // namespace harmonica::nn
