#include "harmonica/nn/layers.hpp"

#include <cmath>

#include "harmonica/nn/init.hpp"

namespace harmonica::nn {

void Layer::zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
}

std::size_t Layer::parameter_count() {
    std::size_t total = 0;
    for (auto* p : parameters()) total += p->value.size();
    return total;
}

void walk(Layer& root, const std::function<void(Layer&)>& fn) {
    fn(root);
    root.for_each_child([&fn](Layer& child) { walk(child, fn); });
}

void uniform_init(Tensor& t, Scalar bound, Rng& rng) {
    for (auto& v : t.vec()) v = rng.uniform(-bound, bound);
}

Scalar he_uniform_bound(std::size_t fan_in) { return std::sqrt(6.0 / static_cast<Scalar>(fan_in)); }

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
               std::size_t pad, Rng& init)
    : spec_(ConvSpec::square(kernel, stride, pad)), weight_("weight", Tensor(out_channels, in_channels, kernel, kernel)) {
    uniform_init(weight_.value, he_uniform_bound(in_channels * kernel * kernel), init);
}

Tensor Conv2d::forward(const Tensor& input, bool /*training*/) {
    if (input.shape().channels != weight_.value.shape().channels) {
        throw DimensionError("conv: input has " + std::to_string(input.shape().channels) + " channels, layer expects " +
                             std::to_string(weight_.value.shape().channels));
    }
    input_ = input;
    cached_ = true;
    return kernels::conv2d(input, weight_.value, spec_);
}

Tensor Conv2d::backward(const Tensor& grad_out) {
    if (!cached_) throw StateError("conv backward called without a preceding forward");
    cached_ = false;
    weight_.grad += kernels::conv2d_backward_kernels(input_, grad_out, spec_, weight_.value.shape());
    return kernels::conv2d_backward_input(grad_out, weight_.value, spec_, input_.shape());
}

// ---------------------------------------------------------------- ReLU

Tensor ReLU::forward(const Tensor& input, bool /*training*/) {
    input_ = input;
    cached_ = true;
    Tensor out = input;
    for (auto& v : out.vec()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor ReLU::backward(const Tensor& grad_out) {
    if (!cached_) throw StateError("relu backward called without a preceding forward");
    cached_ = false;
    if (grad_out.shape() != input_.shape()) throw DimensionError("relu backward: shape mismatch");
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (input_[i] <= 0.0) g[i] = 0.0;
    return g;
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(Scalar p, Rng rng) : p_(p), rng_(rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability " + std::to_string(p) + " outside [0, 1)");
}

Tensor Dropout::forward(const Tensor& input, bool training) {
    cached_ = true;
    cached_training_ = training;
    if (!training || p_ == 0.0) {
        mask_.clear();
        return input;
    }
    const Scalar keep_scale = 1.0 / (1.0 - p_);
    if (!(frozen_ && mask_.size() == input.size())) {
        mask_.resize(input.size());
        for (auto& m : mask_) m = rng_.uniform() < p_ ? 0.0 : keep_scale;
    }
    Tensor out = input;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask_[i];
    return out;
}

Tensor Dropout::backward(const Tensor& grad_out) {
    if (!cached_) throw StateError("dropout backward called without a preceding forward");
    cached_ = false;
    if (!cached_training_ || mask_.empty()) return grad_out;
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask_[i];
    return g;
}

// ---------------------------------------------------------------- Pool

Tensor Pool::forward(const Tensor& input, bool /*training*/) {
    auto r = kernels::pool2d(input, spec_);
    input_shape_ = input.shape();
    argmax_ = std::move(r.argmax);
    cached_ = true;
    return std::move(r.output);
}

Tensor Pool::backward(const Tensor& grad_out) {
    if (!cached_) throw StateError("pool backward called without a preceding forward");
    cached_ = false;
    return kernels::pool2d_backward(grad_out, input_shape_, spec_, argmax_);
}

// ---------------------------------------------------------------- Linear

Linear::Linear(std::size_t in_features, std::size_t out_features, Rng& init)
    : weight_("weight", Tensor(out_features, in_features, 1, 1)), bias_("bias", Tensor(1, out_features, 1, 1)) {
    uniform_init(weight_.value, 1.0 / std::sqrt(static_cast<Scalar>(in_features)), init);
}

Tensor Linear::forward(const Tensor& input, bool /*training*/) {
    input_ = input;
    cached_ = true;
    return kernels::linear(input, weight_.value, bias_.value);
}

Tensor Linear::backward(const Tensor& grad_out) {
    if (!cached_) throw StateError("fc backward called without a preceding forward");
    cached_ = false;
    kernels::linear_backward_params(input_, grad_out, weight_.grad, bias_.grad);
    return kernels::linear_backward_input(grad_out, weight_.value, input_.shape());
}

// ---------------------------------------------------------------- Sequential

Sequential& Sequential::add(LayerPtr layer) {
    layers_.push_back(std::move(layer));
    return *this;
}

Tensor Sequential::forward(const Tensor& input, bool training) {
    Tensor x = input;
    for (auto& layer : layers_) x = layer->forward(x, training);
    cached_ = true;
    return x;
}

Tensor Sequential::backward(const Tensor& grad_out) {
    if (!cached_) throw StateError("sequential backward called without a preceding forward");
    cached_ = false;
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

std::vector<Parameter*> Sequential::parameters() {
    std::vector<Parameter*> out;
    for (auto& layer : layers_)
        for (auto* p : layer->parameters()) out.push_back(p);
    return out;
}

std::vector<Buffer> Sequential::buffers() {
    std::vector<Buffer> out;
    for (auto& layer : layers_)
        for (auto& b : layer->buffers()) out.push_back(b);
    return out;
}

void Sequential::for_each_child(const std::function<void(Layer&)>& fn) {
    for (auto& layer : layers_) fn(*layer);
}

void Sequential::freeze_noise(bool frozen) {
    for (auto& layer : layers_) layer->freeze_noise(frozen);
}

// ---------------------------------------------------------------- ResidualUnit

ResidualUnit::ResidualUnit(std::unique_ptr<Sequential> pre, std::unique_ptr<Sequential> body, LayerPtr projection)
    : pre_(std::move(pre)), body_(std::move(body)), projection_(std::move(projection)) {}

Tensor ResidualUnit::forward(const Tensor& input, bool training) {
    const Tensor activated = pre_->forward(input, training);
    Tensor out = body_->forward(activated, training);
    if (projection_) {
        out += projection_->forward(activated, training);
    } else {
        if (out.shape() != input.shape()) {
            throw DimensionError("residual unit: identity shortcut " + input.shape().str() + " vs body output " +
                                 out.shape().str());
        }
        out += input;
    }
    cached_ = true;
    return out;
}

Tensor ResidualUnit::backward(const Tensor& grad_out) {
    if (!cached_) throw StateError("residual backward called without a preceding forward");
    cached_ = false;
    Tensor g_activated = body_->backward(grad_out);
    if (projection_) {
        g_activated += projection_->backward(grad_out);
        return pre_->backward(g_activated);
    }
    Tensor g = pre_->backward(g_activated);
    g += grad_out;
    return g;
}

std::vector<Parameter*> ResidualUnit::parameters() {
    auto out = pre_->parameters();
    for (auto* p : body_->parameters()) out.push_back(p);
    if (projection_)
        for (auto* p : projection_->parameters()) out.push_back(p);
    return out;
}

std::vector<Buffer> ResidualUnit::buffers() {
    auto out = pre_->buffers();
    for (auto& b : body_->buffers()) out.push_back(b);
    if (projection_)
        for (auto& b : projection_->buffers()) out.push_back(b);
    return out;
}

void ResidualUnit::for_each_child(const std::function<void(Layer&)>& fn) {
    fn(*pre_);
    fn(*body_);
    if (projection_) fn(*projection_);
}

void ResidualUnit::freeze_noise(bool frozen) {
    pre_->freeze_noise(frozen);
    body_->freeze_noise(frozen);
    if (projection_) projection_->freeze_noise(frozen);
}

}  // namespace harmonica::nn
