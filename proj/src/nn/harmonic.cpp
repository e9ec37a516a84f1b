#include "harmonica/nn/init.hpp"
#include "harmonica/nn/layers.hpp"

namespace harmonica::nn {

namespace {
SpectrumSelection block_selection(const HarmonicConfig& c) {
    auto sel = select_frequencies(c.window, c.lambda);
    return c.drop_dc ? sel.without_dc() : sel;
}

const ConvSpec kPointwise = ConvSpec::square(1);
}  // namespace

HarmonicBlock::HarmonicBlock(const HarmonicConfig& config, Rng& init)
    : config_(config),
      basis_(shared_dct_basis(config.window)),
      selection_(block_selection(config)),
      spec_(ConvSpec::square(config.window, config.stride, config.pad)),
      weight_("weight", Tensor(config.out_channels, config.in_channels * selection_.count(), 1, 1)) {
    if (config.in_channels == 0 || config.out_channels == 0) throw ConfigError("harmonic block needs channels >= 1");
    uniform_init(weight_.value, he_uniform_bound(config.in_channels * selection_.count()), init);
    if (config.spectrum_bn) bn_ = std::make_unique<BatchNorm>(config.in_channels * selection_.count(), false);
}

std::vector<Buffer> HarmonicBlock::buffers() {
    if (!bn_) return {};
    auto b = bn_->buffers();
    for (auto& entry : b) entry.name = "spectrum_" + entry.name;
    return b;
}

Tensor HarmonicBlock::forward(const Tensor& input, bool training) {
    if (input.shape().channels != config_.in_channels) {
        throw DimensionError("harm: input channel axis is " + std::to_string(input.shape().channels) +
                             ", block expects " + std::to_string(config_.in_channels));
    }
    Tensor responses = dct_transform(input, *basis_, selection_, spec_);
    if (bn_) responses = bn_->forward(responses, training);
    Tensor out = kernels::conv2d(responses, weight_.value, kPointwise);
    input_shape_ = input.shape();
    responses_ = std::move(responses);
    cached_ = true;
    return out;
}

Tensor HarmonicBlock::backward(const Tensor& grad_out) {
    if (!cached_) throw StateError("harm backward called without a preceding forward");
    cached_ = false;
    weight_.grad += kernels::conv2d_backward_kernels(responses_, grad_out, kPointwise, weight_.value.shape());
    Tensor g = kernels::conv2d_backward_input(grad_out, weight_.value, kPointwise, responses_.shape());
    if (bn_) g = bn_->backward(g);
    return dct_transform_backward(g, *basis_, selection_, spec_, input_shape_);
}

Tensor HarmonicBlock::composed_kernel() const {
    const std::size_t k = config_.window;
    const std::size_t n_in = config_.in_channels;
    const std::size_t p_count = selection_.count();
    Tensor kernel(config_.out_channels, n_in, k, k);
    for (std::size_t m = 0; m < config_.out_channels; ++m)
        for (std::size_t n = 0; n < n_in; ++n)
            for (std::size_t p = 0; p < p_count; ++p) {
                const Scalar w = weight_.value.at(m, n * p_count + p, 0, 0);
                const auto psi = basis_->filter(selection_.indices[p]);
                auto dst = kernel.plane(m, n);
                for (std::size_t i = 0; i < psi.size(); ++i) dst[i] += w * psi[i];
            }
    return kernel;
}

}  // namespace harmonica::nn
