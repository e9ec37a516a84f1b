#pragma once

#include <optional>

#include "harmonica/kernels.hpp"
#include "harmonica/nn/layer.hpp"
#include "harmonica/rng.hpp"
#include "harmonica/spectral.hpp"

namespace harmonica::nn {

inline constexpr Scalar kBatchNormEps = 1e-5;
inline constexpr Scalar kBatchNormMomentum = 0.1;

/// Per-channel batch normalization over (batch, height, width). Training mode
/// normalizes with biased batch statistics and folds the unbiased variance
/// into the running estimate; eval mode uses the running estimates.
/// Without affine it is the spectrum normalization used inside harmonic
/// blocks: no learned scale or shift.
class BatchNorm final : public Layer {
public:
    explicit BatchNorm(std::size_t channels, bool affine = true, Scalar eps = kBatchNormEps,
                       Scalar momentum = kBatchNormMomentum);

    Tensor forward(const Tensor& input, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Parameter*> parameters() override;
    std::vector<Buffer> buffers() override;
    [[nodiscard]] std::string kind() const override { return affine_ ? "bn" : "spectrum_bn"; }

    [[nodiscard]] std::size_t channels() const { return channels_; }
    [[nodiscard]] bool affine() const { return affine_; }
    [[nodiscard]] const Tensor& running_mean() const { return running_mean_; }
    [[nodiscard]] const Tensor& running_var() const { return running_var_; }
    Parameter& gamma() { return gamma_; }
    Parameter& beta() { return beta_; }

private:
    std::size_t channels_;
    bool affine_;
    Scalar eps_;
    Scalar momentum_;
    Parameter gamma_;
    Parameter beta_;
    Tensor running_mean_;
    Tensor running_var_;

    bool cached_ = false;
    bool cached_training_ = false;
    Tensor normalized_;
    std::vector<Scalar> inv_std_;
};

/// Grouped 2D convolution without bias, He-uniform initialized.
class Conv2d final : public Layer {
public:
    Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
           std::size_t pad, Rng& init);

    Tensor forward(const Tensor& input, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Parameter*> parameters() override { return {&weight_}; }
    [[nodiscard]] std::string kind() const override { return "conv"; }

    Parameter& weight() { return weight_; }
    [[nodiscard]] const ConvSpec& spec() const { return spec_; }

private:
    ConvSpec spec_;
    Parameter weight_;
    bool cached_ = false;
    Tensor input_;
};

struct HarmonicConfig {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t window = 3;
    std::size_t stride = 1;
    std::size_t pad = 0;
    std::optional<std::size_t> lambda;  // nullopt = full spectrum
    bool spectrum_bn = false;
    bool drop_dc = false;
};

/// Harmonic block: depthwise windowed DCT over the selected frequencies,
/// optional per-frequency normalization without affine, then a learned 1x1
/// recombination of the N * P' responses into M output channels. Weights are
/// (M, N * P', 1, 1), laid out channel-major like the transform output.
class HarmonicBlock final : public Layer {
public:
    HarmonicBlock(const HarmonicConfig& config, Rng& init);

    Tensor forward(const Tensor& input, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Parameter*> parameters() override { return {&weight_}; }
    std::vector<Buffer> buffers() override;
    [[nodiscard]] std::string kind() const override { return "harm"; }

    [[nodiscard]] const HarmonicConfig& config() const { return config_; }
    [[nodiscard]] const DCTBasis& basis() const { return *basis_; }
    /// Frequencies actually used (DC removed when drop_dc is set).
    [[nodiscard]] const SpectrumSelection& selection() const { return selection_; }
    [[nodiscard]] const ConvSpec& transform_spec() const { return spec_; }
    Parameter& weight() { return weight_; }
    [[nodiscard]] const Parameter& weight() const { return weight_; }
    [[nodiscard]] BatchNorm* spectrum_bn() { return bn_.get(); }

    /// (M, N, K, K) spatial kernels equivalent to this block with BN off:
    /// kernel[m, n] = sum_p w[m, n*P'+p] psi_p.
    [[nodiscard]] Tensor composed_kernel() const;

private:
    HarmonicConfig config_;
    std::shared_ptr<const DCTBasis> basis_;
    SpectrumSelection selection_;
    ConvSpec spec_;
    Parameter weight_;
    std::unique_ptr<BatchNorm> bn_;

    bool cached_ = false;
    Shape input_shape_{};
    Tensor responses_;  // post-normalization transform output
};

class ReLU final : public Layer {
public:
    Tensor forward(const Tensor& input, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    [[nodiscard]] std::string kind() const override { return "relu"; }

private:
    bool cached_ = false;
    Tensor input_;
};

/// Inverted dropout: training keeps units with probability 1-p and scales
/// them by 1/(1-p); evaluation is the identity.
class Dropout final : public Layer {
public:
    Dropout(Scalar p, Rng rng);

    Tensor forward(const Tensor& input, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    [[nodiscard]] std::string kind() const override { return "dropout"; }
    void freeze_noise(bool frozen) override { frozen_ = frozen; }

    [[nodiscard]] Scalar p() const { return p_; }

private:
    Scalar p_;
    Rng rng_;
    bool frozen_ = false;
    bool cached_ = false;
    bool cached_training_ = false;
    std::vector<Scalar> mask_;
};

class Pool final : public Layer {
public:
    explicit Pool(PoolSpec spec) : spec_(spec) {}

    Tensor forward(const Tensor& input, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    [[nodiscard]] std::string kind() const override { return "pool"; }
    [[nodiscard]] const PoolSpec& spec() const { return spec_; }

private:
    PoolSpec spec_;
    bool cached_ = false;
    Shape input_shape_{};
    std::vector<std::size_t> argmax_;
};

/// Fully connected layer over the flattened sample; output is (B, out, 1, 1).
class Linear final : public Layer {
public:
    Linear(std::size_t in_features, std::size_t out_features, Rng& init);

    Tensor forward(const Tensor& input, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
    [[nodiscard]] std::string kind() const override { return "fc"; }

    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }

private:
    Parameter weight_;
    Parameter bias_;
    bool cached_ = false;
    Tensor input_;
};

class Sequential final : public Layer {
public:
    Sequential() = default;

    Sequential& add(LayerPtr layer);
    template <typename T, typename... Args>
    T& emplace(Args&&... args) {
        auto layer = std::make_unique<T>(std::forward<Args>(args)...);
        T& ref = *layer;
        add(std::move(layer));
        return ref;
    }

    Tensor forward(const Tensor& input, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Parameter*> parameters() override;
    std::vector<Buffer> buffers() override;
    [[nodiscard]] std::string kind() const override { return "sequential"; }
    void for_each_child(const std::function<void(Layer&)>& fn) override;
    void freeze_noise(bool frozen) override;

    [[nodiscard]] std::size_t size() const { return layers_.size(); }
    Layer& operator[](std::size_t i) { return *layers_.at(i); }

private:
    std::vector<LayerPtr> layers_;
    bool cached_ = false;
};

/// Pre-activation wide-residual unit:
///   a = relu(bn(x)); out = body(a) + (projection ? projection(a) : x)
/// body = spatial op, bn, relu, dropout, spatial op. The projection is a plain
/// 1x1 convolution whenever channel count or stride changes.
class ResidualUnit final : public Layer {
public:
    ResidualUnit(std::unique_ptr<Sequential> pre, std::unique_ptr<Sequential> body, LayerPtr projection);

    Tensor forward(const Tensor& input, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Parameter*> parameters() override;
    std::vector<Buffer> buffers() override;
    [[nodiscard]] std::string kind() const override { return "res"; }
    void for_each_child(const std::function<void(Layer&)>& fn) override;
    void freeze_noise(bool frozen) override;

private:
    std::unique_ptr<Sequential> pre_;
    std::unique_ptr<Sequential> body_;
    LayerPtr projection_;
    bool cached_ = false;
};

}  // namespace harmonica::nn
