#include <cmath>
#include <cstdint>

#include "harmonica/nn/layers.hpp"

namespace harmonica::nn {

BatchNorm::BatchNorm(std::size_t channels, bool affine, Scalar eps, Scalar momentum)
    : channels_(channels),
      affine_(affine),
      eps_(eps),
      momentum_(momentum),
      gamma_("gamma", Tensor(1, affine ? channels : 0, 1, 1, 1.0)),
      beta_("beta", Tensor(1, affine ? channels : 0, 1, 1, 0.0)),
      running_mean_(1, channels, 1, 1, 0.0),
      running_var_(1, channels, 1, 1, 1.0) {
    if (channels == 0) throw ConfigError("batch norm needs at least one channel");
}

std::vector<Parameter*> BatchNorm::parameters() {
    if (!affine_) return {};
    return {&gamma_, &beta_};
}

std::vector<Buffer> BatchNorm::buffers() { return {{"running_mean", &running_mean_}, {"running_var", &running_var_}}; }

Tensor BatchNorm::forward(const Tensor& input, bool training) {
    const Shape& s = input.shape();
    if (s.channels != channels_) {
        throw DimensionError("batch norm: input has " + std::to_string(s.channels) + " channels, layer expects " +
                             std::to_string(channels_));
    }
    const std::size_t per_channel = s.batch * s.plane();
    if (training && per_channel < 2) {
        throw InputError("batch norm in training mode needs more than one value per channel");
    }
    Tensor out(s);
    normalized_ = Tensor(s);
    inv_std_.assign(channels_, 0.0);

    const auto jobs = static_cast<std::int64_t>(channels_);
#pragma omp parallel for schedule(static)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const auto c = static_cast<std::size_t>(job);
        Scalar mean = 0.0;
        Scalar var = 0.0;
        if (training) {
            for (std::size_t b = 0; b < s.batch; ++b)
                for (const Scalar v : input.plane(b, c)) mean += v;
            mean /= static_cast<Scalar>(per_channel);
            for (std::size_t b = 0; b < s.batch; ++b)
                for (const Scalar v : input.plane(b, c)) var += (v - mean) * (v - mean);
            var /= static_cast<Scalar>(per_channel);
            const Scalar unbiased = var * static_cast<Scalar>(per_channel) / static_cast<Scalar>(per_channel - 1);
            running_mean_[c] = (1.0 - momentum_) * running_mean_[c] + momentum_ * mean;
            running_var_[c] = (1.0 - momentum_) * running_var_[c] + momentum_ * unbiased;
        } else {
            mean = running_mean_[c];
            var = running_var_[c];
        }
        const Scalar inv_std = 1.0 / std::sqrt(var + eps_);
        inv_std_[c] = inv_std;
        const Scalar scale = affine_ ? gamma_.value[c] : 1.0;
        const Scalar shift = affine_ ? beta_.value[c] : 0.0;
        for (std::size_t b = 0; b < s.batch; ++b) {
            const auto src = input.plane(b, c);
            auto nrm = normalized_.plane(b, c);
            auto dst = out.plane(b, c);
            for (std::size_t i = 0; i < src.size(); ++i) {
                nrm[i] = (src[i] - mean) * inv_std;
                dst[i] = scale * nrm[i] + shift;
            }
        }
    }
    cached_ = true;
    cached_training_ = training;
    return out;
}

Tensor BatchNorm::backward(const Tensor& grad_out) {
    if (!cached_) throw StateError("batch norm backward called without a preceding forward");
    cached_ = false;
    const Shape& s = normalized_.shape();
    if (grad_out.shape() != s) throw DimensionError("batch norm backward: shape mismatch");
    const auto count = static_cast<Scalar>(s.batch * s.plane());
    Tensor grad_in(s);

    const auto jobs = static_cast<std::int64_t>(channels_);
#pragma omp parallel for schedule(static)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const auto c = static_cast<std::size_t>(job);
        Scalar sum_g = 0.0;
        Scalar sum_g_xhat = 0.0;
        for (std::size_t b = 0; b < s.batch; ++b) {
            const auto g = grad_out.plane(b, c);
            const auto xh = normalized_.plane(b, c);
            for (std::size_t i = 0; i < g.size(); ++i) {
                sum_g += g[i];
                sum_g_xhat += g[i] * xh[i];
            }
        }
        const Scalar scale = affine_ ? gamma_.value[c] : 1.0;
        if (affine_) {
            gamma_.grad[c] += sum_g_xhat;
            beta_.grad[c] += sum_g;
        }
        const Scalar k = scale * inv_std_[c];
        for (std::size_t b = 0; b < s.batch; ++b) {
            const auto g = grad_out.plane(b, c);
            const auto xh = normalized_.plane(b, c);
            auto dst = grad_in.plane(b, c);
            if (cached_training_) {
                for (std::size_t i = 0; i < g.size(); ++i)
                    dst[i] = k * (g[i] - sum_g / count - xh[i] * sum_g_xhat / count);
            } else {
                for (std::size_t i = 0; i < g.size(); ++i) dst[i] = k * g[i];
            }
        }
    }
    return grad_in;
}

}  // namespace harmonica::nn
