#include "harmonica/reference.hpp"

#include <algorithm>
#include <limits>

namespace harmonica::ref {

namespace {
// Zero-padded read; returns 0 outside the image.
Scalar padded(const Tensor& t, std::size_t b, std::size_t c, long y, long x) {
    const Shape& s = t.shape();
    if (y < 0 || x < 0 || y >= static_cast<long>(s.height) || x >= static_cast<long>(s.width)) return 0.0;
    return t.at(b, c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
}
}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, const ConvSpec& spec) {
    const Shape& is = input.shape();
    const Shape& ks = kernels.shape();
    if (is.channels % spec.groups || ks.batch % spec.groups || ks.channels != is.channels / spec.groups) {
        throw DimensionError("ref::conv2d: channel/group mismatch");
    }
    const std::size_t oh = spec.out_height(is.height);
    const std::size_t ow = spec.out_width(is.width);
    const std::size_t cg = is.channels / spec.groups;
    const std::size_t mg = ks.batch / spec.groups;
    Tensor out(is.batch, ks.batch, oh, ow);
    for (std::size_t b = 0; b < is.batch; ++b)
        for (std::size_t m = 0; m < ks.batch; ++m)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    Scalar acc = 0.0;
                    for (std::size_t cl = 0; cl < cg; ++cl)
                        for (std::size_t ky = 0; ky < spec.kernel_h; ++ky)
                            for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
                                const long y = static_cast<long>(oy * spec.stride_h + ky) - static_cast<long>(spec.pad_h);
                                const long x = static_cast<long>(ox * spec.stride_w + kx) - static_cast<long>(spec.pad_w);
                                acc += kernels.at(m, cl, ky, kx) * padded(input, b, (m / mg) * cg + cl, y, x);
                            }
                    out.at(b, m, oy, ox) = acc;
                }
    return out;
}

Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& kernels, const ConvSpec& spec,
                             const Shape& input_shape) {
    const Shape& ks = kernels.shape();
    const std::size_t cg = input_shape.channels / spec.groups;
    const std::size_t mg = ks.batch / spec.groups;
    const Shape& gs = grad_out.shape();
    Tensor grad_in(input_shape);
    for (std::size_t b = 0; b < gs.batch; ++b)
        for (std::size_t m = 0; m < gs.channels; ++m)
            for (std::size_t oy = 0; oy < gs.height; ++oy)
                for (std::size_t ox = 0; ox < gs.width; ++ox)
                    for (std::size_t cl = 0; cl < cg; ++cl)
                        for (std::size_t ky = 0; ky < spec.kernel_h; ++ky)
                            for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
                                const long y = static_cast<long>(oy * spec.stride_h + ky) - static_cast<long>(spec.pad_h);
                                const long x = static_cast<long>(ox * spec.stride_w + kx) - static_cast<long>(spec.pad_w);
                                if (y < 0 || x < 0 || y >= static_cast<long>(input_shape.height) ||
                                    x >= static_cast<long>(input_shape.width))
                                    continue;
                                grad_in.at(b, (m / mg) * cg + cl, static_cast<std::size_t>(y),
                                           static_cast<std::size_t>(x)) +=
                                    kernels.at(m, cl, ky, kx) * grad_out.at(b, m, oy, ox);
                            }
    return grad_in;
}

Tensor conv2d_backward_kernels(const Tensor& input, const Tensor& grad_out, const ConvSpec& spec,
                               const Shape& kernel_shape) {
    const Shape& is = input.shape();
    const std::size_t cg = is.channels / spec.groups;
    const std::size_t mg = kernel_shape.batch / spec.groups;
    const Shape& gs = grad_out.shape();
    Tensor grad_k(kernel_shape);
    for (std::size_t b = 0; b < gs.batch; ++b)
        for (std::size_t m = 0; m < gs.channels; ++m)
            for (std::size_t oy = 0; oy < gs.height; ++oy)
                for (std::size_t ox = 0; ox < gs.width; ++ox)
                    for (std::size_t cl = 0; cl < cg; ++cl)
                        for (std::size_t ky = 0; ky < spec.kernel_h; ++ky)
                            for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
                                const long y = static_cast<long>(oy * spec.stride_h + ky) - static_cast<long>(spec.pad_h);
                                const long x = static_cast<long>(ox * spec.stride_w + kx) - static_cast<long>(spec.pad_w);
                                grad_k.at(m, cl, ky, kx) +=
                                    grad_out.at(b, m, oy, ox) * padded(input, b, (m / mg) * cg + cl, y, x);
                            }
    return grad_k;
}

Tensor pool2d(const Tensor& input, const PoolSpec& spec) {
    const Shape& is = input.shape();
    const ConvSpec cs = spec.as_conv();
    const std::size_t oh = cs.out_height(is.height);
    const std::size_t ow = cs.out_width(is.width);
    Tensor out(is.batch, is.channels, oh, ow);
    for (std::size_t b = 0; b < is.batch; ++b)
        for (std::size_t c = 0; c < is.channels; ++c)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    Scalar best = -std::numeric_limits<Scalar>::infinity();
                    Scalar sum = 0.0;
                    for (std::size_t ky = 0; ky < spec.window; ++ky)
                        for (std::size_t kx = 0; kx < spec.window; ++kx) {
                            const long y = static_cast<long>(oy * spec.stride + ky) - static_cast<long>(spec.pad);
                            const long x = static_cast<long>(ox * spec.stride + kx) - static_cast<long>(spec.pad);
                            if (y < 0 || x < 0 || y >= static_cast<long>(is.height) || x >= static_cast<long>(is.width))
                                continue;
                            const Scalar v = input.at(b, c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
                            best = std::max(best, v);
                            sum += v;
                        }
                    out.at(b, c, oy, ox) =
                        spec.kind == PoolKind::max ? best : sum / static_cast<Scalar>(spec.window * spec.window);
                }
    return out;
}

Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    const std::size_t n_in = input.shape().sample();
    const std::size_t n_out = weights.shape().batch;
    if (weights.shape().channels != n_in) throw DimensionError("ref::linear: feature mismatch");
    Tensor out(input.shape().batch, n_out, 1, 1);
    for (std::size_t b = 0; b < input.shape().batch; ++b)
        for (std::size_t o = 0; o < n_out; ++o) {
            Scalar acc = bias.empty() ? 0.0 : bias[o];
            for (std::size_t i = 0; i < n_in; ++i) acc += weights[o * n_in + i] * input[b * n_in + i];
            out[b * n_out + o] = acc;
        }
    return out;
}

}  // namespace harmonica::ref
