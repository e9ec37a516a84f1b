#include "harmonica/kernels.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>

namespace harmonica::kernels {

namespace {

// Output positions o in [lo, hi) for which o*stride + k - pad lands inside [0, in).
struct Span1D {
    std::size_t lo;
    std::size_t hi;
};

Span1D valid_outputs(std::size_t out_n, std::size_t in_n, std::size_t stride, std::size_t pad, std::size_t k) {
    std::size_t lo = 0;
    if (k < pad) lo = (pad - k + stride - 1) / stride;
    if (in_n + pad < k + 1) return {0, 0};
    const std::size_t hi = std::min(out_n, (in_n - 1 + pad - k) / stride + 1);
    return {lo, std::max(lo, hi)};
}

void check_conv_shapes(const Shape& in, const Shape& ks, const ConvSpec& spec) {
    if (spec.groups == 0) throw ConfigError("conv groups must be >= 1");
    if (in.channels % spec.groups != 0) {
        throw DimensionError("conv: input channels " + std::to_string(in.channels) + " not divisible by groups " +
                             std::to_string(spec.groups));
    }
    if (ks.batch % spec.groups != 0) {
        throw DimensionError("conv: kernel count " + std::to_string(ks.batch) + " not divisible by groups " +
                             std::to_string(spec.groups));
    }
    if (ks.channels != in.channels / spec.groups) {
        throw DimensionError("conv: kernel channel axis is " + std::to_string(ks.channels) + ", expected " +
                             std::to_string(in.channels / spec.groups));
    }
    if (ks.height != spec.kernel_h) {
        throw DimensionError("conv: kernel height axis is " + std::to_string(ks.height) + ", spec says " +
                             std::to_string(spec.kernel_h));
    }
    if (ks.width != spec.kernel_w) {
        throw DimensionError("conv: kernel width axis is " + std::to_string(ks.width) + ", spec says " +
                             std::to_string(spec.kernel_w));
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, const ConvSpec& spec) {
    const Shape& is = input.shape();
    const Shape& ks = kernels.shape();
    check_conv_shapes(is, ks, spec);
    const std::size_t oh = spec.out_height(is.height);
    const std::size_t ow = spec.out_width(is.width);
    const std::size_t m_total = ks.batch;
    const std::size_t cg = is.channels / spec.groups;
    const std::size_t mg = m_total / spec.groups;
    Tensor out(is.batch, m_total, oh, ow);

    const auto jobs = static_cast<std::int64_t>(is.batch * m_total);
#pragma omp parallel for schedule(static)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const std::size_t b = static_cast<std::size_t>(job) / m_total;
        const std::size_t m = static_cast<std::size_t>(job) % m_total;
        const std::size_t g = m / mg;
        auto dst = out.plane(b, m);
        for (std::size_t cl = 0; cl < cg; ++cl) {
            const auto src = input.plane(b, g * cg + cl);
            for (std::size_t ky = 0; ky < spec.kernel_h; ++ky) {
                const Span1D ry = valid_outputs(oh, is.height, spec.stride_h, spec.pad_h, ky);
                for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
                    const Scalar w = kernels.at(m, cl, ky, kx);
                    const Span1D rx = valid_outputs(ow, is.width, spec.stride_w, spec.pad_w, kx);
                    for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
                        const std::size_t iy = oy * spec.stride_h + ky - spec.pad_h;
                        const Scalar* in_row = src.data() + iy * is.width;
                        Scalar* out_row = dst.data() + oy * ow;
                        for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
                            out_row[ox] += w * in_row[ox * spec.stride_w + kx - spec.pad_w];
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& kernels, const ConvSpec& spec,
                             const Shape& input_shape) {
    const Shape& ks = kernels.shape();
    check_conv_shapes(input_shape, ks, spec);
    const std::size_t oh = spec.out_height(input_shape.height);
    const std::size_t ow = spec.out_width(input_shape.width);
    const Shape& gs = grad_out.shape();
    if (gs.batch != input_shape.batch || gs.channels != ks.batch || gs.height != oh || gs.width != ow) {
        throw DimensionError("conv backward: grad_out shape " + gs.str() + " does not match forward output");
    }
    const std::size_t cg = input_shape.channels / spec.groups;
    const std::size_t mg = ks.batch / spec.groups;
    Tensor grad_in(input_shape);

    const auto jobs = static_cast<std::int64_t>(input_shape.batch * input_shape.channels);
#pragma omp parallel for schedule(static)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const std::size_t b = static_cast<std::size_t>(job) / input_shape.channels;
        const std::size_t c = static_cast<std::size_t>(job) % input_shape.channels;
        const std::size_t g = c / cg;
        const std::size_t cl = c % cg;
        auto dst = grad_in.plane(b, c);
        for (std::size_t m = g * mg; m < (g + 1) * mg; ++m) {
            const auto src = grad_out.plane(b, m);
            for (std::size_t ky = 0; ky < spec.kernel_h; ++ky) {
                const Span1D ry = valid_outputs(oh, input_shape.height, spec.stride_h, spec.pad_h, ky);
                for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
                    const Scalar w = kernels.at(m, cl, ky, kx);
                    const Span1D rx = valid_outputs(ow, input_shape.width, spec.stride_w, spec.pad_w, kx);
                    for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
                        const std::size_t iy = oy * spec.stride_h + ky - spec.pad_h;
                        Scalar* in_row = dst.data() + iy * input_shape.width;
                        const Scalar* g_row = src.data() + oy * ow;
                        for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
                            in_row[ox * spec.stride_w + kx - spec.pad_w] += w * g_row[ox];
                        }
                    }
                }
            }
        }
    }
    return grad_in;
}

Tensor conv2d_backward_kernels(const Tensor& input, const Tensor& grad_out, const ConvSpec& spec,
                               const Shape& kernel_shape) {
    const Shape& is = input.shape();
    check_conv_shapes(is, kernel_shape, spec);
    const std::size_t oh = spec.out_height(is.height);
    const std::size_t ow = spec.out_width(is.width);
    const Shape& gs = grad_out.shape();
    if (gs.batch != is.batch || gs.channels != kernel_shape.batch || gs.height != oh || gs.width != ow) {
        throw DimensionError("conv backward: grad_out shape " + gs.str() + " does not match forward output");
    }
    const std::size_t cg = is.channels / spec.groups;
    const std::size_t mg = kernel_shape.batch / spec.groups;
    Tensor grad_k(kernel_shape);

    const auto jobs = static_cast<std::int64_t>(kernel_shape.batch);
#pragma omp parallel for schedule(static)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const auto m = static_cast<std::size_t>(job);
        const std::size_t g = m / mg;
        for (std::size_t cl = 0; cl < cg; ++cl) {
            for (std::size_t ky = 0; ky < spec.kernel_h; ++ky) {
                const Span1D ry = valid_outputs(oh, is.height, spec.stride_h, spec.pad_h, ky);
                for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
                    const Span1D rx = valid_outputs(ow, is.width, spec.stride_w, spec.pad_w, kx);
                    Scalar acc = 0.0;
                    for (std::size_t b = 0; b < is.batch; ++b) {
                        const auto src = input.plane(b, g * cg + cl);
                        const auto gp = grad_out.plane(b, m);
                        for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
                            const std::size_t iy = oy * spec.stride_h + ky - spec.pad_h;
                            const Scalar* in_row = src.data() + iy * is.width;
                            const Scalar* g_row = gp.data() + oy * ow;
                            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
                                acc += g_row[ox] * in_row[ox * spec.stride_w + kx - spec.pad_w];
                            }
                        }
                    }
                    grad_k.at(m, cl, ky, kx) = acc;
                }
            }
        }
    }
    return grad_k;
}

Tensor conv2d_separable(const Tensor& input, const SeparableFilters& filters, const ConvSpec& spec) {
    const Shape& is = input.shape();
    const std::size_t m_total = filters.col.size();
    if (filters.row.size() != m_total) {
        throw DimensionError("separable conv: " + std::to_string(filters.col.size()) + " column factors vs " +
                             std::to_string(filters.row.size()) + " row factors");
    }
    for (std::size_t m = 0; m < m_total; ++m) {
        if (filters.col[m].size() != spec.kernel_h) {
            throw DimensionError("separable conv: column factor " + std::to_string(m) + " has length " +
                                 std::to_string(filters.col[m].size()) + ", kernel height is " +
                                 std::to_string(spec.kernel_h));
        }
        if (filters.row[m].size() != spec.kernel_w) {
            throw DimensionError("separable conv: row factor " + std::to_string(m) + " has length " +
                                 std::to_string(filters.row[m].size()) + ", kernel width is " +
                                 std::to_string(spec.kernel_w));
        }
    }
    check_conv_shapes(is, Shape{m_total, is.channels / std::max<std::size_t>(spec.groups, 1), spec.kernel_h,
                                spec.kernel_w},
                      spec);
    const std::size_t oh = spec.out_height(is.height);
    const std::size_t ow = spec.out_width(is.width);
    const std::size_t wp = is.width + 2 * spec.pad_w;
    const std::size_t cg = is.channels / spec.groups;
    const std::size_t mg = m_total / spec.groups;
    Tensor out(is.batch, m_total, oh, ow);

    const auto jobs = static_cast<std::int64_t>(is.batch * m_total);
#pragma omp parallel for schedule(static)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const std::size_t b = static_cast<std::size_t>(job) / m_total;
        const std::size_t m = static_cast<std::size_t>(job) % m_total;
        const std::size_t g = m / mg;
        const auto& col = filters.col[m];
        const auto& row = filters.row[m];
        std::vector<Scalar> vertical(oh * wp);
        auto dst = out.plane(b, m);
        for (std::size_t cl = 0; cl < cg; ++cl) {
            const auto src = input.plane(b, g * cg + cl);
            std::fill(vertical.begin(), vertical.end(), 0.0);
            for (std::size_t i = 0; i < spec.kernel_h; ++i) {
                const Span1D ry = valid_outputs(oh, is.height, spec.stride_h, spec.pad_h, i);
                for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
                    const Scalar* in_row = src.data() + (oy * spec.stride_h + i - spec.pad_h) * is.width;
                    Scalar* v_row = vertical.data() + oy * wp + spec.pad_w;
                    for (std::size_t x = 0; x < is.width; ++x) v_row[x] += col[i] * in_row[x];
                }
            }
            for (std::size_t oy = 0; oy < oh; ++oy) {
                const Scalar* v_row = vertical.data() + oy * wp;
                Scalar* out_row = dst.data() + oy * ow;
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    Scalar acc = 0.0;
                    for (std::size_t j = 0; j < spec.kernel_w; ++j) acc += row[j] * v_row[ox * spec.stride_w + j];
                    out_row[ox] += acc;
                }
            }
        }
    }
    return out;
}

PoolResult pool2d(const Tensor& input, const PoolSpec& spec) {
    if (spec.pad >= spec.window && spec.pad > 0) {
        throw ConfigError("pool padding " + std::to_string(spec.pad) + " must be smaller than window " +
                          std::to_string(spec.window));
    }
    const Shape& is = input.shape();
    const ConvSpec cs = spec.as_conv();
    const std::size_t oh = cs.out_height(is.height);
    const std::size_t ow = cs.out_width(is.width);
    PoolResult result{Tensor(is.batch, is.channels, oh, ow), {}};
    const bool is_max = spec.kind == PoolKind::max;
    if (is_max) result.argmax.assign(result.output.size(), 0);
    const auto area = static_cast<Scalar>(spec.window * spec.window);

    const auto jobs = static_cast<std::int64_t>(is.batch * is.channels);
#pragma omp parallel for schedule(static)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const std::size_t b = static_cast<std::size_t>(job) / is.channels;
        const std::size_t c = static_cast<std::size_t>(job) % is.channels;
        const auto src = input.plane(b, c);
        const std::size_t plane_base = input.index(b, c, 0, 0);
        const std::size_t out_base = result.output.index(b, c, 0, 0);
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                Scalar best = -std::numeric_limits<Scalar>::infinity();
                std::size_t best_idx = 0;
                Scalar sum = 0.0;
                for (std::size_t ky = 0; ky < spec.window; ++ky) {
                    const std::size_t iy_p = oy * spec.stride + ky;
                    if (iy_p < spec.pad || iy_p - spec.pad >= is.height) continue;
                    const std::size_t iy = iy_p - spec.pad;
                    for (std::size_t kx = 0; kx < spec.window; ++kx) {
                        const std::size_t ix_p = ox * spec.stride + kx;
                        if (ix_p < spec.pad || ix_p - spec.pad >= is.width) continue;
                        const std::size_t ix = ix_p - spec.pad;
                        const Scalar v = src[iy * is.width + ix];
                        if (is_max) {
                            if (v > best) {
                                best = v;
                                best_idx = plane_base + iy * is.width + ix;
                            }
                        } else {
                            sum += v;
                        }
                    }
                }
                const std::size_t o = out_base + oy * ow + ox;
                if (is_max) {
                    result.output[o] = best;
                    result.argmax[o] = best_idx;
                } else {
                    result.output[o] = sum / area;
                }
            }
        }
    }
    return result;
}

Tensor pool2d_backward(const Tensor& grad_out, const Shape& input_shape, const PoolSpec& spec,
                       std::span<const std::size_t> argmax) {
    const ConvSpec cs = spec.as_conv();
    const std::size_t oh = cs.out_height(input_shape.height);
    const std::size_t ow = cs.out_width(input_shape.width);
    const Shape& gs = grad_out.shape();
    if (gs.batch != input_shape.batch || gs.channels != input_shape.channels || gs.height != oh ||
        gs.width != ow) {
        throw DimensionError("pool backward: grad_out shape " + gs.str() + " does not match forward output");
    }
    Tensor grad_in(input_shape);
    const bool is_max = spec.kind == PoolKind::max;
    if (is_max && argmax.size() != grad_out.size()) {
        throw StateError("pool backward: argmax cache does not match grad_out");
    }
    const auto area = static_cast<Scalar>(spec.window * spec.window);

    const auto jobs = static_cast<std::int64_t>(input_shape.batch * input_shape.channels);
#pragma omp parallel for schedule(static)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const std::size_t b = static_cast<std::size_t>(job) / input_shape.channels;
        const std::size_t c = static_cast<std::size_t>(job) % input_shape.channels;
        const std::size_t out_base = grad_out.index(b, c, 0, 0);
        if (is_max) {
            // argmax entries of this plane all point into the same input plane
            for (std::size_t o = 0; o < oh * ow; ++o) grad_in[argmax[out_base + o]] += grad_out[out_base + o];
            continue;
        }
        auto dst = grad_in.plane(b, c);
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const Scalar g = grad_out[out_base + oy * ow + ox] / area;
                for (std::size_t ky = 0; ky < spec.window; ++ky) {
                    const std::size_t iy_p = oy * spec.stride + ky;
                    if (iy_p < spec.pad || iy_p - spec.pad >= input_shape.height) continue;
                    for (std::size_t kx = 0; kx < spec.window; ++kx) {
                        const std::size_t ix_p = ox * spec.stride + kx;
                        if (ix_p < spec.pad || ix_p - spec.pad >= input_shape.width) continue;
                        dst[(iy_p - spec.pad) * input_shape.width + ix_p - spec.pad] += g;
                    }
                }
            }
        }
    }
    return grad_in;
}

namespace {
void check_linear(const Shape& in, const Tensor& weights, const Tensor& bias) {
    const Shape& ws = weights.shape();
    if (ws.height != 1 || ws.width != 1) throw DimensionError("linear: weights must be (out, in, 1, 1)");
    if (ws.channels != in.sample()) {
        throw DimensionError("linear: input features " + std::to_string(in.sample()) + " vs weight in-axis " +
                             std::to_string(ws.channels));
    }
    if (!bias.empty() && bias.size() != ws.batch) {
        throw DimensionError("linear: bias length " + std::to_string(bias.size()) + " vs out-axis " +
                             std::to_string(ws.batch));
    }
}
}  // namespace

Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    const Shape& is = input.shape();
    check_linear(is, weights, bias);
    const std::size_t n_in = is.sample();
    const std::size_t n_out = weights.shape().batch;
    Tensor out(is.batch, n_out, 1, 1);

    const auto jobs = static_cast<std::int64_t>(is.batch * n_out);
#pragma omp parallel for schedule(static)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const std::size_t b = static_cast<std::size_t>(job) / n_out;
        const std::size_t o = static_cast<std::size_t>(job) % n_out;
        const Scalar* x = input.data().data() + b * n_in;
        const Scalar* w = weights.data().data() + o * n_in;
        Scalar acc = bias.empty() ? 0.0 : bias[o];
        for (std::size_t i = 0; i < n_in; ++i) acc += w[i] * x[i];
        out[b * n_out + o] = acc;
    }
    return out;
}

Tensor linear_backward_input(const Tensor& grad_out, const Tensor& weights, const Shape& input_shape) {
    check_linear(input_shape, weights, Tensor{});
    const std::size_t n_in = input_shape.sample();
    const std::size_t n_out = weights.shape().batch;
    if (grad_out.size() != input_shape.batch * n_out) {
        throw DimensionError("linear backward: grad_out shape " + grad_out.shape().str());
    }
    Tensor grad_in(input_shape);

    const auto jobs = static_cast<std::int64_t>(input_shape.batch);
#pragma omp parallel for schedule(static)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const auto b = static_cast<std::size_t>(job);
        Scalar* gi = grad_in.data().data() + b * n_in;
        for (std::size_t o = 0; o < n_out; ++o) {
            const Scalar g = grad_out[b * n_out + o];
            const Scalar* w = weights.data().data() + o * n_in;
            for (std::size_t i = 0; i < n_in; ++i) gi[i] += w[i] * g;
        }
    }
    return grad_in;
}

void linear_backward_params(const Tensor& input, const Tensor& grad_out, Tensor& grad_weights, Tensor& grad_bias) {
    const Shape& is = input.shape();
    const std::size_t n_in = is.sample();
    const std::size_t n_out = grad_weights.shape().batch;
    if (grad_weights.shape().channels != n_in || grad_out.size() != is.batch * n_out) {
        throw DimensionError("linear backward: inconsistent gradient shapes");
    }
    const bool with_bias = !grad_bias.empty();

    const auto jobs = static_cast<std::int64_t>(n_out);
#pragma omp parallel for schedule(static)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const auto o = static_cast<std::size_t>(job);
        Scalar* gw = grad_weights.data().data() + o * n_in;
        Scalar gb = 0.0;
        for (std::size_t b = 0; b < is.batch; ++b) {
            const Scalar g = grad_out[b * n_out + o];
            const Scalar* x = input.data().data() + b * n_in;
            for (std::size_t i = 0; i < n_in; ++i) gw[i] += g * x[i];
            gb += g;
        }
        if (with_bias) grad_bias[o] += gb;
    }
}

}  // namespace harmonica::kernels
