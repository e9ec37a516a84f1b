#pragma once

// Test-only helpers and independent oracles. Nothing here calls into the
// library's numeric code, so it can serve as a cross-check for it.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "harmonica/rng.hpp"
#include "harmonica/tensor.hpp"

namespace test {

using harmonica::Rng;
using harmonica::Shape;
using harmonica::Tensor;

inline Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(s);
    for (auto& v : t.vec()) v = rng.uniform(lo, hi);
    return t;
}

/// max |a - b| relative to the largest magnitude in b. Elementwise relative
/// error is meaningless for outputs that cancel to ~0.
inline double scaled_error(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return INFINITY;
    double diff = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        scale = std::max(scale, std::abs(b[i]));
    }
    return diff / std::max(scale, 1e-300);
}

/// Closed-form DCT-II filter entry in long double.
inline long double dct_entry(std::size_t K, std::size_t u, std::size_t v, std::size_t y, std::size_t x) {
    const long double pi = std::numbers::pi_v<long double>;
    const long double au = u == 0 ? 1.0L : 2.0L;
    const long double av = v == 0 ? 1.0L : 2.0L;
    const long double k = static_cast<long double>(K);
    return std::sqrt(au / k) * std::sqrt(av / k) * std::cos(pi * (y + 0.5L) * u / k) *
           std::cos(pi * (x + 0.5L) * v / k);
}

/// Plain grouped cross-correlation with zero padding, long double accumulation.
inline Tensor oracle_conv(const Tensor& in, const Tensor& k, std::size_t stride, std::size_t pad,
                          std::size_t groups = 1) {
    const Shape s = in.shape();
    const Shape ks = k.shape();
    const std::size_t oh = (s.height + 2 * pad - ks.height) / stride + 1;
    const std::size_t ow = (s.width + 2 * pad - ks.width) / stride + 1;
    const std::size_t cpg = s.channels / groups;
    const std::size_t mpg = ks.batch / groups;
    Tensor out(s.batch, ks.batch, oh, ow);
    for (std::size_t b = 0; b < s.batch; ++b)
        for (std::size_t m = 0; m < ks.batch; ++m)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    long double acc = 0.0L;
                    const std::size_t g = m / mpg;
                    for (std::size_t c = 0; c < cpg; ++c)
                        for (std::size_t ky = 0; ky < ks.height; ++ky)
                            for (std::size_t kx = 0; kx < ks.width; ++kx) {
                                const long long y = static_cast<long long>(oy * stride + ky) - static_cast<long long>(pad);
                                const long long x = static_cast<long long>(ox * stride + kx) - static_cast<long long>(pad);
                                if (y < 0 || x < 0 || y >= static_cast<long long>(s.height) ||
                                    x >= static_cast<long long>(s.width))
                                    continue;
                                acc += static_cast<long double>(in.at(b, g * cpg + c, static_cast<std::size_t>(y),
                                                                      static_cast<std::size_t>(x))) *
                                       k.at(m, c, ky, kx);
                            }
                    out.at(b, m, oy, ox) = static_cast<double>(acc);
                }
    return out;
}

inline Tensor ramp(Shape s) {
    Tensor t(s);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
    return t;
}

}  // namespace test
