#include "harmonica/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <numbers>

namespace harmonica {

DCTBasis::DCTBasis(std::size_t window) : window_(window) {
    if (window == 0) throw ConfigError("DCT window size must be >= 1");
    const auto k_size = static_cast<Scalar>(window);
    factors_.resize(window);
    for (std::size_t k = 0; k < window; ++k) {
        factors_[k].resize(window);
        const Scalar scale = std::sqrt(norm_alpha(k) / k_size);
        for (std::size_t i = 0; i < window; ++i) {
            factors_[k][i] =
                scale * std::cos(std::numbers::pi * (static_cast<Scalar>(i) + 0.5) * static_cast<Scalar>(k) / k_size);
        }
    }
    filters_ = Tensor(window * window, 1, window, window);
    for (std::size_t u = 0; u < window; ++u)
        for (std::size_t v = 0; v < window; ++v)
            for (std::size_t y = 0; y < window; ++y)
                for (std::size_t x = 0; x < window; ++x)
                    filters_.at(u * window + v, 0, y, x) = factors_[u][y] * factors_[v][x];
}

std::span<const Scalar> DCTBasis::factor(std::size_t k) const {
    if (k >= window_) throw DimensionError("DCT frequency " + std::to_string(k) + " >= window " + std::to_string(window_));
    return factors_[k];
}

std::span<const Scalar> DCTBasis::filter(Frequency f) const {
    if (f.u >= window_ || f.v >= window_) throw DimensionError("DCT frequency outside window");
    return filters_.plane(f.u * window_ + f.v, 0);
}

std::shared_ptr<const DCTBasis> shared_dct_basis(std::size_t window) {
    static std::mutex mutex;
    static std::map<std::size_t, std::shared_ptr<const DCTBasis>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[window];
    if (!slot) slot = std::make_shared<const DCTBasis>(window);
    return slot;
}

bool SpectrumSelection::contains_dc() const { return position(Frequency{0, 0}).has_value(); }

std::optional<std::size_t> SpectrumSelection::position(Frequency f) const {
    const auto it = std::find(indices.begin(), indices.end(), f);
    if (it == indices.end()) return std::nullopt;
    return static_cast<std::size_t>(it - indices.begin());
}

SpectrumSelection SpectrumSelection::without_dc() const {
    SpectrumSelection out = *this;
    std::erase(out.indices, Frequency{0, 0});
    if (out.indices.empty()) throw ConfigError("dropping the DC component leaves an empty spectrum (lambda = 1)");
    return out;
}

SpectrumSelection select_frequencies(std::size_t window, std::optional<std::size_t> lambda) {
    if (window == 0) throw ConfigError("DCT window size must be >= 1");
    SpectrumSelection s{window, lambda, {}};
    if (!lambda) {
        for (std::size_t u = 0; u < window; ++u)
            for (std::size_t v = 0; v < window; ++v) s.indices.push_back({u, v});
        return s;
    }
    if (*lambda < 1 || *lambda > window) {
        throw ConfigError("lambda " + std::to_string(*lambda) + " outside [1, " + std::to_string(window) + "]");
    }
    for (std::size_t level = 0; level < *lambda; ++level)
        for (std::size_t u = 0; u <= level; ++u) s.indices.push_back({u, level - u});
    return s;
}

namespace {

SpectrumSelection effective_selection(const SpectrumSelection& selection, bool drop_dc) {
    return drop_dc ? selection.without_dc() : selection;
}

void check_transform(const Shape& in, const DCTBasis& basis, const SpectrumSelection& sel, const ConvSpec& spec) {
    if (spec.kernel_h != basis.window() || spec.kernel_w != basis.window()) {
        throw DimensionError("dct_transform: conv kernel " + std::to_string(spec.kernel_h) + "x" +
                             std::to_string(spec.kernel_w) + " does not match DCT window " +
                             std::to_string(basis.window()));
    }
    if (sel.window != basis.window()) throw DimensionError("dct_transform: selection built for another window size");
    if (spec.groups != 1 && spec.groups != in.channels) {
        throw ConfigError("dct_transform is depthwise; leave groups at 1 or set it to the channel count");
    }
    for (const auto& f : sel.indices) {
        if (f.u >= basis.window() || f.v >= basis.window()) throw DimensionError("selection frequency outside window");
    }
}

// Selection entries grouped by vertical frequency u so the column pass is
// shared by every v with the same u.
std::vector<std::pair<std::size_t, std::vector<std::size_t>>> group_by_u(const SpectrumSelection& sel) {
    std::vector<std::pair<std::size_t, std::vector<std::size_t>>> groups;
    for (std::size_t p = 0; p < sel.indices.size(); ++p) {
        const std::size_t u = sel.indices[p].u;
        auto it = std::find_if(groups.begin(), groups.end(), [u](const auto& g) { return g.first == u; });
        if (it == groups.end()) {
            groups.push_back({u, {p}});
        } else {
            it->second.push_back(p);
        }
    }
    return groups;
}

}  // namespace

Tensor dct_transform(const Tensor& input, const DCTBasis& basis, const SpectrumSelection& selection,
                     const ConvSpec& spec, bool drop_dc) {
    const SpectrumSelection sel = effective_selection(selection, drop_dc);
    const Shape& is = input.shape();
    check_transform(is, basis, sel, spec);
    const std::size_t k = basis.window();
    const std::size_t oh = spec.out_height(is.height);
    const std::size_t ow = spec.out_width(is.width);
    const std::size_t wp = is.width + 2 * spec.pad_w;
    const std::size_t p_count = sel.count();
    const auto groups = group_by_u(sel);
    Tensor out(is.batch, is.channels * p_count, oh, ow);

    const auto jobs = static_cast<std::int64_t>(is.batch * is.channels);
#pragma omp parallel for schedule(static)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const std::size_t b = static_cast<std::size_t>(job) / is.channels;
        const std::size_t n = static_cast<std::size_t>(job) % is.channels;
        const auto src = input.plane(b, n);
        std::vector<Scalar> vertical(oh * wp);
        for (const auto& [u, members] : groups) {
            const auto col = basis.factor(u);
            std::fill(vertical.begin(), vertical.end(), 0.0);
            for (std::size_t oy = 0; oy < oh; ++oy) {
                Scalar* v_row = vertical.data() + oy * wp + spec.pad_w;
                for (std::size_t i = 0; i < k; ++i) {
                    const std::size_t iy_p = oy * spec.stride_h + i;
                    if (iy_p < spec.pad_h || iy_p - spec.pad_h >= is.height) continue;
                    const Scalar* in_row = src.data() + (iy_p - spec.pad_h) * is.width;
                    for (std::size_t x = 0; x < is.width; ++x) v_row[x] += col[i] * in_row[x];
                }
            }
            for (const std::size_t p : members) {
                const auto row = basis.factor(sel.indices[p].v);
                auto dst = out.plane(b, n * p_count + p);
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const Scalar* v_row = vertical.data() + oy * wp;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        Scalar acc = 0.0;
                        for (std::size_t j = 0; j < k; ++j) acc += row[j] * v_row[ox * spec.stride_w + j];
                        dst[oy * ow + ox] = acc;
                    }
                }
            }
        }
    }
    return out;
}

Tensor dct_transform_backward(const Tensor& grad_out, const DCTBasis& basis, const SpectrumSelection& selection,
                              const ConvSpec& spec, const Shape& input_shape, bool drop_dc) {
    const SpectrumSelection sel = effective_selection(selection, drop_dc);
    check_transform(input_shape, basis, sel, spec);
    const std::size_t k = basis.window();
    const std::size_t oh = spec.out_height(input_shape.height);
    const std::size_t ow = spec.out_width(input_shape.width);
    const std::size_t p_count = sel.count();
    const Shape& gs = grad_out.shape();
    if (gs.batch != input_shape.batch || gs.channels != input_shape.channels * p_count || gs.height != oh ||
        gs.width != ow) {
        throw DimensionError("dct_transform backward: grad_out shape " + gs.str() + " does not match forward output");
    }
    const std::size_t hp = input_shape.height + 2 * spec.pad_h;
    const std::size_t wp = input_shape.width + 2 * spec.pad_w;
    const auto groups = group_by_u(sel);
    Tensor grad_in(input_shape);

    const auto jobs = static_cast<std::int64_t>(input_shape.batch * input_shape.channels);
#pragma omp parallel for schedule(static)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const std::size_t b = static_cast<std::size_t>(job) / input_shape.channels;
        const std::size_t n = static_cast<std::size_t>(job) % input_shape.channels;
        std::vector<Scalar> padded(hp * wp, 0.0);
        std::vector<Scalar> horizontal(oh * wp);
        for (const auto& [u, members] : groups) {
            std::fill(horizontal.begin(), horizontal.end(), 0.0);
            for (const std::size_t p : members) {
                const auto row = basis.factor(sel.indices[p].v);
                const auto g = grad_out.plane(b, n * p_count + p);
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    Scalar* h_row = horizontal.data() + oy * wp;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const Scalar gv = g[oy * ow + ox];
                        for (std::size_t j = 0; j < k; ++j) h_row[ox * spec.stride_w + j] += row[j] * gv;
                    }
                }
            }
            const auto col = basis.factor(u);
            for (std::size_t oy = 0; oy < oh; ++oy) {
                const Scalar* h_row = horizontal.data() + oy * wp;
                for (std::size_t i = 0; i < k; ++i) {
                    Scalar* p_row = padded.data() + (oy * spec.stride_h + i) * wp;
                    for (std::size_t x = 0; x < wp; ++x) p_row[x] += col[i] * h_row[x];
                }
            }
        }
        auto dst = grad_in.plane(b, n);
        for (std::size_t y = 0; y < input_shape.height; ++y)
            for (std::size_t x = 0; x < input_shape.width; ++x)
                dst[y * input_shape.width + x] = padded[(y + spec.pad_h) * wp + x + spec.pad_w];
    }
    return grad_in;
}

Tensor depthwise_dct_kernels(const DCTBasis& basis, const SpectrumSelection& selection, std::size_t channels) {
    const std::size_t k = basis.window();
    const std::size_t p_count = selection.count();
    Tensor kernels(channels * p_count, 1, k, k);
    for (std::size_t n = 0; n < channels; ++n)
        for (std::size_t p = 0; p < p_count; ++p) {
            const auto f = basis.filter(selection.indices[p]);
            std::copy(f.begin(), f.end(), kernels.plane(n * p_count + p, 0).begin());
        }
    return kernels;
}

Tensor dct_transform_dense(const Tensor& input, const DCTBasis& basis, const SpectrumSelection& selection,
                           const ConvSpec& spec, bool drop_dc) {
    const SpectrumSelection sel = effective_selection(selection, drop_dc);
    check_transform(input.shape(), basis, sel, spec);
    ConvSpec depthwise = spec;
    depthwise.groups = input.shape().channels;
    return kernels::conv2d(input, depthwise_dct_kernels(basis, sel, input.shape().channels), depthwise);
}

std::vector<std::filesystem::path> export_basis(const DCTBasis& basis, const std::filesystem::path& out_dir,
                                                std::size_t scale) {
    if (scale == 0) throw ConfigError("export scale must be >= 1");
    std::filesystem::create_directories(out_dir);
    const std::size_t k = basis.window();
    std::vector<std::filesystem::path> written;
    std::ofstream dump(out_dir / "basis.txt");
    if (!dump) throw InputError("cannot write " + (out_dir / "basis.txt").string());
    dump << "# DCT-II basis, window " << k << "; filter (u,v), rows = y, columns = x\n";
    dump << std::setprecision(17);
    for (std::size_t u = 0; u < k; ++u) {
        for (std::size_t v = 0; v < k; ++v) {
            const auto f = basis.filter({u, v});
            dump << "psi " << u << ' ' << v << '\n';
            for (std::size_t y = 0; y < k; ++y) {
                for (std::size_t x = 0; x < k; ++x) dump << (x ? " " : "") << f[y * k + x];
                dump << '\n';
            }

            const auto [lo_it, hi_it] = std::minmax_element(f.begin(), f.end());
            const Scalar lo = *lo_it;
            const Scalar range = *hi_it - lo;
            const std::size_t side = k * scale;
            std::vector<std::uint8_t> pixels(side * side);
            for (std::size_t y = 0; y < side; ++y)
                for (std::size_t x = 0; x < side; ++x) {
                    const Scalar value = f[(y / scale) * k + x / scale];
                    Scalar level = range > 0.0 ? (value - lo) / range : (value > 0.0 ? 1.0 : 0.0);
                    pixels[y * side + x] = static_cast<std::uint8_t>(std::lround(255.0 * level));
                }
            const auto path = out_dir / ("psi_" + std::to_string(u) + "_" + std::to_string(v) + ".pgm");
            std::ofstream pgm(path, std::ios::binary);
            if (!pgm) throw InputError("cannot write " + path.string());
            pgm << "P5\n" << side << ' ' << side << "\n255\n";
            pgm.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
            written.push_back(path);
        }
    }
    return written;
}

}  // namespace harmonica
