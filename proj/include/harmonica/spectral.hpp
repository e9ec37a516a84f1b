#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "harmonica/kernels.hpp"
#include "harmonica/tensor.hpp"

namespace harmonica {

/// One 2D DCT frequency. u indexes the vertical (row) axis, v the horizontal
/// (column) axis.
struct Frequency {
    std::size_t u = 0;
    std::size_t v = 0;
    friend bool operator==(const Frequency&, const Frequency&) = default;
};

/// Orthonormal DCT-II filter bank of window size K:
///   psi_{u,v}(y, x) = sqrt(a_u/K) sqrt(a_v/K) cos(pi (y+1/2) u / K) cos(pi (x+1/2) v / K)
/// with a_0 = 1 and a_k = 2 otherwise. Each filter is stored together with its
/// rank-1 factors; the dense filter is the exact outer product of the two.
class DCTBasis {
public:
    explicit DCTBasis(std::size_t window);

    [[nodiscard]] std::size_t window() const { return window_; }
    [[nodiscard]] std::size_t count() const { return window_ * window_; }

    static Scalar norm_alpha(std::size_t k) { return k == 0 ? 1.0 : 2.0; }

    /// 1D factor sqrt(a_k/K) cos(pi (i+1/2) k / K), i in [0, K).
    [[nodiscard]] std::span<const Scalar> factor(std::size_t k) const;
    /// Column factor (applied along rows/vertical axis) of psi_{u,v}.
    [[nodiscard]] std::span<const Scalar> col_factor(Frequency f) const { return factor(f.u); }
    /// Row factor (applied along columns/horizontal axis) of psi_{u,v}.
    [[nodiscard]] std::span<const Scalar> row_factor(Frequency f) const { return factor(f.v); }

    /// Dense K x K filter, row-major.
    [[nodiscard]] std::span<const Scalar> filter(Frequency f) const;
    /// All K^2 filters as a (K^2, 1, K, K) tensor in row-major (u, v) order.
    [[nodiscard]] const Tensor& filters() const { return filters_; }

private:
    std::size_t window_;
    std::vector<std::vector<Scalar>> factors_;
    Tensor filters_;
};

/// Bases are immutable; one instance per window size is shared process-wide.
std::shared_ptr<const DCTBasis> shared_dct_basis(std::size_t window);

struct SpectrumSelection {
    std::size_t window = 0;
    std::optional<std::size_t> lambda;  // nullopt = full spectrum
    std::vector<Frequency> indices;

    [[nodiscard]] std::size_t count() const { return indices.size(); }
    [[nodiscard]] bool contains_dc() const;
    /// Same selection with (0,0) removed; throws ConfigError if that empties it.
    [[nodiscard]] SpectrumSelection without_dc() const;
    /// Position of f in indices, or nullopt.
    [[nodiscard]] std::optional<std::size_t> position(Frequency f) const;
};

/// lambda = nullopt selects all K^2 frequencies in row-major (u, v) order.
/// Otherwise keeps u + v < lambda, ordered by diagonal level then u;
/// requires 1 <= lambda <= K.
SpectrumSelection select_frequencies(std::size_t window, std::optional<std::size_t> lambda);

/// Number of filters kept by truncation level lambda: lambda (lambda + 1) / 2.
constexpr std::size_t truncated_count(std::size_t lambda) { return lambda * (lambda + 1) / 2; }

/// Depthwise windowed DCT. Output has N * P' channels in channel-major order
/// (all selected frequencies of input channel 0, then channel 1, ...). Uses the
/// separable path: vertical column-factor pass, then horizontal row-factor pass.
Tensor dct_transform(const Tensor& input, const DCTBasis& basis, const SpectrumSelection& selection,
                     const ConvSpec& spec, bool drop_dc = false);

/// Gradient of dct_transform with respect to its input (separable path).
Tensor dct_transform_backward(const Tensor& grad_out, const DCTBasis& basis, const SpectrumSelection& selection,
                              const ConvSpec& spec, const Shape& input_shape, bool drop_dc = false);

/// (N * P', 1, K, K) depthwise kernels for the dense path: kernel n*P'+p is psi of selection entry p.
Tensor depthwise_dct_kernels(const DCTBasis& basis, const SpectrumSelection& selection, std::size_t channels);

/// Same result as dct_transform, computed as a grouped dense convolution.
Tensor dct_transform_dense(const Tensor& input, const DCTBasis& basis, const SpectrumSelection& selection,
                           const ConvSpec& spec, bool drop_dc = false);

/// Writes psi_<u>_<v>.pgm (8-bit binary graymap, per-filter min-max scaled,
/// each filter pixel drawn as a scale x scale block) for every filter plus
/// basis.txt with the raw values. Returns the written PGM paths.
std::vector<std::filesystem::path> export_basis(const DCTBasis& basis, const std::filesystem::path& out_dir,
                                                std::size_t scale = 1);

}  // namespace harmonica
