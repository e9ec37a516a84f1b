#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "harmonica/kernels.hpp"
#include "harmonica/nn/layers.hpp"

namespace harmonica::models {

enum class LayerKind { conv, harm, global_harm, pool, fc, dropout, relu, bn, res };

/// Spatial operator used inside residual units.
enum class ResBody { conv, harm };

/// One row of an architecture description, mirroring the table notation
/// `{conv,harm} M,KxK/S`, `pool KxK/S`, `fc M`.
struct LayerDesc {
    LayerKind kind = LayerKind::relu;
    std::size_t out = 0;     // conv/harm/global_harm/fc/res output channels
    std::size_t kernel = 0;  // conv/harm/global_harm/pool/res window
    std::size_t stride = 1;
    std::optional<std::size_t> pad;  // unset = default_pad(kernel, stride)

    // harm / global_harm / res(harm)
    std::optional<std::size_t> lambda;
    bool spectrum_bn = false;
    bool drop_dc = false;

    PoolKind pool = PoolKind::max;  // pool
    double p = 0.0;                 // dropout, or the dropout inside a res unit
    ResBody body = ResBody::conv;   // res

    [[nodiscard]] std::size_t padding() const;
    friend bool operator==(const LayerDesc&, const LayerDesc&) = default;
};

/// `K/2` when windows overlap (stride < K), otherwise 0.
constexpr std::size_t default_pad(std::size_t kernel, std::size_t stride) { return stride < kernel ? kernel / 2 : 0; }

struct ArchSpec {
    std::size_t channels = 1;
    std::size_t height = 1;
    std::size_t width = 1;
    std::size_t classes = 2;
    std::vector<LayerDesc> layers;

    [[nodiscard]] Shape input_shape(std::size_t batch = 1) const { return {batch, channels, height, width}; }
    friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

/// Per-layer output shapes for batch 1. Throws ConfigError naming the layer
/// index when the chain is illegal (zero-size output, bad residual shapes,
/// final output not matching the class count, ...).
std::vector<Shape> infer_shapes(const ArchSpec& arch);

/// Human-readable text form, one layer per line (see docs/arch_format.md).
std::string to_text(const ArchSpec& arch);
ArchSpec parse_arch(const std::string& text);
/// Short notation of one layer, e.g. "harm 32,4x4/4 bn".
std::string describe(const LayerDesc& layer);

/// Built network: its description plus the live layer stack.
struct Network {
    ArchSpec arch;
    std::unique_ptr<nn::Sequential> net;

    Tensor forward(const Tensor& input, bool training) { return net->forward(input, training); }
    Tensor backward(const Tensor& grad) { return net->backward(grad); }
};

/// Instantiates an ArchSpec. Weight init draws from the "init" stream of
/// seed; every dropout layer gets its own "dropout/<index>" stream.
Network build(const ArchSpec& arch, std::uint64_t seed);

}  // namespace harmonica::models
