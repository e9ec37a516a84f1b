#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "harmonica/rng.hpp"
#include "harmonica/tensor.hpp"

namespace harmonica::data {

/// Samples (count, C, H, W) with values in [0, 1] and integer labels.
struct Dataset {
    std::string name;
    Tensor samples;
    std::vector<int> labels;
    std::size_t classes = 0;

    [[nodiscard]] std::size_t size() const { return labels.size(); }
    [[nodiscard]] Shape sample_shape() const { return {1, samples.shape().channels, samples.shape().height, samples.shape().width}; }
    /// Throws InputError on count mismatch or a label outside [0, classes).
    void validate() const;
    /// Copies the listed samples, in order.
    [[nodiscard]] Dataset subset(const std::vector<std::size_t>& indices) const;
    [[nodiscard]] Tensor gather(const std::vector<std::size_t>& indices) const;
    [[nodiscard]] std::vector<int> gather_labels(const std::vector<std::size_t>& indices) const;
};

/// IDX images (u8, rank 3 = N,H,W or rank 4 = N,C,H,W) plus IDX u8 labels.
/// classes = 0 infers max label + 1. Errors carry the byte offset.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t classes = 0);
/// Inverse of load_idx; rank 3 when the dataset has one channel.
void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels, const Dataset& dataset);

/// CIFAR binary batches: 1 label byte (10 classes) or coarse+fine bytes
/// (100 classes, fine label kept) followed by 3072 channel-planar pixels.
Dataset load_cifar_binary(const std::vector<std::filesystem::path>& paths, std::size_t classes);

enum class SynthKind { oriented_gratings, frequency_classes, lit_shapes };
SynthKind parse_synth_kind(const std::string& name);
std::string to_string(SynthKind kind);

/// Global illumination applied to lit_shapes: pixel = gain * base + offset.
struct Lighting {
    std::string name = "standard";
    double gain = 1.0;
    double offset = 0.0;
};
/// "standard" (1, 0), "bright" (1.1, +0.25), "dark" (0.9, -0.25).
Lighting parse_lighting(const std::string& name);

struct SynthOptions {
    SynthKind kind = SynthKind::frequency_classes;
    std::size_t count = 256;
    std::size_t size = 16;
    std::size_t classes = 2;
    std::size_t channels = 1;
    std::uint64_t seed = 1;
    Lighting lighting;  // lit_shapes only
};

/// Deterministic in the options. Samples are class-balanced and interleaved
/// (sample i has label i % classes). count must be divisible by classes.
///  frequency_classes: tiled 4x4 DCT patterns, class c uses its own (u, v)
///  oriented_gratings: sinusoids at orientation pi * c / classes, random phase
///  lit_shapes: filled square, outline square, cross, disc, ... on a grey
///    background; lighting only changes gain and offset, never the shapes
Dataset synth_dataset(const SynthOptions& options);

/// Mini-batch index lists covering 0..count-1 exactly once per epoch.
/// With an rng the order is reshuffled at every reset().
class BatchIterator {
public:
    BatchIterator(std::size_t count, std::size_t batch_size, Rng* shuffle = nullptr);

    void reset();
    /// Fills out with the next batch; false once the epoch is exhausted.
    bool next(std::vector<std::size_t>& out);
    [[nodiscard]] std::size_t batches_per_epoch() const;

private:
    std::size_t batch_size_;
    Rng* rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

}  // namespace harmonica::data
