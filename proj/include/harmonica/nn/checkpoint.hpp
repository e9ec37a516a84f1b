#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "harmonica/nn/layer.hpp"

namespace harmonica::nn {

// Checkpoint file layout (all integers little-endian):
//
//   8 bytes   magic "HRMNCKPT"
//   u32       format version (currently 1)
//   u64 + N   architecture text (ArchSpec text form), UTF-8
//   u64 + N   metadata text (key=value lines, e.g. input normalization)
//   u64       tensor count
//   per tensor, parameters first in declaration order, then buffers:
//     u8        kind (0 = parameter, 1 = buffer)
//     u32 + N   name
//     4 x u64   shape (batch, channels, height, width)
//     f64 x numel  values, IEEE-754 binary64 little-endian
//
// See docs/checkpoint.md.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
    std::string name;
    bool is_buffer = false;
    Tensor tensor;
};

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::string arch_text;
    std::string meta_text;
    std::vector<CheckpointTensor> tensors;
};

Checkpoint capture_checkpoint(Layer& model, std::string arch_text, std::string meta_text);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws FormatError (with byte offset) on a malformed file.
Checkpoint read_checkpoint(const std::filesystem::path& path);
/// Copies stored values into the model; throws FormatError when the tensor
/// list does not match the model's parameters and buffers.
void restore_checkpoint(Layer& model, const Checkpoint& checkpoint);

}  // namespace harmonica::nn
