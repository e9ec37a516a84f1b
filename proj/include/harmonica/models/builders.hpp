#pragma once

#include <optional>
#include <string>

#include "harmonica/models/arch.hpp"

namespace harmonica::models {

// ------------------------------------------------------------------ NORB

/// cnn2/cnn3 are the plain baselines. harmK replaces the first K feature
/// stages by harmonic blocks; harm4 also swaps fc 1024 for a global harmonic
/// block over the final 3x3 map. The compact variants shrink harm4: the global
/// block emits 32 features and dropout is removed; compact88k keeps
/// frequencies u+v < K in the 3x3 blocks, compact45k keeps u+v < K-1 and
/// switches to non-overlapping pooling.
enum class NorbVariant { cnn2, cnn3, harm1, harm2, harm3, harm4, compact131k, compact88k, compact45k };

/// overlap_* = 3x3/2 windows (pad 1); plain max/avg = 2x2/2.
enum class NorbPooling { max, avg, overlap_max, overlap_avg };

struct NorbOptions {
    NorbVariant variant = NorbVariant::harm3;
    NorbPooling pooling = NorbPooling::overlap_avg;
    bool first_block_bn = true;  // spectrum normalization in the first harmonic block
    bool drop_dc = false;        // remove the DC response in the first harmonic block
    std::size_t stages = 3;      // feature stages (2 or 3); cnn2 implies 2, cnn3 and harm3+ imply 3
    std::size_t width_divisor = 1;
    std::size_t channels = 2;  // stereo pair stacked channel-wise
    std::size_t size = 96;
    std::size_t classes = 5;
};

/// Throws ConfigError for combinations outside the studied grid.
ArchSpec norb_arch(const NorbOptions& options);
Network build_norb(const NorbOptions& options, std::uint64_t seed);

NorbVariant parse_norb_variant(const std::string& name);
NorbPooling parse_norb_pooling(const std::string& name);
std::string to_string(NorbVariant v);
std::string to_string(NorbPooling p);

// ------------------------------------------------------------------ WRN

/// harm0 swaps only the stem convolution for a harmonic block, harm0_bn adds
/// spectrum normalization to it, fully_harm swaps every 3x3 convolution
/// (shortcut projections stay 1x1 convolutions). lambda truncates hidden
/// blocks only; the stem always keeps the full input spectrum.
enum class WrnMode { baseline, harm0, harm0_bn, fully_harm };

struct WrnOptions {
    std::size_t depth = 28;  // 6n + 4
    std::size_t width = 10;
    WrnMode mode = WrnMode::baseline;
    std::optional<std::size_t> lambda;  // fully_harm only
    double dropout = 0.0;
    std::size_t classes = 10;
    std::size_t channels = 3;
    std::size_t size = 32;
};

ArchSpec wrn_arch(const WrnOptions& options);
Network build_wrn(const WrnOptions& options, std::uint64_t seed);

WrnMode parse_wrn_mode(const std::string& name);
std::string to_string(WrnMode m);

/// Resolves a preset name ("wrn-28-10", "wrn-28-10-fully_harm-l3",
/// "norb-harm3", "norb-cnn2-overlap_max", ...) or, failing that, reads the
/// argument as a path to an architecture text file.
ArchSpec resolve_arch(const std::string& name_or_path);

}  // namespace harmonica::models
