#pragma once

#include <filesystem>
#include <vector>

#include "harmonica/nn/layer.hpp"

namespace harmonica::models {

struct ImportanceRow {
    std::size_t block = 0;  // harmonic block index in visit order
    std::size_t u = 0;
    std::size_t v = 0;
    double importance = 0.0;
};

/// Mean |w| over (output, input channel) for every frequency of every
/// harmonic block, normalized so each block sums to 1. A block whose weights
/// are all zero reports zeros. Returns an empty table when the model has no
/// harmonic blocks.
std::vector<ImportanceRow> frequency_importance(nn::Layer& model);

/// CSV with header block,u,v,importance.
void write_importance_csv(const std::filesystem::path& path, const std::vector<ImportanceRow>& rows);

}  // namespace harmonica::models
