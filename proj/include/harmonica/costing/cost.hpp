#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "harmonica/models/arch.hpp"
#include "harmonica/nn/layer.hpp"

namespace harmonica::costing {

/// How the depthwise DCT stage of a harmonic block is charged. dense = K^2
/// madds per output position and filter; separable = 2K (column then row).
enum class TransformCounting { dense, separable };

// Per-layer closed forms. A, B are the output spatial size.
std::uint64_t conv_params(std::uint64_t n, std::uint64_t m, std::uint64_t k);
std::uint64_t harm_params(std::uint64_t n, std::uint64_t p, std::uint64_t m);
std::uint64_t conv_madds(std::uint64_t n, std::uint64_t m, std::uint64_t k, std::uint64_t a, std::uint64_t b);
std::uint64_t harm_madds(std::uint64_t n, std::uint64_t p, std::uint64_t m, std::uint64_t k, std::uint64_t a,
                         std::uint64_t b, TransformCounting counting = TransformCounting::dense);

struct CostRow {
    std::string name;
    std::uint64_t params = 0;
    std::uint64_t madds = 0;
    Shape out_shape;
};

struct CostReport {
    std::vector<CostRow> rows;
    std::uint64_t total_params = 0;
    std::uint64_t total_madds = 0;
};

/// One row per architecture line (residual units are charged as a whole).
/// Batch size is 1. Nothing is allocated, so WRN-28-10 is cheap to cost.
CostReport cost_report(const models::ArchSpec& arch, TransformCounting counting = TransformCounting::dense);

std::uint64_t count_params(const models::ArchSpec& arch);
std::uint64_t count_madds(const models::ArchSpec& arch, TransformCounting counting = TransformCounting::dense);
/// Learned scalars held by a live model.
std::uint64_t count_params(nn::Layer& model);

struct Comparison {
    CostReport model;
    CostReport reference;
    double param_ratio = 1.0;  // model / reference
    double madd_ratio = 1.0;
};

/// Both architectures must declare the same input shape.
Comparison compare(const models::ArchSpec& model, const models::ArchSpec& reference,
                   TransformCounting counting = TransformCounting::dense);

std::string format_table(const CostReport& report);
/// Columns layer,params,madds,out_shape; a final "total" row.
std::string format_csv(const CostReport& report);
/// 36479194 -> "36.48M", 130722 -> "130.7k".
std::string human_count(std::uint64_t n);

}  // namespace harmonica::costing
