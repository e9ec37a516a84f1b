#include "harmonica/costing/cost.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "harmonica/spectral.hpp"

namespace harmonica::costing {

using models::LayerDesc;
using models::LayerKind;

std::uint64_t conv_params(std::uint64_t n, std::uint64_t m, std::uint64_t k) { return n * m * k * k; }

std::uint64_t harm_params(std::uint64_t n, std::uint64_t p, std::uint64_t m) { return n * p * m; }

std::uint64_t conv_madds(std::uint64_t n, std::uint64_t m, std::uint64_t k, std::uint64_t a, std::uint64_t b) {
    return n * m * k * k * a * b;
}

std::uint64_t harm_madds(std::uint64_t n, std::uint64_t p, std::uint64_t m, std::uint64_t k, std::uint64_t a,
                         std::uint64_t b, TransformCounting counting) {
    const std::uint64_t per_filter = counting == TransformCounting::dense ? k * k : 2 * k;
    return n * p * per_filter * a * b + n * p * m * a * b;
}

namespace {

std::uint64_t spectrum_size(const LayerDesc& l) {
    std::uint64_t p = l.lambda ? truncated_count(*l.lambda) : l.kernel * l.kernel;
    if (l.drop_dc) --p;
    return p;
}

struct Spatial {
    std::uint64_t params;
    std::uint64_t madds;
};

Spatial spatial(bool harmonic, const LayerDesc& l, std::uint64_t n, std::uint64_t m, std::uint64_t a,
                std::uint64_t b, TransformCounting counting) {
    if (!harmonic) return {conv_params(n, m, l.kernel), conv_madds(n, m, l.kernel, a, b)};
    const std::uint64_t p = spectrum_size(l);
    return {harm_params(n, p, m), harm_madds(n, p, m, l.kernel, a, b, counting)};
}

}  // namespace

CostReport cost_report(const models::ArchSpec& arch, TransformCounting counting) {
    const auto shapes = models::infer_shapes(arch);
    CostReport report;
    Shape cur = arch.input_shape(1);
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const LayerDesc& l = arch.layers[i];
        const Shape& out = shapes[i];
        CostRow row;
        row.name = std::to_string(i) + " " + models::describe(l);
        row.out_shape = out;
        const std::uint64_t n = cur.channels;
        const std::uint64_t a = out.height;
        const std::uint64_t b = out.width;
        switch (l.kind) {
            case LayerKind::conv:
            case LayerKind::harm:
            case LayerKind::global_harm: {
                const auto s = spatial(l.kind != LayerKind::conv, l, n, l.out, a, b, counting);
                row.params = s.params;
                row.madds = s.madds;
                break;
            }
            case LayerKind::fc:
                row.params = cur.sample() * l.out + l.out;
                row.madds = cur.sample() * l.out;
                break;
            case LayerKind::bn:
                row.params = 2 * cur.channels;
                break;
            case LayerKind::res: {
                const bool harmonic = l.body == models::ResBody::harm;
                const auto first = spatial(harmonic, l, n, l.out, a, b, counting);
                const auto second = spatial(harmonic, l, l.out, l.out, a, b, counting);
                row.params = 2 * n + first.params + 2 * l.out + second.params;
                row.madds = first.madds + second.madds;
                if (n != l.out || l.stride != 1) {
                    row.params += conv_params(n, l.out, 1);
                    row.madds += conv_madds(n, l.out, 1, a, b);
                }
                break;
            }
            case LayerKind::pool:
            case LayerKind::dropout:
            case LayerKind::relu:
                break;
        }
        report.total_params += row.params;
        report.total_madds += row.madds;
        report.rows.push_back(std::move(row));
        cur = out;
    }
    return report;
}

std::uint64_t count_params(const models::ArchSpec& arch) { return cost_report(arch).total_params; }

std::uint64_t count_madds(const models::ArchSpec& arch, TransformCounting counting) {
    return cost_report(arch, counting).total_madds;
}

std::uint64_t count_params(nn::Layer& model) { return model.parameter_count(); }

Comparison compare(const models::ArchSpec& model, const models::ArchSpec& reference, TransformCounting counting) {
    if (model.input_shape() != reference.input_shape()) {
        throw ConfigError("cannot compare models with inputs " + model.input_shape().str() + " and " +
                          reference.input_shape().str());
    }
    Comparison c;
    c.model = cost_report(model, counting);
    c.reference = cost_report(reference, counting);
    auto ratio = [](std::uint64_t x, std::uint64_t y) {
        if (x == y) return 1.0;
        return y == 0 ? 0.0 : static_cast<double>(x) / static_cast<double>(y);
    };
    c.param_ratio = ratio(c.model.total_params, c.reference.total_params);
    c.madd_ratio = ratio(c.model.total_madds, c.reference.total_madds);
    return c;
}

namespace {

std::string shape_text(const Shape& s) {
    return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

}  // namespace

std::string format_table(const CostReport& report) {
    std::size_t name_w = 5;
    for (const auto& r : report.rows) name_w = std::max(name_w, r.name.size());
    std::ostringstream os;
    auto line = [&](const std::string& name, const std::string& params, const std::string& madds,
                    const std::string& shape) {
        os << name << std::string(name_w - name.size() + 2, ' ');
        os << std::string(params.size() < 12 ? 12 - params.size() : 0, ' ') << params;
        os << std::string(madds.size() < 16 ? 16 - madds.size() : 0, ' ') << madds;
        os << "  " << shape << '\n';
    };
    line("layer", "params", "madds", "out_shape");
    for (const auto& r : report.rows)
        line(r.name, std::to_string(r.params), std::to_string(r.madds), shape_text(r.out_shape));
    line("total", std::to_string(report.total_params), std::to_string(report.total_madds), "");
    return os.str();
}

std::string format_csv(const CostReport& report) {
    std::ostringstream os;
    os << "layer,params,madds,out_shape\n";
    for (const auto& r : report.rows)
        os << '"' << r.name << "\"," << r.params << ',' << r.madds << ',' << shape_text(r.out_shape) << '\n';
    os << "total," << report.total_params << ',' << report.total_madds << ",\n";
    return os.str();
}

std::string human_count(std::uint64_t n) {
    char buf[32];
    if (n >= 1000000) {
        std::snprintf(buf, sizeof buf, "%.2fM", static_cast<double>(n) / 1e6);
    } else if (n >= 1000) {
        std::snprintf(buf, sizeof buf, "%.1fk", static_cast<double>(n) / 1e3);
    } else {
        std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(n));
    }
    return buf;
}

}  // namespace harmonica::costing
